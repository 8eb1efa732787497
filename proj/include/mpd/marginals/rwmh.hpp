#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mpd/core/error.hpp"
#include "mpd/core/random.hpp"
#include "mpd/core/stats.hpp"
#include "mpd/marginals/families.hpp"

namespace mpd::marginals {

struct ChainConfig {
  int iterations = 20000;
  int burn_in = 10000;
  int thin = 5;
  double target_acceptance = 0.3;
};

// Independent priors: inverse-gamma on positive parameters, normal on mu,
// uniform on [0, min(data) - eps] for the log-normal shift.
struct PriorSpec {
  double ig_shape = 2.1;
  double ig_scale = 1.1;
  double normal_mean = 0.0;
  double normal_sd = 10.0;
};

struct MarginalPosterior {
  FamilyTag family = FamilyTag::SinghMaddala;
  std::vector<std::string> names;
  Eigen::MatrixXd draws;  // S x dim, natural parameterisation
  std::vector<double> log_posterior;
  std::vector<double> log_likelihood;
  double acceptance_rate = 0.0;
  std::size_t n = 0;
  // Added to observations before evaluating the family (log-normal fits on data
  // with non-positive values are carried out on shifted data).
  double location_offset = 0.0;

  std::size_t size() const { return static_cast<std::size_t>(draws.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(draws.cols()); }
  Family family_at(std::size_t s) const {
    std::vector<double> p(dim());
    for (std::size_t j = 0; j < dim(); ++j) p[j] = draws(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j));
    return make_family(family, p);
  }
  std::vector<double> posterior_mean() const {
    std::vector<double> m(dim());
    for (std::size_t j = 0; j < dim(); ++j) m[j] = draws.col(static_cast<Eigen::Index>(j)).mean();
    return m;
  }
  double cdf_at(std::size_t s, double x) const { return cdf(family_at(s), x + location_offset); }
};

// Degenerate posterior holding a single known parameter vector.
inline MarginalPosterior fixed_posterior(const Family& f) {
  MarginalPosterior post;
  post.family = tag_of(f);
  post.names = parameter_names(post.family);
  const auto p = std::visit([](const auto& m) { return m.params(); }, f);
  post.draws.resize(1, static_cast<Eigen::Index>(p.size()));
  for (std::size_t j = 0; j < p.size(); ++j) post.draws(0, static_cast<Eigen::Index>(j)) = p[j];
  post.log_posterior = {0.0};
  post.log_likelihood = {0.0};
  post.acceptance_rate = 1.0;
  return post;
}

// Plain O(n) log-likelihood, used for information criteria and as a reference
// for the cached evaluations inside the sampler.
inline double log_likelihood(const Family& f, std::span<const double> data, double offset = 0.0) {
  double ll = 0.0;
  for (double x : data) ll += log_lik_point(f, x + offset);
  return ll;
}

namespace detail {

enum class Transform { Log, Identity, Bounded };

// Log-likelihood of one family with cached data sums. Sums that depend on a
// subset of parameters are reused when a componentwise move leaves that subset
// unchanged.
class FamilyTarget {
 public:
  FamilyTarget(FamilyTag tag, std::span<const double> data, const PriorSpec& prior)
      : tag_(tag), prior_(prior), n_(data.size()) {
    switch (tag) {
      case FamilyTag::SinghMaddala:
      case FamilyTag::Dagum:
        for (double x : data)
          if (!(x > 0.0)) throw DomainError(std::string(name(tag)) + " requires strictly positive data");
        logs_pos_.reserve(n_);
        for (double x : data) logs_pos_.push_back(std::log(x));
        sum_log_pos_ = sum(logs_pos_);
        transforms_ = {Transform::Log, Transform::Log, Transform::Log};
        break;
      case FamilyTag::ShiftedLogNormal: {
        const double lo = *std::min_element(data.begin(), data.end());
        const double sd = std::sqrt(variance(data));
        offset_ = lo > 0.0 ? 0.0 : -lo + 1e-3 * sd;
        shifted_.reserve(n_);
        for (double x : data) shifted_.push_back(x + offset_);
        gamma_upper_ = (lo + offset_) * (1.0 - 1e-6);
        transforms_ = {Transform::Identity, Transform::Log, Transform::Bounded};
        break;
      }
      case FamilyTag::NegPosMixture:
        for (double x : data) {
          if (x < 0.0) {
            logs_neg_.push_back(std::log(-x));
          } else if (x == 0.0) {
            ++n_zero_;
          } else {
            logs_pos_.push_back(std::log(x));
          }
        }
        if (logs_pos_.empty()) throw DegenerateDataError("mixture needs positive observations");
        sum_log_pos_ = sum(logs_pos_);
        sum_log_neg_ = sum(logs_neg_);
        w_neg_ = static_cast<double>(logs_neg_.size()) / static_cast<double>(n_);
        w_zero_ = static_cast<double>(n_zero_) / static_cast<double>(n_);
        transforms_ = {Transform::Identity, Transform::Identity, Transform::Log, Transform::Log,
                       Transform::Log,      Transform::Log,      Transform::Log};
        fixed_ = {true, true, false, false, false, false, false};
        break;
    }
    if (fixed_.empty()) fixed_.assign(transforms_.size(), false);
  }

  std::size_t dim() const { return transforms_.size(); }
  bool fixed(std::size_t j) const { return fixed_[j]; }
  Transform transform(std::size_t j) const { return transforms_[j]; }
  double offset() const { return offset_; }

  std::vector<double> initial() const {
    switch (tag_) {
      case FamilyTag::SinghMaddala:
      case FamilyTag::Dagum: {
        const double med = std::exp(median(logs_pos_));
        const double shape = M_PI / (std::sqrt(3.0) * std::sqrt(std::max(variance(logs_pos_), 1e-12)));
        return {tag_ == FamilyTag::SinghMaddala ? shape : med, tag_ == FamilyTag::SinghMaddala ? med : shape, 1.0};
      }
      case FamilyTag::ShiftedLogNormal: {
        const double g = 0.5 * gamma_upper_;
        std::vector<double> y;
        for (double x : shifted_) y.push_back(std::log(x - g));
        return {mean(y), std::sqrt(std::max(variance(y), 1e-8)), g};
      }
      case FamilyTag::NegPosMixture: {
        double l0 = 1.0;
        if (!logs_neg_.empty()) {
          std::vector<double> absx;
          for (double lx : logs_neg_) absx.push_back(std::exp(lx));
          l0 = mean(absx);
        }
        const double med = std::exp(median(logs_pos_));
        const double shape = M_PI / (std::sqrt(3.0) * std::sqrt(std::max(variance(logs_pos_), 1e-12)));
        return {w_neg_, w_zero_, l0, 1.0, med, shape, 1.0};
      }
    }
    return {};
  }

  // Unconstrained <-> natural maps for sampled components.
  double to_natural(std::size_t j, double theta) const {
    switch (transforms_[j]) {
      case Transform::Log: return std::exp(theta);
      case Transform::Identity: return theta;
      case Transform::Bounded: return gamma_upper_ / (1.0 + std::exp(-theta));
    }
    return theta;
  }
  double to_unconstrained(std::size_t j, double x) const {
    switch (transforms_[j]) {
      case Transform::Log: return std::log(x);
      case Transform::Identity: return x;
      case Transform::Bounded: return std::log(x / (gamma_upper_ - x));
    }
    return x;
  }
  double log_jacobian(std::size_t j, double theta) const {
    switch (transforms_[j]) {
      case Transform::Log: return theta;
      case Transform::Identity: return 0.0;
      case Transform::Bounded: return std::log(gamma_upper_) - softplus(-theta) - softplus(theta);
    }
    return 0.0;
  }

  double log_prior(std::span<const double> p) const {
    double lp = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (fixed_[j]) continue;
      if (tag_ == FamilyTag::ShiftedLogNormal && j == 0) {
        const double z = (p[j] - prior_.normal_mean) / prior_.normal_sd;
        lp += -0.5 * z * z;
      } else if (tag_ == FamilyTag::ShiftedLogNormal && j == 2) {
        if (p[j] < 0.0 || p[j] > gamma_upper_) return -std::numeric_limits<double>::infinity();
      } else {
        lp += -(prior_.ig_shape + 1.0) * std::log(p[j]) - prior_.ig_scale / p[j];
      }
    }
    return lp;
  }

  // changed: index of the component that moved since the committed state, or -1.
  double log_likelihood(std::span<const double> p, int changed) {
    switch (tag_) {
      case FamilyTag::SinghMaddala: {
        const double a = p[0], b = p[1], q = p[2];
        const double s = cached_sum(changed == 2, [&] { return softplus_sum(logs_pos_, a, std::log(b)); });
        const double n = static_cast<double>(n_);
        return n * (std::log(a) + std::log(q) - a * std::log(b)) + (a - 1.0) * sum_log_pos_ - (q + 1.0) * s;
      }
      case FamilyTag::Dagum: {
        const double c = p[0], d = p[1], pp = p[2];
        const double s = cached_sum(changed == 2, [&] { return softplus_sum(logs_pos_, d, std::log(c)); });
        const double n = static_cast<double>(n_);
        return n * (std::log(d) + std::log(pp) - d * pp * std::log(c)) + (d * pp - 1.0) * sum_log_pos_ -
               (pp + 1.0) * s;
      }
      case FamilyTag::ShiftedLogNormal: {
        const double mu = p[0], sigma = p[1], g = p[2];
        if (changed == 2 || changed < 0 || !have_cache_) {
          double y1 = 0.0, y2 = 0.0;
          for (double x : shifted_) {
            const double y = std::log(x - g);
            y1 += y;
            y2 += y * y;
          }
          pending_ = {y1, y2};
          pending_valid_ = true;
        } else {
          pending_ = committed_;
          pending_valid_ = true;
        }
        const double y1 = pending_[0], y2 = pending_[1];
        const double n = static_cast<double>(n_);
        return -y1 - n * std::log(sigma) - 0.5 * n * std::log(2.0 * M_PI) -
               (y2 - 2.0 * mu * y1 + n * mu * mu) / (2.0 * sigma * sigma);
      }
      case FamilyTag::NegPosMixture: {
        const double l = p[2], k = p[3], c = p[4], d = p[5], pp = p[6];
        const double nn = static_cast<double>(logs_neg_.size()), np = static_cast<double>(logs_pos_.size());
        double ll = 0.0;
        if (nn > 0) ll += nn * std::log(w_neg_);
        if (n_zero_ > 0) ll += static_cast<double>(n_zero_) * std::log(w_zero_);
        ll += np * std::log1p(-(w_neg_ + w_zero_));
        // Weibull block (components 2,3) and Dagum block (4,5,6) use separate caches.
        if (nn > 0) {
          const bool reuse = have_cache_ && changed >= 4;
          double pw = reuse ? committed_[1] : 0.0;
          if (!reuse) {
            const double ll_ = std::log(l);
            for (double lx : logs_neg_) pw += std::exp(k * (lx - ll_));
          }
          pending_[1] = pw;
          ll += nn * (std::log(k) - std::log(l)) + (k - 1.0) * (sum_log_neg_ - nn * std::log(l)) - pw;
        } else {
          pending_[1] = 0.0;
        }
        const bool reuse_d = have_cache_ && (changed == 2 || changed == 3 || changed == 6);
        const double s = reuse_d ? committed_[0] : softplus_sum(logs_pos_, d, std::log(c));
        pending_[0] = s;
        pending_valid_ = true;
        ll += np * (std::log(d) + std::log(pp) - d * pp * std::log(c)) + (d * pp - 1.0) * sum_log_pos_ -
              (pp + 1.0) * s;
        return ll;
      }
    }
    return 0.0;
  }

  void commit() {
    if (pending_valid_) committed_ = pending_;
    have_cache_ = true;
  }

 private:
  static double sum(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  static double softplus_sum(const std::vector<double>& logs, double shape, double log_scale) {
    const Eigen::Map<const Eigen::ArrayXd> lx(logs.data(), static_cast<Eigen::Index>(logs.size()));
    const Eigen::ArrayXd z = shape * (lx - log_scale);
    return (z.max(0.0) + (1.0 + (-z.abs()).exp()).log()).sum();
  }
  template <class F>
  double cached_sum(bool reusable, F&& compute) {
    pending_[0] = (reusable && have_cache_) ? committed_[0] : compute();
    pending_valid_ = true;
    return pending_[0];
  }

  FamilyTag tag_;
  PriorSpec prior_;
  std::size_t n_;
  std::vector<double> logs_pos_, logs_neg_, shifted_;
  double sum_log_pos_ = 0.0, sum_log_neg_ = 0.0;
  std::size_t n_zero_ = 0;
  double w_neg_ = 0.0, w_zero_ = 0.0;
  double offset_ = 0.0, gamma_upper_ = 0.0;
  std::vector<Transform> transforms_;
  std::vector<bool> fixed_;
  std::array<double, 2> committed_{}, pending_{};
  bool have_cache_ = false, pending_valid_ = false;
};

}  // namespace detail

// Componentwise random-walk Metropolis-Hastings on transformed parameters.
// Step sizes adapt by Robbins-Monro towards the target acceptance during
// burn-in only and stay fixed afterwards.
inline MarginalPosterior rwmh_fit(std::span<const double> data, FamilyTag family, const PriorSpec& prior,
                                  const ChainConfig& chain, std::uint64_t seed) {
  if (data.size() < 50) throw ValidationError("marginal fit needs at least 50 observations");
  if (chain.iterations <= chain.burn_in || chain.thin < 1 || chain.burn_in < 0)
    throw ValidationError("chain config needs iterations > burn_in >= 0 and thin >= 1");
  if (variance(data) <= 0.0) throw DegenerateDataError("marginal fit on constant data");

  detail::FamilyTarget target(family, data, prior);
  Rng rng(seed);
  const std::size_t dim = target.dim();

  std::vector<double> x = target.initial();
  std::vector<double> theta(dim);
  for (std::size_t j = 0; j < dim; ++j) theta[j] = target.to_unconstrained(j, x[j]);
  std::vector<double> log_step(dim, std::log(0.1));

  double ll = target.log_likelihood(x, -1);
  target.commit();
  auto log_target = [&](const std::vector<double>& p, const std::vector<double>& th, double loglik) {
    double lp = target.log_prior(p) + loglik;
    for (std::size_t j = 0; j < dim; ++j)
      if (!target.fixed(j)) lp += target.log_jacobian(j, th[j]);
    return lp;
  };
  double lpost = log_target(x, theta, ll);
  if (!std::isfinite(lpost)) throw ChainError("initial state has zero posterior density");

  MarginalPosterior post;
  post.family = family;
  post.names = parameter_names(family);
  post.n = data.size();
  post.location_offset = target.offset();
  const int kept = (chain.iterations - chain.burn_in) / chain.thin;
  post.draws.resize(kept, static_cast<Eigen::Index>(dim));
  post.log_posterior.reserve(static_cast<std::size_t>(kept));
  post.log_likelihood.reserve(static_cast<std::size_t>(kept));

  std::size_t sampled = 0;
  for (std::size_t j = 0; j < dim; ++j) sampled += target.fixed(j) ? 0 : 1;
  const int max_dead_sweeps = static_cast<int>(10 * dim);
  int dead_sweeps = 0;
  std::size_t accepted_after = 0, proposed_after = 0;
  int stored = 0;

  for (int it = 0; it < chain.iterations; ++it) {
    bool any_accept = false;
    for (std::size_t j = 0; j < dim; ++j) {
      if (target.fixed(j)) continue;
      const double old_theta = theta[j], old_x = x[j];
      theta[j] = old_theta + std::exp(log_step[j]) * rng.normal();
      x[j] = target.to_natural(j, theta[j]);
      double prop_ll = -std::numeric_limits<double>::infinity();
      double prop_post = prop_ll;
      if (std::isfinite(x[j]) && std::isfinite(target.log_prior(x))) {
        prop_ll = target.log_likelihood(x, static_cast<int>(j));
        prop_post = log_target(x, theta, prop_ll);
      }
      const bool accept = std::isfinite(prop_post) && std::log(rng.uniform()) < prop_post - lpost;
      if (accept) {
        ll = prop_ll;
        lpost = prop_post;
        target.commit();
        any_accept = true;
      } else {
        theta[j] = old_theta;
        x[j] = old_x;
      }
      if (it < chain.burn_in) {
        const double rate = 1.0 / std::pow(1.0 + it, 0.6);
        log_step[j] += rate * ((accept ? 1.0 : 0.0) - chain.target_acceptance);
      } else {
        ++proposed_after;
        accepted_after += accept ? 1 : 0;
      }
    }
    dead_sweeps = any_accept ? 0 : dead_sweeps + 1;
    if (sampled > 0 && dead_sweeps >= max_dead_sweeps)
      throw ChainError("adaptation failure: all proposals rejected for " + std::to_string(max_dead_sweeps) +
                       " consecutive sweeps (" + std::string(name(family)) + ")");
    if (it >= chain.burn_in && (it - chain.burn_in + 1) % chain.thin == 0 && stored < kept) {
      for (std::size_t j = 0; j < dim; ++j) post.draws(stored, static_cast<Eigen::Index>(j)) = x[j];
      post.log_posterior.push_back(lpost);
      post.log_likelihood.push_back(ll);
      ++stored;
    }
  }
  post.acceptance_rate =
      proposed_after ? static_cast<double>(accepted_after) / static_cast<double>(proposed_after) : 0.0;
  return post;
}

}  // namespace mpd::marginals
