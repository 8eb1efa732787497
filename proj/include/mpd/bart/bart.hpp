#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>
#include <nlohmann/json.hpp>

#include "mpd/bart/tree.hpp"
#include "mpd/core/error.hpp"
#include "mpd/core/random.hpp"
#include "mpd/core/stats.hpp"

namespace mpd::bart {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct BartConfig {
  int trees = 50;
  int iterations = 2000;
  int burn_in = 500;
  int thin = 1;
  double alpha = 0.95;  // split probability alpha (1 + depth)^-beta
  double beta = 2.0;
  double k = 2.0;       // leaf prior: ensemble spans the response range with k sd
  double nu = 3.0;      // sigma^2 prior degrees of freedom
  double q = 0.9;       // prior mass below the least-squares residual variance
  int max_depth = -1;   // -1 unbounded; 0 forces stumps
  double p_grow = 0.28;
  double p_prune = 0.28;
};

struct Ensemble {
  bool probit = false;
  std::vector<std::string> feature_names;
  int features = 0;
  double shift = 0.0;  // prediction = shift + scale * sum of trees (inside Phi for probit)
  double scale = 1.0;
  std::vector<std::vector<Tree>> draws;  // retained sweeps
  std::vector<double> sigma2;            // every sweep, original units; 1 for probit

  std::size_t size() const { return draws.size(); }

  double draw_value(std::size_t s, const double* x) const {
    double sum = 0.0;
    for (const auto& t : draws[s]) sum += t.eval(x);
    const double g = shift + scale * sum;
    return probit ? std::clamp(normal_cdf(g), kProbFloor, 1.0 - kProbFloor) : g;
  }

  // Draw-by-observation matrix of predictions (probabilities for probit).
  Eigen::MatrixXd predict_draws(const Eigen::MatrixXd& x) const {
    check(x);
    const RowMatrix xr = x;
    Eigen::MatrixXd out(static_cast<Eigen::Index>(draws.size()), x.rows());
    for (std::size_t s = 0; s < draws.size(); ++s)
      for (Eigen::Index i = 0; i < x.rows(); ++i) out(static_cast<Eigen::Index>(s), i) = draw_value(s, xr.row(i).data());
    return out;
  }

  // Posterior-mean prediction.
  std::vector<double> predict(const Eigen::MatrixXd& x) const {
    const Eigen::VectorXd m = predict_draws(x).colwise().mean().transpose();
    return {m.data(), m.data() + m.size()};
  }

  nlohmann::json to_json() const {
    nlohmann::json trees = nlohmann::json::array();
    if (!draws.empty())
      for (const auto& t : draws.back()) trees.push_back(t.to_json(feature_names, scale, 0.0));
    return {{"model", probit ? "probit" : "regression"},
            {"features", feature_names},
            {"offset", shift},
            {"retained_draws", draws.size()},
            {"final_sigma2", sigma2.empty() ? 0.0 : sigma2.back()},
            {"trees", trees}};
  }

  static constexpr double kProbFloor = 1e-15;

 private:
  void check(const Eigen::MatrixXd& x) const {
    if (x.cols() != features)
      throw DomainError("covariate schema mismatch: expected " + std::to_string(features) + " columns");
  }
};

namespace detail {

class Sampler {
 public:
  Sampler(const RowMatrix& x, const BartConfig& cfg, double tau, Rng& rng)
      : x_(x), cfg_(cfg), tau_(tau), rng_(rng), n_(static_cast<int>(x.rows())), p_(static_cast<int>(x.cols())) {
    // distinct sorted values per covariate and each observation's position among them
    values_.resize(static_cast<std::size_t>(p_));
    rank_.resize(x.rows(), x.cols());
    for (int v = 0; v < p_; ++v) {
      auto& u = values_[static_cast<std::size_t>(v)];
      u.clear();
      for (int i = 0; i < n_; ++i) u.push_back(x(i, v));
      std::sort(u.begin(), u.end());
      u.erase(std::unique(u.begin(), u.end()), u.end());
      for (int i = 0; i < n_; ++i)
        rank_(i, v) = static_cast<int>(std::lower_bound(u.begin(), u.end(), x(i, v)) - u.begin());
    }
    stamp_.assign(static_cast<std::size_t>(n_) + 1, 0);
  }

  // One Metropolis move on `tree` followed by a Gibbs draw of its leaf values.
  void update(Tree& tree, std::vector<int>& assign, const std::vector<double>& r, double s2) {
    s2_ = s2;
    const bool stump = tree.node(0).is_leaf();
    const double u = rng_.uniform();
    if (stump || u < cfg_.p_grow) grow(tree, assign, r, stump);
    else if (u < cfg_.p_grow + cfg_.p_prune) prune(tree, assign, r);
    else change(tree, assign, r);
    draw_leaves(tree, assign, r);
  }

 private:
  double split_prob(int depth) const {
    if (cfg_.max_depth >= 0 && depth >= cfg_.max_depth) return 0.0;
    return cfg_.alpha * std::pow(1.0 + depth, -cfg_.beta);
  }

  // Integrated leaf likelihood up to terms that cancel between partitions.
  double lik(double n, double s) const {
    return -0.5 * std::log1p(n * tau_ / s2_) + tau_ * s * s / (2.0 * s2_ * (s2_ + n * tau_));
  }

  std::vector<int> members(const std::vector<int>& assign, int a, int b = -2) const {
    std::vector<int> out;
    for (int i = 0; i < n_; ++i)
      if (assign[static_cast<std::size_t>(i)] == a || assign[static_cast<std::size_t>(i)] == b) out.push_back(i);
    return out;
  }

  // Draws a split rule from the variables with at least two distinct values among
  // `obs`: the cut is uniform over those values except the largest.
  bool draw_rule(const std::vector<int>& obs, int& var, double& cut) {
    std::vector<int> vars;
    for (int v = 0; v < p_; ++v) {
      int lo = n_, hi = -1;
      for (int i : obs) {
        const int r = rank_(i, v);
        lo = std::min(lo, r);
        hi = std::max(hi, r);
      }
      if (hi > lo) vars.push_back(v);
    }
    if (vars.empty()) return false;
    var = vars[rng_.index(vars.size())];
    ++generation_;
    std::vector<int> distinct;
    for (int i : obs) {
      const int r = rank_(i, var);
      if (stamp_[static_cast<std::size_t>(r)] != generation_) {
        stamp_[static_cast<std::size_t>(r)] = generation_;
        distinct.push_back(r);
      }
    }
    std::sort(distinct.begin(), distinct.end());
    distinct.pop_back();  // the largest value would leave the right child empty
    cut = values_[static_cast<std::size_t>(var)][static_cast<std::size_t>(distinct[rng_.index(distinct.size())])];
    return true;
  }

  void stats(const std::vector<int>& obs, const std::vector<double>& r, int var, double cut, double& nl, double& sl,
             double& nr, double& sr) const {
    nl = sl = nr = sr = 0.0;
    for (int i : obs) {
      if (x_(i, var) <= cut) nl += 1, sl += r[static_cast<std::size_t>(i)];
      else nr += 1, sr += r[static_cast<std::size_t>(i)];
    }
  }

  void grow(Tree& tree, std::vector<int>& assign, const std::vector<double>& r, bool stump) {
    const auto leaves = tree.leaves();
    const int leaf = leaves[rng_.index(leaves.size())];
    const int d = tree.node(leaf).depth;
    const double pg = split_prob(d);
    if (pg <= 0.0) return;
    const auto obs = members(assign, leaf);
    int var;
    double cut;
    if (!draw_rule(obs, var, cut)) return;
    double nl, sl, nr, sr;
    stats(obs, r, var, cut, nl, sl, nr, sr);
    int nog_after = static_cast<int>(tree.nog_nodes().size()) + 1;
    const int parent = tree.node(leaf).parent;
    if (parent >= 0) {
      const int sibling = tree.node(parent).left == leaf ? tree.node(parent).right : tree.node(parent).left;
      if (tree.node(sibling).is_leaf()) --nog_after;
    }
    const double pc = split_prob(d + 1);
    const double log_ratio = std::log(cfg_.p_prune / nog_after) - std::log((stump ? 1.0 : cfg_.p_grow) / leaves.size()) +
                             std::log(pg) + 2.0 * std::log1p(-pc) - std::log1p(-pg) + lik(nl, sl) + lik(nr, sr) -
                             lik(nl + nr, sl + sr);
    if (std::log(rng_.uniform()) < log_ratio) {
      tree.grow(leaf, var, cut);
      const int l = tree.node(leaf).left, rr = tree.node(leaf).right;
      for (int i : obs) assign[static_cast<std::size_t>(i)] = x_(i, var) <= cut ? l : rr;
    }
  }

  void prune(Tree& tree, std::vector<int>& assign, const std::vector<double>& r) {
    const auto nog = tree.nog_nodes();
    const int node = nog[rng_.index(nog.size())];
    const int l = tree.node(node).left, rr = tree.node(node).right;
    const int d = tree.node(node).depth;
    const auto obs = members(assign, l, rr);
    double nl = 0, sl = 0, nr = 0, sr = 0;
    for (int i : obs) {
      if (assign[static_cast<std::size_t>(i)] == l) nl += 1, sl += r[static_cast<std::size_t>(i)];
      else nr += 1, sr += r[static_cast<std::size_t>(i)];
    }
    const auto n_leaves = static_cast<double>(tree.leaves().size());
    const double p_grow_back = node == 0 ? 1.0 : cfg_.p_grow;
    const double pg = split_prob(d), pc = split_prob(d + 1);
    const double log_ratio = std::log(p_grow_back / (n_leaves - 1.0)) - std::log(cfg_.p_prune / nog.size()) +
                             std::log1p(-pg) - std::log(pg) - 2.0 * std::log1p(-pc) + lik(nl + nr, sl + sr) -
                             lik(nl, sl) - lik(nr, sr);
    if (std::log(rng_.uniform()) < log_ratio) {
      tree.prune(node);
      for (int i : obs) assign[static_cast<std::size_t>(i)] = node;
    }
  }

  void change(Tree& tree, std::vector<int>& assign, const std::vector<double>& r) {
    const auto nog = tree.nog_nodes();
    const int node = nog[rng_.index(nog.size())];
    const int l = tree.node(node).left, rr = tree.node(node).right;
    const auto obs = members(assign, l, rr);
    int var;
    double cut;
    if (!draw_rule(obs, var, cut)) return;
    double nl, sl, nr, sr, ol = 0, osl = 0, orr = 0, osr = 0;
    stats(obs, r, var, cut, nl, sl, nr, sr);
    for (int i : obs) {
      if (assign[static_cast<std::size_t>(i)] == l) ol += 1, osl += r[static_cast<std::size_t>(i)];
      else orr += 1, osr += r[static_cast<std::size_t>(i)];
    }
    const double log_ratio = lik(nl, sl) + lik(nr, sr) - lik(ol, osl) - lik(orr, osr);
    if (std::log(rng_.uniform()) < log_ratio) {
      tree.node(node).var = var;
      tree.node(node).cut = cut;
      for (int i : obs) assign[static_cast<std::size_t>(i)] = x_(i, var) <= cut ? l : rr;
    }
  }

  void draw_leaves(Tree& tree, const std::vector<int>& assign, const std::vector<double>& r) {
    std::vector<double> n(tree.capacity(), 0.0), s(tree.capacity(), 0.0);
    for (int i = 0; i < n_; ++i) {
      const auto a = static_cast<std::size_t>(assign[static_cast<std::size_t>(i)]);
      n[a] += 1.0;
      s[a] += r[static_cast<std::size_t>(i)];
    }
    for (int leaf : tree.leaves()) {
      const auto a = static_cast<std::size_t>(leaf);
      const double denom = s2_ + n[a] * tau_;
      tree.node(leaf).mu = tau_ * s[a] / denom + std::sqrt(tau_ * s2_ / denom) * rng_.normal();
    }
  }

  const RowMatrix& x_;
  const BartConfig& cfg_;
  double tau_;
  Rng& rng_;
  int n_, p_;
  double s2_ = 1.0;
  std::vector<std::vector<double>> values_;
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rank_;
  std::vector<std::uint64_t> stamp_;
  std::uint64_t generation_ = 0;
};

inline void check_config(const BartConfig& cfg) {
  if (cfg.trees < 1) throw DomainError("BART needs at least one tree");
  if (cfg.iterations <= cfg.burn_in || cfg.burn_in < 0 || cfg.thin < 1)
    throw DomainError("BART chain needs iterations > burn_in and thin >= 1");
  if (cfg.p_grow <= 0 || cfg.p_prune <= 0 || cfg.p_grow + cfg.p_prune >= 1.0)
    throw DomainError("BART move probabilities must be positive and leave room for change moves");
}

// Backfitting sweeps on response `target` (transformed scale). When `latent` is
// set, the target is redrawn each sweep from the truncated normal matching z.
inline void run_chain(const RowMatrix& x, std::vector<double> target, const std::vector<int>* latent, double tau,
                      double nu, double lambda, const BartConfig& cfg, std::uint64_t seed, Ensemble& out) {
  Rng rng(seed);
  const int n = static_cast<int>(x.rows());
  const auto m = static_cast<std::size_t>(cfg.trees);
  std::vector<Tree> trees(m);
  std::vector<std::vector<int>> assign(m, std::vector<int>(static_cast<std::size_t>(n), 0));
  std::vector<std::vector<double>> fit(m, std::vector<double>(static_cast<std::size_t>(n), 0.0));
  std::vector<double> total(static_cast<std::size_t>(n), 0.0), r(static_cast<std::size_t>(n));
  Sampler sampler(x, cfg, tau, rng);
  double s2 = latent ? 1.0 : lambda;

  for (int it = 0; it < cfg.iterations; ++it) {
    if (latent)
      for (int i = 0; i < n; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        target[ii] = rng.normal_sign_truncated(out.shift + total[ii], (*latent)[ii] == 1) - out.shift;
      }
    for (std::size_t t = 0; t < m; ++t) {
      for (int i = 0; i < n; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        r[ii] = target[ii] - (total[ii] - fit[t][ii]);
      }
      sampler.update(trees[t], assign[t], r, s2);
      for (int i = 0; i < n; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        const double v = trees[t].node(assign[t][ii]).mu;
        total[ii] += v - fit[t][ii];
        fit[t][ii] = v;
      }
    }
    if (!latent) {
      double sse = 0.0;
      for (int i = 0; i < n; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        sse += (target[ii] - total[ii]) * (target[ii] - total[ii]);
      }
      s2 = rng.inv_gamma(0.5 * (nu + n), 0.5 * (nu * lambda + sse));
    }
    out.sigma2.push_back(s2 * out.scale * out.scale);
    if (it >= cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0) out.draws.push_back(trees);
  }
}

}  // namespace detail

// Sum-of-trees regression. The response is mapped to [-0.5, 0.5]; leaf values
// get N(0, (0.5 / (k sqrt m))^2) priors and sigma^2 a scaled inverse chi-square
// calibrated on the least-squares residual variance.
inline Ensemble fit_regression(const Eigen::MatrixXd& x, const std::vector<double>& y, const BartConfig& cfg,
                               std::uint64_t seed, std::vector<std::string> names = {}) {
  detail::check_config(cfg);
  const auto n = static_cast<Eigen::Index>(y.size());
  if (x.rows() != n) throw DomainError("covariate rows and responses differ in length");
  if (n < 30) throw ValidationError("BART regression needs n >= 30");
  const auto [lo_it, hi_it] = std::minmax_element(y.begin(), y.end());
  const double lo = *lo_it, hi = *hi_it;

  Ensemble out;
  out.features = static_cast<int>(x.cols());
  out.feature_names = std::move(names);
  if (!(hi > lo)) {
    if (cfg.max_depth != 0) throw DegenerateDataError("constant response: BART regression is undefined");
    // forced stumps on a constant response: the posterior of the fit is the constant itself
    out.shift = lo;
    out.scale = 1.0;
    out.draws.assign(1, std::vector<Tree>(static_cast<std::size_t>(cfg.trees)));
    out.sigma2.assign(1, 0.0);
    return out;
  }
  out.shift = 0.5 * (lo + hi);
  out.scale = hi - lo;
  std::vector<double> target(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) target[i] = (y[i] - out.shift) / out.scale;

  // residual variance guess from least squares, falling back to the sample variance
  const Eigen::VectorXd yt = Eigen::Map<const Eigen::VectorXd>(target.data(), n);
  double s2_hat = variance(target);
  if (n > x.cols() + 5) {
    Eigen::MatrixXd design(n, x.cols() + 1);
    design.col(0).setOnes();
    design.rightCols(x.cols()) = x;
    const Eigen::VectorXd b = design.colPivHouseholderQr().solve(yt);
    const double rss = (yt - design * b).squaredNorm();
    if (rss > 0.0) s2_hat = rss / static_cast<double>(n - design.cols());
  }
  boost::math::chi_squared chi(cfg.nu);
  const double lambda = s2_hat * boost::math::quantile(chi, 1.0 - cfg.q) / cfg.nu;
  const double sigma_mu = 0.5 / (cfg.k * std::sqrt(static_cast<double>(cfg.trees)));
  detail::run_chain(RowMatrix(x), std::move(target), nullptr, sigma_mu * sigma_mu, cfg.nu, lambda, cfg, seed, out);
  return out;
}

// Probit sum-of-trees via latent Gaussian augmentation with unit variance.
inline Ensemble fit_probit(const Eigen::MatrixXd& x, const std::vector<int>& z, const BartConfig& cfg,
                           std::uint64_t seed, std::vector<std::string> names = {}) {
  detail::check_config(cfg);
  const auto n = static_cast<Eigen::Index>(z.size());
  if (x.rows() != n) throw DomainError("covariate rows and outcomes differ in length");
  double ones = 0.0;
  for (int v : z) {
    if (v != 0 && v != 1) throw DomainError("probit outcomes must be 0 or 1");
    ones += v;
  }
  if (ones == 0.0 || ones == static_cast<double>(n)) throw DegenerateDataError("probit BART needs both classes");
  Ensemble out;
  out.probit = true;
  out.features = static_cast<int>(x.cols());
  out.feature_names = std::move(names);
  out.shift = normal_quantile(ones / static_cast<double>(n));
  out.scale = 1.0;
  const double sigma_mu = 3.0 / (cfg.k * std::sqrt(static_cast<double>(cfg.trees)));
  // latent targets are centred on the offset, so the trees model Phi^-1(p) - shift
  detail::run_chain(RowMatrix(x), std::vector<double>(z.size(), 0.0), &z, sigma_mu * sigma_mu, 0.0, 1.0, cfg, seed, out);
  return out;
}

}  // namespace mpd::bart
