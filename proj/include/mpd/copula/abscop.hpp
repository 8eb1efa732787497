#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "mpd/copula/etel.hpp"
#include "mpd/core/csv.hpp"
#include "mpd/core/parallel.hpp"
#include "mpd/core/random.hpp"
#include "mpd/marginals/rwmh.hpp"

namespace mpd::copula {

// Uniform prior on the functional's domain unless overridden.
struct PriorSpec {
  double lower = 0.0;
  double upper = 0.0;
  bool use_domain = true;

  std::pair<double, double> bounds(const MomentCondition& cond) const {
    return use_domain ? cond.domain() : std::pair{lower, upper};
  }
};

struct DependencePosterior {
  Functional functional = Functional::SpearmanRho;
  double threshold = 0.0;
  std::vector<double> proposals;    // psi^(b)
  std::vector<double> log_weights;  // ETEL log-likelihood of each proposal
  std::vector<double> draws;        // resampled with replacement
  double median = 0.0;
  double lo68 = 0.0;
  double hi68 = 0.0;
  double ess = 0.0;
  bool low_ess = false;
};

// Weighted quantile: smallest proposal whose cumulative normalised weight reaches p.
inline double weighted_quantile(std::span<const double> values, std::span<const double> weights, double p) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double cum = 0.0;
  for (auto i : order) {
    cum += weights[i] / total;
    if (cum >= p) return values[i];
  }
  return values[order.back()];
}

// Pseudo-observations for one pair of marginal posterior draws.
inline PseudoData pseudo_data(std::span<const double> x1, std::span<const double> x2,
                              const marginals::MarginalPosterior& m1, std::size_t s1,
                              const marginals::MarginalPosterior& m2, std::size_t s2) {
  const auto f1 = m1.family_at(s1);
  const auto f2 = m2.family_at(s2);
  Eigen::MatrixX2d u(static_cast<Eigen::Index>(x1.size()), 2);
  for (std::size_t i = 0; i < x1.size(); ++i) {
    u(static_cast<Eigen::Index>(i), 0) = marginals::cdf(f1, x1[i] + m1.location_offset);
    u(static_cast<Eigen::Index>(i), 1) = marginals::cdf(f2, x2[i] + m2.location_offset);
  }
  return PseudoData(std::move(u));
}

// Approximate posterior of a copula functional: propose psi from its prior, pair
// it with one draw from each marginal posterior, weight by the ETEL likelihood on
// the induced pseudo-data and resample with replacement.
inline DependencePosterior abscop_sample(const MomentCondition& cond, const PriorSpec& prior,
                                         const marginals::MarginalPosterior& m1,
                                         const marginals::MarginalPosterior& m2, std::span<const double> x1,
                                         std::span<const double> x2, std::size_t draws, std::uint64_t seed,
                                         unsigned threads = 1) {
  if (m1.size() == 0 || m2.size() == 0) throw DomainError("abscop_sample needs nonempty marginal posteriors");
  if (x1.size() != x2.size() || x1.empty()) throw DomainError("abscop_sample needs paired observations");
  if (draws < 1000) throw DomainError("abscop_sample needs B >= 1000 proposals");

  Rng rng(seed);
  const auto [lo, hi] = prior.bounds(cond);
  std::vector<double> psi(draws);
  std::vector<std::size_t> s1(draws), s2(draws);
  for (std::size_t b = 0; b < draws; ++b) {
    psi[b] = rng.uniform(lo, hi);
    s1[b] = rng.index(m1.size());
    s2[b] = rng.index(m2.size());
  }

  std::vector<double> log_w(draws);
  parallel_for(draws, threads, [&](std::size_t b) {
    const auto u = pseudo_data(x1, x2, m1, s1[b], m2, s2[b]);
    log_w[b] = etel_loglik(cond, psi[b], u);
  });

  DependencePosterior out;
  out.functional = cond.functional;
  out.threshold = cond.threshold;
  out.proposals = psi;
  out.log_weights = log_w;

  const double max_lw = *std::max_element(log_w.begin(), log_w.end());
  if (!std::isfinite(max_lw)) throw DomainError("every proposal lies outside the attainable moment range");
  std::vector<double> w(draws);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t b = 0; b < draws; ++b) {
    w[b] = std::isfinite(log_w[b]) ? std::exp(log_w[b] - max_lw) : 0.0;
    sum += w[b];
    sum_sq += w[b] * w[b];
  }
  out.ess = sum * sum / sum_sq;
  out.low_ess = out.ess < static_cast<double>(draws) / 100.0;

  for (auto idx : resample_indices(w, draws, rng)) out.draws.push_back(psi[idx]);
  out.median = weighted_quantile(psi, w, 0.5);
  out.lo68 = weighted_quantile(psi, w, 0.16);
  out.hi68 = weighted_quantile(psi, w, 0.84);
  return out;
}

inline nlohmann::json summary_json(const DependencePosterior& post) {
  return {{"functional", std::string(name(post.functional))},
          {"threshold", post.threshold},
          {"median", post.median},
          {"lo68", post.lo68},
          {"hi68", post.hi68},
          {"ess", post.ess},
          {"low_ess", post.low_ess}};
}

inline csv::Table draws_table(const DependencePosterior& post) {
  csv::Table t;
  t.header = {"draw", std::string(name(post.functional))};
  for (std::size_t i = 0; i < post.draws.size(); ++i)
    t.rows.push_back({std::to_string(i), csv::format_double(post.draws[i])});
  return t;
}

}  // namespace mpd::copula
