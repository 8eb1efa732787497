#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mpd/core/error.hpp"
#include "mpd/core/random.hpp"

namespace mpd::metrics {

namespace detail {

inline void check_weights(std::span<const double> values, std::span<const double> weights) {
  if (values.size() != weights.size()) throw DomainError("values and weights differ in length");
  if (values.empty()) throw DomainError("metric of an empty sample");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("weights must be finite and non-negative");
    total += w;
  }
  if (!(total > 0.0)) throw DomainError("weights must have a positive sum");
}

inline std::vector<double> unit_weights(std::size_t n) { return std::vector<double>(n, 1.0); }

}  // namespace detail

// Weighted Gini: sum_i sum_j w_i w_j |v_i - v_j| / (2 W^2 mu), evaluated in
// O(n log n) after sorting.
inline double gini(std::span<const double> values, std::span<const double> weights) {
  detail::check_weights(values, weights);
  for (double v : values)
    if (!(v >= 0.0)) throw DomainError("gini needs non-negative values");
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  // half of the pairwise sum: sum_j w_j (v_j W_<j - (wv)_<j) over the sorted order
  long double cum_w = 0, cum_wv = 0, half = 0;
  for (auto j : order) {
    half += weights[j] * (values[j] * cum_w - cum_wv);
    cum_w += weights[j];
    cum_wv += weights[j] * values[j];
  }
  if (cum_wv == 0) return 0.0;
  return static_cast<double>(half / (cum_w * cum_wv));
}

inline double gini(std::span<const double> values) {
  const auto w = detail::unit_weights(values.size());
  return gini(values, w);
}

inline constexpr std::size_t kExactBivariateLimit = 20000;

// Distance-based bivariate Gini of mean-scaled pairs:
//   G2 = E||X - X'|| / (2 E||X||),  X = (x / mean_w(x), y / mean_w(y)).
// Exact weighted double sum up to kExactBivariateLimit rows, Monte Carlo pairs above.
inline double bivariate_gini(std::span<const double> x, std::span<const double> y, std::span<const double> weights,
                             std::uint64_t seed = 0, std::size_t mc_pairs = 4'000'000) {
  detail::check_weights(x, weights);
  if (y.size() != x.size()) throw DomainError("bivariate_gini coordinates differ in length");
  const auto n = static_cast<Eigen::Index>(x.size());
  const Eigen::ArrayXd w = Eigen::Map<const Eigen::ArrayXd>(weights.data(), n);  // owned, so reductions do not depend on the caller's alignment
  Eigen::ArrayXd a = Eigen::Map<const Eigen::ArrayXd>(x.data(), n);
  Eigen::ArrayXd b = Eigen::Map<const Eigen::ArrayXd>(y.data(), n);
  if ((a < 0).any() || (b < 0).any()) throw DomainError("bivariate_gini needs non-negative coordinates");
  const double total = w.sum();
  const double ma = (w * a).sum() / total, mb = (w * b).sum() / total;
  if (!(ma > 0.0) || !(mb > 0.0)) throw DomainError("bivariate_gini needs a positive mean in each coordinate");
  a /= ma;
  b /= mb;
  const double mean_norm = (w * (a.square() + b.square()).sqrt()).sum() / total;

  double mean_dist = 0.0;
  if (x.size() <= kExactBivariateLimit) {
    long double acc = 0;
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      const auto m = n - i - 1;
      const auto da = a.tail(m) - a(i), db = b.tail(m) - b(i);
      acc += w(i) * (w.tail(m) * (da.square() + db.square()).sqrt()).sum();
    }
    mean_dist = static_cast<double>(2 * acc / (static_cast<long double>(total) * total));
  } else {
    Rng rng(seed);
    std::vector<double> wv(weights.begin(), weights.end());
    const auto i1 = resample_indices(wv, mc_pairs, rng);
    const auto i2 = resample_indices(wv, mc_pairs, rng);
    long double acc = 0;
    for (std::size_t k = 0; k < mc_pairs; ++k)
      acc += std::hypot(a(static_cast<Eigen::Index>(i1[k])) - a(static_cast<Eigen::Index>(i2[k])),
                        b(static_cast<Eigen::Index>(i1[k])) - b(static_cast<Eigen::Index>(i2[k])));
    mean_dist = static_cast<double>(acc / mc_pairs);
  }
  return mean_dist / (2.0 * mean_norm);
}

// Weighted mid-distribution ranks in (0,1): (W_{<v} + W_{=v} / 2) / W. Ties share a rank.
inline std::vector<double> weighted_ranks(std::span<const double> v, std::span<const double> weights) {
  detail::check_weights(v, weights);
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<double> r(v.size());
  double below = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    double tied = 0.0;
    while (j < order.size() && v[order[j]] == v[order[i]]) tied += weights[order[j++]];
    for (std::size_t k = i; k < j; ++k) r[order[k]] = (below + 0.5 * tied) / total;
    below += tied;
    i = j;
  }
  return r;
}

// Weighted Pearson correlation of weighted ranks.
inline double sample_spearman(std::span<const double> x, std::span<const double> y, std::span<const double> weights) {
  if (x.size() < 2) throw DomainError("sample_spearman needs n >= 2");
  if (y.size() != x.size()) throw DomainError("sample_spearman coordinates differ in length");
  const auto rx = weighted_ranks(x, weights), ry = weighted_ranks(y, weights);
  double total = 0, mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) total += weights[i], mx += weights[i] * rx[i], my += weights[i] * ry[i];
  mx /= total;
  my /= total;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += weights[i] * (rx[i] - mx) * (ry[i] - my);
    sxx += weights[i] * (rx[i] - mx) * (rx[i] - mx);
    syy += weights[i] * (ry[i] - my) * (ry[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) throw DegenerateDataError("sample_spearman is undefined for a constant margin");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

enum class TailSide { Upper, Lower };

// Weighted share of joint exceedances of threshold t on the rank scale, divided by
// the average marginal tail mass.
inline double sample_tail(std::span<const double> x, std::span<const double> y, std::span<const double> weights,
                          double t, TailSide side) {
  if (!(t > 0.0 && t < 1.0)) throw DomainError("tail threshold must lie in (0,1)");
  if (x.size() < 2) throw DomainError("sample_tail needs n >= 2");
  if (y.size() != x.size()) throw DomainError("sample_tail coordinates differ in length");
  const auto rx = weighted_ranks(x, weights), ry = weighted_ranks(y, weights);
  auto in_tail = [&](double r) { return side == TailSide::Upper ? r > t : r <= t; };
  double joint = 0, mass_x = 0, mass_y = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const bool ex = in_tail(rx[i]), ey = in_tail(ry[i]);
    mass_x += ex ? weights[i] : 0.0;
    mass_y += ey ? weights[i] : 0.0;
    joint += ex && ey ? weights[i] : 0.0;
  }
  const double denom = 0.5 * (mass_x + mass_y);
  if (denom <= 0.0) throw DegenerateDataError("no observations in the requested tail");
  return joint / denom;
}

}  // namespace mpd::metrics
