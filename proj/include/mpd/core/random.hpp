#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

namespace mpd {

// Seeded random source. All samplers in the library draw through this type so a
// run is a pure function of its seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() {
    // open interval (0,1)
    double u;
    do u = std::generate_canonical<double, 53>(engine_);
    while (u <= 0.0);
    return u;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() { return std_normal_(engine_); }
  double normal(double mean, double sd) { return mean + sd * normal(); }
  double exponential(double rate = 1.0) { return -std::log(uniform()) / rate; }

  // Gamma with shape/scale parameterisation.
  double gamma(double shape, double scale) {
    return std::gamma_distribution<double>(shape, scale)(engine_);
  }
  // Inverse gamma with density proportional to x^{-shape-1} exp(-scale/x).
  double inv_gamma(double shape, double scale) { return scale / gamma(shape, 1.0); }

  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  // Standard normal truncated to [lower, inf).
  double normal_lower_truncated(double lower) {
    if (lower <= 0.0) {
      double z;
      do z = normal();
      while (z < lower);
      return z;
    }
    // exponential proposal with optimal rate
    const double rate = 0.5 * (lower + std::sqrt(lower * lower + 4.0));
    double z;
    do z = lower + exponential(rate);
    while (uniform() > std::exp(-0.5 * (z - rate) * (z - rate)));
    return z;
  }

  // N(mean, 1) conditioned on the sign: positive when `positive`, else negative.
  double normal_sign_truncated(double mean, bool positive) {
    if (positive) return mean + normal_lower_truncated(-mean);
    return mean - normal_lower_truncated(mean);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> std_normal_{0.0, 1.0};
};

// Multinomial resampling of indices proportional to nonnegative weights.
inline std::vector<std::size_t> resample_indices(std::span<const double> weights, std::size_t count,
                                                 Rng& rng) {
  std::vector<double> cumulative(weights.size());
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    total += weights[i];
    cumulative[i] = total;
  }
  std::vector<std::size_t> out(count);
  for (auto& o : out) {
    const double target = rng.uniform() * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
    o = static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cumulative.begin(),
                                                          static_cast<std::ptrdiff_t>(weights.size()) - 1));
  }
  return out;
}

}  // namespace mpd
