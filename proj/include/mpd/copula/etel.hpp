#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mpd/copula/moments.hpp"

namespace mpd::copula {

struct EtelSolution {
  double eta = 0.0;
  double log_lik = -std::numeric_limits<double>::infinity();
  double residual = 0.0;  // sum_i p_i h_i at the solution
  bool in_hull = false;
  int iterations = 0;
};

inline constexpr double kEtaBound = 50.0;

// Maximum-entropy weights p_i proportional to exp(eta h_i) subject to
// sum_i p_i h_i = 0. eta minimises the convex log-partition log sum exp(eta h);
// Newton steps are safeguarded by bisection on [-50, 50]. A root outside that
// bracket, or a zero outside the open convex hull of h, yields log L = -inf.
inline EtelSolution solve_etel(std::span<const double> h_values) {
  // owned copy: vectorised reductions then sum in an order independent of the caller's buffer alignment
  const Eigen::ArrayXd h = Eigen::Map<const Eigen::ArrayXd>(h_values.data(), static_cast<Eigen::Index>(h_values.size()));
  const double n = static_cast<double>(h.size());
  EtelSolution sol;
  const double hmin = h.minCoeff(), hmax = h.maxCoeff();
  if (hmin == 0.0 && hmax == 0.0) {
    sol.in_hull = true;
    sol.log_lik = n * std::log(1.0 / n);
    return sol;
  }
  if (hmin >= 0.0 || hmax <= 0.0) return sol;

  const double scale = std::max(std::abs(hmin), std::abs(hmax));
  Eigen::ArrayXd w;
  // mean and variance of h under the tilted weights
  auto moments = [&](double eta, double& g, double& v) {
    const Eigen::ArrayXd z = eta * h;
    w = (z - z.maxCoeff()).exp();
    const double total = w.sum();
    g = (w * h).sum() / total;
    v = (w * h.square()).sum() / total - g * g;
  };

  double g = 0.0, v = 0.0;
  moments(-kEtaBound, g, v);
  if (g >= 0.0) return sol;
  moments(kEtaBound, g, v);
  if (g <= 0.0) return sol;

  double lo = -kEtaBound, hi = kEtaBound, eta = 0.0;
  const double tol = 1e-14 * std::max(1.0, scale);
  for (int it = 0; it < 200; ++it) {
    moments(eta, g, v);
    sol.iterations = it + 1;
    if (std::abs(g) < tol) break;
    if (g > 0.0) hi = eta;
    else lo = eta;
    double next = (v > 0.0) ? eta - g / v : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (hi - lo < 1e-15 * std::max(1.0, std::abs(eta))) break;
    eta = next;
  }
  const Eigen::ArrayXd z = eta * h;
  const double zmax = z.maxCoeff();
  const double log_norm = zmax + std::log((z - zmax).exp().sum());
  sol.eta = eta;
  sol.in_hull = true;
  sol.log_lik = z.sum() - n * log_norm;
  sol.residual = ((z - log_norm).exp() * h).sum();
  return sol;
}

// Normalised tilted weights at a given solution.
inline std::vector<double> etel_weights(std::span<const double> h_values, const EtelSolution& sol) {
  std::vector<double> p(h_values.size());
  if (!sol.in_hull) return p;
  double zmax = -std::numeric_limits<double>::infinity();
  for (double h : h_values) zmax = std::max(zmax, sol.eta * h);
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total += (p[i] = std::exp(sol.eta * h_values[i] - zmax));
  for (auto& x : p) x /= total;
  return p;
}

// log L_ETEL(psi; u) = sum_i log p*_i(psi).
inline double etel_loglik(const MomentCondition& cond, double psi, const PseudoData& u) {
  std::vector<double> h(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) h[i] = cond.h(u(i, 0), u(i, 1), psi);
  return solve_etel(h).log_lik;
}

// Same as etel_loglik with precomputed statistics g_i (h_i = g_i - psi).
inline double etel_loglik_from_statistics(std::span<const double> g, double psi, std::vector<double>& scratch) {
  scratch.resize(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) scratch[i] = g[i] - psi;
  return solve_etel(scratch).log_lik;
}

}  // namespace mpd::copula
