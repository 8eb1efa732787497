#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mpd/core/error.hpp"

namespace mpd::copula {

enum class Functional { SpearmanRho, UpperTail, LowerTail };

inline std::string_view name(Functional f) {
  switch (f) {
    case Functional::SpearmanRho: return "spearman_rho";
    case Functional::UpperTail: return "lambda_upper";
    case Functional::LowerTail: return "lambda_lower";
  }
  return "?";
}

inline Functional parse_functional(std::string_view s) {
  for (auto f : {Functional::SpearmanRho, Functional::UpperTail, Functional::LowerTail})
    if (name(f) == s) return f;
  throw DomainError("unknown dependence functional '" + std::string(s) + "'");
}

inline constexpr double kPseudoEps = 1e-10;

// n x 2 matrix of probability-integral transforms clamped to [eps, 1 - eps].
class PseudoData {
 public:
  PseudoData() = default;
  explicit PseudoData(Eigen::MatrixX2d u) : u_(std::move(u)) {
    u_ = u_.cwiseMax(kPseudoEps).cwiseMin(1.0 - kPseudoEps);
  }
  PseudoData(std::span<const double> u1, std::span<const double> u2) {
    if (u1.size() != u2.size()) throw DomainError("pseudo-data columns differ in length");
    u_.resize(static_cast<Eigen::Index>(u1.size()), 2);
    for (std::size_t i = 0; i < u1.size(); ++i) u_(static_cast<Eigen::Index>(i), 0) = u1[i], u_(static_cast<Eigen::Index>(i), 1) = u2[i];
    u_ = u_.cwiseMax(kPseudoEps).cwiseMin(1.0 - kPseudoEps);
  }

  std::size_t size() const { return static_cast<std::size_t>(u_.rows()); }
  double operator()(std::size_t i, int j) const { return u_(static_cast<Eigen::Index>(i), j); }
  const Eigen::MatrixX2d& matrix() const { return u_; }

 private:
  Eigen::MatrixX2d u_;
};

// Moment function h(u, psi) whose expectation vanishes at the true functional value.
//   Spearman:   12 u1 u2 - 3 - psi
//   upper tail: 1[u1 > t, u2 > t] / (1 - t) - psi
//   lower tail: 1[u1 <= t, u2 <= t] / t - psi
struct MomentCondition {
  Functional functional = Functional::SpearmanRho;
  double threshold = 0.0;

  double statistic(double u1, double u2) const {
    switch (functional) {
      case Functional::SpearmanRho: return 12.0 * u1 * u2 - 3.0;
      case Functional::UpperTail: return (u1 > threshold && u2 > threshold) ? 1.0 / (1.0 - threshold) : 0.0;
      case Functional::LowerTail: return (u1 <= threshold && u2 <= threshold) ? 1.0 / threshold : 0.0;
    }
    return 0.0;
  }
  double h(double u1, double u2, double psi) const { return statistic(u1, u2) - psi; }

  std::pair<double, double> domain() const {
    return functional == Functional::SpearmanRho ? std::pair{-1.0, 1.0} : std::pair{0.0, 1.0};
  }

  std::vector<double> statistics(const PseudoData& u) const {
    std::vector<double> g(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) g[i] = statistic(u(i, 0), u(i, 1));
    return g;
  }

  // Plug-in estimate: the psi at which the sample mean of h is zero.
  double plug_in(const PseudoData& u) const {
    const auto g = statistics(u);
    double s = 0.0;
    for (double v : g) s += v;
    return s / static_cast<double>(g.size());
  }
};

inline MomentCondition moment_for(Functional f, double threshold = 0.0) {
  if (f != Functional::SpearmanRho && !(threshold > 0.0 && threshold < 1.0))
    throw DomainError("tail threshold must lie in (0,1)");
  return {f, f == Functional::SpearmanRho ? 0.0 : threshold};
}

}  // namespace mpd::copula
