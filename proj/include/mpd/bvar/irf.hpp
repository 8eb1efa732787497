#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mpd/bvar/gibbs.hpp"
#include "mpd/core/csv.hpp"
#include "mpd/core/stats.hpp"

namespace mpd::bvar {

enum class Shock { Target, QE };

inline std::string shock_name(Shock s) { return s == Shock::Target ? "target" : "qe"; }

inline Shock parse_shock(const std::string& s) {
  if (s == "target") return Shock::Target;
  if (s == "qe") return Shock::QE;
  throw DomainError("unknown shock '" + s + "'");
}

// Variable whose structural innovation defines the shock.
inline std::string shocked_variable(Shock s) { return s == Shock::Target ? "ST-IR" : "EA-spread"; }

inline constexpr double kExplosiveModulus = 1.1;

struct IrfSet {
  Shock shock = Shock::Target;
  std::vector<std::string> variables;
  int horizons = 12;
  std::vector<Eigen::MatrixXd> draws;  // M x (H + 1) per posterior draw
  std::vector<bool> explosive;         // flagged draws are left out of the bands
  Eigen::MatrixXd lo68, median, hi68;  // M x (H + 1)

  std::size_t kept() const { return static_cast<std::size_t>(std::count(explosive.begin(), explosive.end(), false)); }
};

inline Eigen::MatrixXd companion(const Eigen::MatrixXd& a, int lags) {
  const auto m = a.rows();
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(m * lags, m * lags);
  c.topRows(m) = a;
  if (lags > 1) c.bottomLeftCorner(m * (lags - 1), m * (lags - 1)).setIdentity();
  return c;
}

inline double spectral_radius(const Eigen::MatrixXd& a, int lags) {
  return companion(a, lags).eigenvalues().cwiseAbs().maxCoeff();
}

// Responses to a structural shock `scale` standard deviations in size: the
// impact vector is the shocked column of the lower Cholesky factor of Sigma and
// is propagated through Psi_h = sum_l A_l Psi_{h-l}.
inline Eigen::MatrixXd impulse_response(const Eigen::MatrixXd& a, const Eigen::MatrixXd& sigma, int lags, int shock_index,
                                        int horizons, double scale = 1.0) {
  const auto m = a.rows();
  const Eigen::MatrixXd l = sigma.llt().matrixL();
  Eigen::MatrixXd out(m, horizons + 1);
  out.col(0) = scale * l.col(shock_index);
  for (int h = 1; h <= horizons; ++h) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(m);
    for (int j = 1; j <= std::min(h, lags); ++j) v += a.block(0, (j - 1) * m, m, m) * out.col(h - j);
    out.col(h) = v;
  }
  return out;
}

inline IrfSet irf(const VarDraws& draws, Shock shock, int horizons, double scale = 1.0) {
  if (horizons < 1) throw DomainError("IRF horizon must be at least 1");
  const int idx = draws.spec.index_of(shocked_variable(shock));
  IrfSet out;
  out.shock = shock;
  out.variables = draws.spec.variables;
  out.horizons = horizons;
  for (std::size_t s = 0; s < draws.size(); ++s) {
    out.draws.push_back(impulse_response(draws.A[s], draws.sigma[s], draws.spec.lags, idx, horizons, scale));
    out.explosive.push_back(spectral_radius(draws.A[s], draws.spec.lags) > kExplosiveModulus);
  }
  if (out.kept() == 0) throw ChainError("every posterior draw has an explosive companion matrix");
  const auto m = static_cast<Eigen::Index>(out.variables.size());
  out.lo68.resize(m, horizons + 1);
  out.median.resize(m, horizons + 1);
  out.hi68.resize(m, horizons + 1);
  std::vector<double> v;
  for (Eigen::Index i = 0; i < m; ++i)
    for (int h = 0; h <= horizons; ++h) {
      v.clear();
      for (std::size_t s = 0; s < out.draws.size(); ++s)
        if (!out.explosive[s]) v.push_back(out.draws[s](i, h));
      const auto b = band68(v);
      out.lo68(i, h) = b.lo68;
      out.median(i, h) = b.median;
      out.hi68(i, h) = b.hi68;
    }
  return out;
}

inline csv::Table irf_table(const IrfSet& set) {
  csv::Table t;
  t.header = {"variable", "horizon", "lo68", "median", "hi68"};
  for (std::size_t i = 0; i < set.variables.size(); ++i)
    for (int h = 0; h <= set.horizons; ++h) {
      const auto r = static_cast<Eigen::Index>(i);
      t.rows.push_back({set.variables[i], std::to_string(h), csv::format_double(set.lo68(r, h)),
                        csv::format_double(set.median(r, h)), csv::format_double(set.hi68(r, h))});
    }
  return t;
}

// Reads back the median column of an IRF table as an M x (H + 1) matrix in `order`.
inline Eigen::MatrixXd median_from_table(const csv::Table& t, const std::vector<std::string>& order) {
  const auto var = t.require("variable"), hor = t.require("horizon"), med = t.require("median");
  int horizons = 0;
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    horizons = std::max(horizons, static_cast<int>(csv::parse_double(t.rows[r][hor], r + 1)));
  Eigen::MatrixXd out = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(order.size()), horizons + 1, std::nan(""));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto it = std::find(order.begin(), order.end(), t.rows[r][var]);
    if (it == order.end()) continue;
    out(it - order.begin(), static_cast<Eigen::Index>(csv::parse_double(t.rows[r][hor], r + 1))) =
        csv::parse_double(t.rows[r][med], r + 1);
  }
  return out;
}

}  // namespace mpd::bvar
