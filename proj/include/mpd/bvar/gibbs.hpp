#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mpd/core/error.hpp"
#include "mpd/core/random.hpp"
#include "mpd/data/macro.hpp"

namespace mpd::bvar {

inline const std::vector<std::string> kDefaultOrdering = {"GDP",  "HICP", "LCOMP",     "UNEMP", "HP",
                                                          "DJ50", "LT-IR", "EA-spread", "ST-IR"};

struct VarSpec {
  std::vector<std::string> variables = kDefaultOrdering;
  int lags = 2;

  int m() const { return static_cast<int>(variables.size()); }
  int k() const { return m() * lags; }
  int index_of(const std::string& name) const {
    const auto it = std::find(variables.begin(), variables.end(), name);
    if (it == variables.end()) throw DomainError("variable '" + name + "' is not in the VAR ordering");
    return static_cast<int>(it - variables.begin());
  }
};

struct PriorConfig {
  double iw_scale = 0.1;  // Sigma ~ IW(M + iw_extra_df, iw_scale * I)
  int iw_extra_df = 2;
};

struct GibbsConfig {
  int iterations = 15000;
  int burn_in = 5000;
  int thin = 1;
};

// Retained posterior draws. A holds lag blocks side by side: A = [A_1 ... A_P],
// each M x M. Exogenous regressors, when present, get coefficients in `gamma`.
struct VarDraws {
  VarSpec spec;
  std::vector<Eigen::MatrixXd> A;
  std::vector<Eigen::VectorXd> intercept;
  std::vector<Eigen::MatrixXd> gamma;
  std::vector<Eigen::MatrixXd> sigma;
  std::vector<Eigen::VectorXd> lambda2;  // local scales, one per shrunk coefficient
  std::vector<double> tau2;              // global scale
  int jitter_retries = 0;

  std::size_t size() const { return A.size(); }

  Eigen::MatrixXd mean_A() const { return average(A); }
  Eigen::MatrixXd mean_gamma() const { return average(gamma); }
  Eigen::MatrixXd mean_sigma() const { return average(sigma); }

 private:
  static Eigen::MatrixXd average(const std::vector<Eigen::MatrixXd>& v) {
    if (v.empty()) return {};
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(v[0].rows(), v[0].cols());
    for (const auto& x : v) s += x;
    return s / static_cast<double>(v.size());
  }
};

// Stacks the panel's series in the given order into a T x M matrix.
inline Eigen::MatrixXd panel_matrix(const MacroPanel& panel, const std::vector<std::string>& order) {
  Eigen::MatrixXd y(static_cast<Eigen::Index>(panel.length()), static_cast<Eigen::Index>(order.size()));
  for (std::size_t j = 0; j < order.size(); ++j) {
    if (!panel.has(order[j])) throw SchemaError("macro panel lacks series '" + order[j] + "'");
    const auto& s = panel.series.at(order[j]);
    for (std::size_t t = 0; t < s.size(); ++t) {
      if (std::isnan(s[t])) throw ValidationError("missing value in series '" + order[j] + "'");
      y(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = s[t];
    }
  }
  return y;
}

namespace detail {

// Sigma ~ IW(df, scale) via the Bartlett decomposition of its inverse.
inline Eigen::MatrixXd draw_inverse_wishart(double df, const Eigen::MatrixXd& scale, Rng& rng) {
  const auto m = scale.rows();
  const Eigen::MatrixXd scale_inv = scale.llt().solve(Eigen::MatrixXd::Identity(m, m));
  const Eigen::MatrixXd l = scale_inv.llt().matrixL();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    a(i, i) = std::sqrt(2.0 * rng.gamma(0.5 * (df - static_cast<double>(i)), 1.0));
    for (Eigen::Index j = 0; j < i; ++j) a(i, j) = rng.normal();
  }
  // W = (L a)(L a)' ~ Wishart(df, scale^-1); Sigma = W^-1
  const Eigen::MatrixXd la = l * a;
  const Eigen::MatrixXd la_inv = la.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(m, m));
  Eigen::MatrixXd sigma = la_inv.transpose() * la_inv;
  return 0.5 * (sigma + sigma.transpose());
}

}  // namespace detail

// Gibbs sampler for y_t = c + A z_t + G x_t + e_t, e_t ~ N(0, Sigma), with a
// horseshoe prior on every element of A and G (half-Cauchy local and global
// scales through inverse-gamma auxiliaries), a flat prior on c and an
// inverse-Wishart prior on Sigma.
inline VarDraws gibbs_fit(const Eigen::MatrixXd& y, const VarSpec& spec, const PriorConfig& prior,
                          const GibbsConfig& chain, std::uint64_t seed,
                          const Eigen::MatrixXd& exog = Eigen::MatrixXd()) {
  const int m = spec.m(), p = spec.lags, k = spec.k();
  if (y.cols() != m) throw DomainError("panel has " + std::to_string(y.cols()) + " columns, spec expects " + std::to_string(m));
  if (p < 1) throw DomainError("lag order must be positive");
  if (chain.iterations <= chain.burn_in || chain.thin < 1 || chain.burn_in < 0)
    throw DomainError("chain needs iterations > burn_in and thin >= 1");
  if (!y.allFinite()) throw ValidationError("VAR panel contains missing or non-finite values");
  const int e = static_cast<int>(exog.cols());
  if (e > 0 && exog.rows() != y.rows()) throw DomainError("exogenous regressors must share the panel index");
  const int t = static_cast<int>(y.rows()) - p;
  const int r = 1 + k + e;  // regressors per equation
  if (t <= k + e + 10) throw ValidationError("VAR needs T > K + 10 usable observations");

  // regressors: intercept, lags 1..P, exogenous block; slopes centred so the flat
  // intercept decouples from them
  Eigen::MatrixXd x(t, r);
  x.col(0).setOnes();
  for (int l = 1; l <= p; ++l) x.block(0, 1 + (l - 1) * m, t, m) = y.block(p - l, 0, t, m);
  if (e > 0) x.block(0, 1 + k, t, e) = exog.bottomRows(t);
  const Eigen::RowVectorXd centre = x.rightCols(r - 1).colwise().mean();
  x.rightCols(r - 1).rowwise() -= centre;
  const Eigen::MatrixXd yy = y.bottomRows(t);
  const Eigen::MatrixXd xtx = x.transpose() * x;
  const Eigen::MatrixXd xty = x.transpose() * yy;

  Rng rng(seed);
  const int nb = r * m;
  const int n_shrunk = (r - 1) * m;

  // start from least squares
  Eigen::MatrixXd b = xtx.ldlt().solve(xty);
  Eigen::MatrixXd resid = yy - x * b;
  Eigen::MatrixXd sigma = (resid.transpose() * resid) / t + 1e-6 * Eigen::MatrixXd::Identity(m, m);
  Eigen::VectorXd lambda2 = Eigen::VectorXd::Ones(n_shrunk), nu = Eigen::VectorXd::Ones(n_shrunk);
  double tau2 = 1.0, xi = 1.0;

  VarDraws out;
  out.spec = spec;
  const Eigen::MatrixXd s0 = prior.iw_scale * Eigen::MatrixXd::Identity(m, m);
  const double df = m + prior.iw_extra_df + t;
  Eigen::MatrixXd q(nb, nb);
  Eigen::VectorXd z(nb);

  for (int it = 0; it < chain.iterations; ++it) {
    // coefficients | Sigma, scales
    const Eigen::MatrixXd sinv = sigma.llt().solve(Eigen::MatrixXd::Identity(m, m));
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) q.block(i * r, j * r, r, r) = sinv(i, j) * xtx;
    for (int i = 0; i < m; ++i)
      for (int a = 1; a < r; ++a) {
        const double v = std::max(lambda2((a - 1) * m + i) * tau2, 1e-20);
        q(i * r + a, i * r + a) += 1.0 / v;
      }
    const Eigen::MatrixXd rhs_m = xty * sinv;
    const Eigen::Map<const Eigen::VectorXd> rhs(rhs_m.data(), nb);
    Eigen::LLT<Eigen::MatrixXd> llt(q);
    if (llt.info() != Eigen::Success) throw ChainError("coefficient precision is not positive definite");
    for (int i = 0; i < nb; ++i) z(i) = rng.normal();
    const Eigen::VectorXd beta = llt.solve(rhs) + llt.matrixU().solve(z);
    b = Eigen::Map<const Eigen::MatrixXd>(beta.data(), r, m);

    // Sigma | coefficients
    resid = yy - x * b;
    const Eigen::MatrixXd scale = s0 + resid.transpose() * resid;
    bool ok = false;
    for (int attempt = 0; attempt <= 5 && !ok; ++attempt) {
      Eigen::MatrixXd cand = detail::draw_inverse_wishart(df, scale, rng);
      if (attempt > 0) {
        cand += std::pow(10.0, attempt - 11) * cand.trace() / m * Eigen::MatrixXd::Identity(m, m);
        ++out.jitter_retries;
      }
      Eigen::LLT<Eigen::MatrixXd> check(cand);
      if (check.info() == Eigen::Success && cand.allFinite()) {
        sigma = cand;
        ok = true;
      }
    }
    if (!ok) throw ChainError("Sigma draw not positive definite after 5 jitter retries");

    // horseshoe scales; coefficient (a, i) is the slope on regressor a in equation i
    double ss = 0.0;
    for (int i = 0; i < m; ++i)
      for (int a = 1; a < r; ++a) {
        const int idx = (a - 1) * m + i;
        const double bj2 = b(a, i) * b(a, i);
        lambda2(idx) = std::clamp(rng.inv_gamma(1.0, 1.0 / nu(idx) + bj2 / (2.0 * tau2)), 1e-30, 1e30);
        nu(idx) = rng.inv_gamma(1.0, 1.0 + 1.0 / lambda2(idx));
        ss += bj2 / lambda2(idx);
      }
    tau2 = std::clamp(rng.inv_gamma(0.5 * (n_shrunk + 1), 1.0 / xi + 0.5 * ss), 1e-30, 1e30);
    xi = rng.inv_gamma(1.0, 1.0 + 1.0 / tau2);

    if (it >= chain.burn_in && (it - chain.burn_in) % chain.thin == 0) {
      const Eigen::MatrixXd slopes = b.bottomRows(r - 1).transpose();  // M x (K + E)
      out.A.push_back(slopes.leftCols(k));
      out.gamma.push_back(slopes.rightCols(e));
      out.intercept.push_back(b.row(0).transpose() - slopes * centre.transpose());
      out.sigma.push_back(sigma);
      out.lambda2.push_back(lambda2);
      out.tau2.push_back(tau2);
    }
  }
  return out;
}

}  // namespace mpd::bvar
