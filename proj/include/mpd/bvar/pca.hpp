#pragma once

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mpd/core/error.hpp"

namespace mpd::bvar {

struct PrincipalComponent {
  std::vector<double> series;   // scores of the first component
  Eigen::VectorXd loadings;     // unit-norm eigenvector, loading sum > 0
  double explained_share = 0.0;
};

// First principal component of the demeaned columns of `x` (T x N).
inline PrincipalComponent first_component(const Eigen::MatrixXd& x) {
  if (x.cols() < 2) throw DomainError("principal component needs at least two series");
  if (x.rows() < 2) throw DomainError("principal component needs at least two observations");
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const auto& values = eig.eigenvalues();  // ascending
  const double total = values.sum();
  if (!(total > 1e-14 * std::max(1.0, cov.cwiseAbs().maxCoeff())) || !(values(values.size() - 1) > 0.0))
    throw DegenerateDataError("singular spread covariance: every series is constant");
  Eigen::VectorXd v = eig.eigenvectors().col(values.size() - 1);
  if (v.sum() < 0.0) v = -v;
  PrincipalComponent pc;
  pc.loadings = v;
  pc.explained_share = values(values.size() - 1) / total;
  const Eigen::VectorXd scores = centered * v;
  pc.series.assign(scores.data(), scores.data() + scores.size());
  return pc;
}

// Euro-area spread factor: first component of country long rates minus the German rate.
inline PrincipalComponent pca_spread(const std::vector<std::vector<double>>& country_rates,
                                     std::span<const double> german_rate) {
  if (country_rates.size() < 2) throw DomainError("pca_spread needs at least two country series");
  const auto t = static_cast<Eigen::Index>(german_rate.size());
  Eigen::MatrixXd spreads(t, static_cast<Eigen::Index>(country_rates.size()));
  for (std::size_t j = 0; j < country_rates.size(); ++j) {
    if (country_rates[j].size() != german_rate.size()) throw DomainError("spread series must share one index");
    for (Eigen::Index i = 0; i < t; ++i)
      spreads(i, static_cast<Eigen::Index>(j)) = country_rates[j][static_cast<std::size_t>(i)] - german_rate[static_cast<std::size_t>(i)];
  }
  return first_component(spreads);
}

}  // namespace mpd::bvar
