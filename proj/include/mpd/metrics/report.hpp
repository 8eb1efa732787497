#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mpd/core/csv.hpp"
#include "mpd/data/records.hpp"
#include "mpd/metrics/inequality.hpp"

namespace mpd::metrics {

struct MetricReport {
  double gini_income = 0.0;
  double gini_net_wealth = 0.0;  // households with positive net wealth only
  double gini_wealth = 0.0;      // gross assets
  double gini_debt = 0.0;
  double gini_bivariate = 0.0;
  double spearman_rho = 0.0;
  double lambda_U = 0.0;
  double lambda_L = 0.0;

  static constexpr std::array<const char*, 8> kColumns = {"gini_income", "gini_net_wealth", "gini_wealth",
                                                           "gini_debt",   "gini_bivariate",  "spearman_rho",
                                                           "lambda_U",    "lambda_L"};

  std::array<double, 8> values() const {
    return {gini_income, gini_net_wealth, gini_wealth, gini_debt, gini_bivariate, spearman_rho, lambda_U, lambda_L};
  }
  static MetricReport from_values(const std::array<double, 8>& v) {
    return {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]};
  }
};

struct TailThresholds {
  double upper = 0.95;
  double lower = 0.05;
};

// Sample metrics of a household panel. Negative incomes and non-positive net
// wealth are left out of the Gini indices; rank-based measures use everyone.
// With `with_tails` false the tail coefficients stay 0.
inline MetricReport compute_report(const std::vector<HouseholdRecord>& households, TailThresholds tails = {},
                                   std::uint64_t seed = 0, bool with_tails = true) {
  std::vector<double> income, net, assets, debt, w;
  std::vector<double> inc_pos, w_inc_pos, nw_pos, w_nw_pos, biv_x, biv_y, w_biv;
  for (const auto& h : households) {
    const double y = h.total_income(), nw = h.net_wealth();
    income.push_back(y);
    net.push_back(nw);
    assets.push_back(h.assets());
    debt.push_back(h.debt());
    w.push_back(h.weight);
    if (y >= 0.0) inc_pos.push_back(y), w_inc_pos.push_back(h.weight);
    if (nw > 0.0) nw_pos.push_back(nw), w_nw_pos.push_back(h.weight);
    if (y >= 0.0 && nw > 0.0) biv_x.push_back(y), biv_y.push_back(nw), w_biv.push_back(h.weight);
  }
  MetricReport r;
  r.gini_income = gini(inc_pos, w_inc_pos);
  r.gini_net_wealth = gini(nw_pos, w_nw_pos);
  r.gini_wealth = gini(assets, w);
  r.gini_debt = gini(debt, w);
  r.gini_bivariate = bivariate_gini(biv_x, biv_y, w_biv, seed);
  r.spearman_rho = sample_spearman(income, net, w);
  if (with_tails) {
    r.lambda_U = sample_tail(income, net, w, tails.upper, TailSide::Upper);
    r.lambda_L = sample_tail(income, net, w, tails.lower, TailSide::Lower);
  }
  return r;
}

inline csv::Table report_table(const std::vector<std::string>& labels, const std::vector<MetricReport>& reports,
                               const std::string& label_column = "country") {
  csv::Table t;
  t.header = {label_column};
  for (auto c : MetricReport::kColumns) t.header.emplace_back(c);
  for (std::size_t i = 0; i < reports.size(); ++i) {
    std::vector<std::string> row{labels.at(i)};
    for (double v : reports[i].values()) row.push_back(csv::format_double(v));
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace mpd::metrics
