#pragma once

#include <cmath>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "mpd/core/csv.hpp"
#include "mpd/core/error.hpp"
#include "mpd/data/records.hpp"
#include "mpd/metrics/report.hpp"

namespace mpd::explore {

// Zero mean and unit sample (n - 1) standard deviation.
inline std::vector<double> standardize(std::span<const double> v, const std::string& name = "column") {
  if (v.size() < 2) throw ValidationError("cannot standardize " + name + ": fewer than two values");
  long double m = 0;
  for (double x : v) m += x;
  m /= static_cast<long double>(v.size());
  long double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  const long double sd = std::sqrt(ss / static_cast<long double>(v.size() - 1));
  if (!(sd > 0) || !std::isfinite(static_cast<double>(sd)))
    throw ValidationError("cannot standardize " + name + ": zero variance");
  std::vector<double> out;
  out.reserve(v.size());
  for (double x : v) out.push_back(static_cast<double>((x - m) / sd));
  return out;
}

struct PairwiseFit {
  double slope = 0.0;
  double t = 0.0;
  double p_value = 1.0;
  std::string flag;  // "°" at 1%, "*" at 5%, empty otherwise
};

inline std::string significance_flag(double p) {
  if (p < 0.01) return "°";
  if (p < 0.05) return "*";
  return "";
}

// Least-squares slope of y on x with intercept and a two-sided t-test on n - 2
// degrees of freedom.
inline PairwiseFit pairwise_regress(std::span<const double> y, std::span<const double> x) {
  if (y.size() != x.size()) throw DomainError("pairwise regression needs equally long columns");
  const std::size_t n = y.size();
  if (n < 3) throw ValidationError("pairwise regression needs at least 3 observations");
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) mx += x[i], my += y[i];
  mx /= n, my /= n;
  long double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0)) throw DegenerateDataError("pairwise regression on a constant regressor");
  PairwiseFit f;
  f.slope = static_cast<double>(sxy / sxx);
  const long double ssr = std::max<long double>(syy - sxy * sxy / sxx, 0.0L);
  const double df = static_cast<double>(n - 2);
  const double se = std::sqrt(static_cast<double>(ssr) / df / static_cast<double>(sxx));
  if (se == 0.0) {
    f.t = f.slope == 0.0 ? 0.0 : std::copysign(INFINITY, f.slope);
    f.p_value = f.slope == 0.0 ? 1.0 : 0.0;
  } else {
    f.t = f.slope / se;
    const boost::math::students_t dist(df);
    f.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(f.t)));
  }
  f.flag = significance_flag(f.p_value);
  return f;
}

// Country characteristics, in display order.
inline const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names{
      "unemployment_rate", "avg_pension_income", "avg_unemployment_benefits", "avg_social_transfers",
      "avg_income",        "avg_net_wealth",     "avg_debt",                  "pct_voluntary_pension",
      "pct_self_employed", "avg_financial_wealth", "pct_business_investment", "pct_financial_wealth",
      "pct_home_owners",   "pct_tertiary_educated", "avg_age",                "pct_retired",
      "avg_children",      "pct_single",         "avg_household_size",        "rho_t0",
      "gini_bivariate_t0", "gini_net_wealth_t0", "gini_income_t0"};
  return names;
}

struct FeatureOptions {
  int tertiary_level = 3;  // education at or above this level counts as tertiary
  double retirement_age = 65.0;
};

// Survey-weighted country aggregates. Person-level shares use the weight of the
// person's household.
inline std::map<std::string, double> country_features(const MicroData& data, const metrics::MetricReport& initial,
                                                      const FeatureOptions& opt = {}) {
  std::unordered_map<std::string, std::size_t> row;
  for (std::size_t i = 0; i < data.households.size(); ++i) row[data.households[i].household_id] = i;
  std::vector<double> ub(data.households.size(), 0.0), size(data.households.size(), 0.0);
  double pw = 0, unemployed = 0, tertiary = 0, age = 0, retired = 0, children = 0, single = 0;
  for (const auto& p : data.persons) {
    const auto it = row.find(p.household_id);
    if (it == row.end()) continue;
    const double w = data.households[it->second].weight;
    ub[it->second] += p.unemployment_benefits;
    size[it->second] += 1.0;
    pw += w;
    unemployed += w * !p.employed;
    tertiary += w * (p.education >= opt.tertiary_level);
    age += w * p.age;
    retired += w * (!p.employed && p.age >= opt.retirement_age);
    children += w * p.n_children;
    single += w * (p.marital_status == "single");
  }
  double hw = 0;
  std::map<std::string, double> sums;
  for (std::size_t i = 0; i < data.households.size(); ++i) {
    const auto& h = data.households[i];
    const double w = h.weight;
    const double financial = h.wealth[kShares] + h.wealth[kBonds] + h.wealth[kPensionInsurance] +
                             h.wealth[kDeposits] + h.wealth[kOtherFinancial];
    hw += w;
    sums["avg_pension_income"] += w * h.income[kPensions];
    sums["avg_unemployment_benefits"] += w * ub[i];
    sums["avg_social_transfers"] += w * (h.income[kBenefits] - ub[i]);
    sums["avg_income"] += w * h.total_income();
    sums["avg_net_wealth"] += w * h.net_wealth();
    sums["avg_debt"] += w * h.debt();
    sums["pct_voluntary_pension"] += w * (h.wealth[kPensionInsurance] > 0);
    sums["pct_self_employed"] += w * (h.income[kSelfEmployment] > 0);
    sums["avg_financial_wealth"] += w * financial;
    sums["pct_business_investment"] += w * (h.wealth[kBusiness] > 0);
    sums["pct_financial_wealth"] += w * (financial > 0);
    sums["pct_home_owners"] += w * (h.wealth[kMainResidence] > 0);
    sums["avg_household_size"] += w * size[i];
  }
  if (!(hw > 0) || !(pw > 0)) throw DegenerateDataError("country features need positive household and person weights");
  std::map<std::string, double> f;
  for (const auto& [k, v] : sums) f[k] = v / hw;
  for (const auto& k : {"pct_voluntary_pension", "pct_self_employed", "pct_business_investment", "pct_financial_wealth",
                        "pct_home_owners"})
    f[k] *= 100.0;
  f["unemployment_rate"] = 100.0 * unemployed / pw;
  f["pct_tertiary_educated"] = 100.0 * tertiary / pw;
  f["avg_age"] = age / pw;
  f["pct_retired"] = 100.0 * retired / pw;
  f["avg_children"] = children / pw;
  f["pct_single"] = 100.0 * single / pw;
  f["rho_t0"] = initial.spearman_rho;
  f["gini_bivariate_t0"] = initial.gini_bivariate;
  f["gini_net_wealth_t0"] = initial.gini_net_wealth;
  f["gini_income_t0"] = initial.gini_income;
  return f;
}

struct Cell {
  std::string feature;
  std::string response;  // e.g. "gini_income/target"
  PairwiseFit fit;
};

struct ExploreResult {
  std::vector<std::string> features;   // regressed, in display order
  std::vector<std::string> responses;  // column order
  std::vector<Cell> cells;
  std::vector<std::string> skipped;  // features or responses that could not be standardized
};

// Every (feature, response) pair across countries. Columns without variance are
// skipped and reported rather than aborting the table.
inline ExploreResult regress_all(const std::vector<std::map<std::string, double>>& features,
                             const std::vector<std::pair<std::string, std::vector<double>>>& responses) {
  ExploreResult r;
  const std::size_t n = features.size();
  if (n < 3) throw ValidationError("exploratory regression needs at least 3 countries");
  std::vector<std::pair<std::string, std::vector<double>>> ys;
  for (const auto& [name, y] : responses) {
    if (y.size() != n) throw DomainError("response " + name + " does not cover every country");
    try {
      ys.emplace_back(name, standardize(y, name));
      r.responses.push_back(name);
    } catch (const ValidationError& e) {
      r.skipped.push_back(e.what());
    }
  }
  for (const auto& name : feature_names()) {
    std::vector<double> x;
    for (const auto& f : features) {
      const auto it = f.find(name);
      if (it == f.end()) throw SchemaError("country feature " + name + " missing");
      x.push_back(it->second);
    }
    std::vector<double> zx;
    try {
      zx = standardize(x, name);
    } catch (const ValidationError& e) {
      r.skipped.push_back(e.what());
      continue;
    }
    r.features.push_back(name);
    for (const auto& [yn, zy] : ys) r.cells.push_back({name, yn, pairwise_regress(zy, zx)});
  }
  return r;
}

// Rows are features, columns responses; cells hold the coefficient and flag.
inline csv::Table wide_table(const ExploreResult& r) {
  csv::Table t;
  t.header = {"feature"};
  for (const auto& y : r.responses) t.header.push_back(y);
  for (const auto& f : r.features) {
    std::vector<std::string> row{f};
    for (const auto& y : r.responses)
      for (const auto& c : r.cells)
        if (c.feature == f && c.response == y) row.push_back(csv::format_double(c.fit.slope) + c.fit.flag);
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline csv::Table long_table(const ExploreResult& r) {
  csv::Table t;
  t.header = {"feature", "response", "coefficient", "t", "p_value", "flag"};
  for (const auto& c : r.cells)
    t.rows.push_back({c.feature, c.response, csv::format_double(c.fit.slope), csv::format_double(c.fit.t),
                      csv::format_double(c.fit.p_value), c.fit.flag});
  return t;
}

}  // namespace mpd::explore
