#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mpd/bvar/irf.hpp"
#include "mpd/core/csv.hpp"
#include "mpd/core/hash.hpp"
#include "mpd/core/random.hpp"
#include "mpd/core/stats.hpp"
#include "mpd/data/macro.hpp"
#include "mpd/data/micro_io.hpp"
#include "mpd/marginals/families.hpp"
#include "mpd/pipeline/config.hpp"

namespace mpd::pipeline {

// Synthetic fixture: households from two parametric margins joined by a Gaussian
// copula, persons with a probit employment status, and a stable VAR(1) macro
// panel. Money is in thousands.

inline const std::vector<std::string>& default_income_families() {
  static const std::vector<std::string> f{"singh_maddala", "dagum"};
  return f;
}
inline const std::vector<double>& default_copula_r() {
  static const std::vector<double> r{0.3, 0.5, 0.1, 0.6, 0.4, 0.2, 0.7, 0.35};
  return r;
}

struct MarginTruth {
  std::string family;  // a marginal family name or "exponential"
  std::vector<double> params;
};

inline MarginTruth income_truth(const std::string& family, std::size_t i) {
  const double v = static_cast<double>(i % 4);
  if (family == "singh_maddala") return {family, {2.2 + 0.15 * v, 30.0 + 4.0 * v, 1.4 + 0.1 * v}};
  if (family == "dagum") return {family, {32.0 + 3.0 * v, 3.0 + 0.2 * v, 0.8 + 0.05 * v}};
  if (family == "exponential") return {family, {1.0 / (30.0 + 4.0 * v)}};
  throw ConfigError("config key 'synthetic.income_families': unsupported family '" + family + "'");
}

inline MarginTruth wealth_truth(std::size_t i) {
  const double v = static_cast<double>(i % 4);
  return {"negpos_mixture", {0.05 + 0.01 * v, 0.03, 12.0, 0.9, 140.0 + 25.0 * v, 1.3 + 0.1 * v, 0.7}};
}

inline double margin_quantile(const MarginTruth& m, double u) {
  if (m.family == "exponential") return -std::log1p(-u) / m.params[0];
  return marginals::quantile(marginals::make_family(marginals::parse_family(m.family), m.params), u);
}

// Gaussian-copula pairs (x1, x2) with the given margins.
inline std::vector<std::pair<double, double>> copula_pairs(const MarginTruth& m1, const MarginTruth& m2, double r,
                                                           std::size_t n, Rng& rng) {
  std::vector<std::pair<double, double>> out(n);
  const double c = std::sqrt(1.0 - r * r);
  for (auto& xy : out) {
    const double z1 = rng.normal(), z2 = r * z1 + c * rng.normal();
    const double u1 = std::clamp(normal_cdf(z1), 1e-12, 1 - 1e-12), u2 = std::clamp(normal_cdf(z2), 1e-12, 1 - 1e-12);
    xy = {margin_quantile(m1, u1), margin_quantile(m2, u2)};
  }
  return out;
}

namespace detail {

inline std::vector<double> normalised(std::vector<double> s) {
  double t = 0;
  for (double v : s) t += v;
  for (double& v : s) v /= t;
  return s;
}

inline MicroData synthetic_micro(const std::string& code, const std::vector<std::pair<double, double>>& xy, Rng& rng) {
  MicroData d;
  char id[32];
  for (std::size_t h = 0; h < xy.size(); ++h) {
    const auto [y, nw] = xy[h];
    HouseholdRecord hh;
    std::snprintf(id, sizeof id, "%s-h%05zu", code.c_str(), h + 1);
    hh.household_id = id;
    hh.weight = rng.uniform(0.5, 1.5);

    const std::size_t size = 1 + rng.index(3);
    const double children = rng.index(4) == 0 ? 0.0 : static_cast<double>(rng.index(3));
    std::vector<PersonRecord> members;
    const double head_age = rng.uniform(22, 85);
    for (std::size_t k = 0; k < size; ++k) {
      PersonRecord p;
      std::snprintf(id, sizeof id, "%s-p%05zu-%zu", code.c_str(), h + 1, k + 1);
      p.person_id = id;
      p.household_id = hh.household_id;
      p.gender = rng.uniform() < 0.5 ? "F" : "M";
      p.age = k == 0 ? head_age : std::clamp(head_age + rng.normal(0, 6), 18.0, 90.0);
      const double e = rng.uniform();
      p.education = e < 0.25 ? 1 : e < 0.7 ? 2 : 3;
      p.marital_status = size >= 2 && k < 2 ? "married" : rng.uniform() < 0.8 ? "single" : "divorced";
      p.n_children = p.age < 60 ? children : 0.0;
      const double eta = 0.4 + 0.5 * (p.education - 2) + 0.3 * (p.gender == "M") - 0.02 * std::abs(p.age - 42);
      p.employed = p.age < 65 && rng.uniform() < normal_cdf(eta);
      p.tenure_years = p.employed ? rng.uniform(0, p.age - 18) : 0.0;
      members.push_back(p);
    }

    // Income: split the drawn total over components.
    std::size_t employed = 0, seekers = 0, retired = 0;
    for (const auto& p : members) {
      employed += p.employed;
      seekers += !p.employed && p.age < 65;
      retired += p.age >= 65;
    }
    const auto inc = normalised({employed ? 0.7 : 0.0, rng.uniform() < 0.1 ? 0.2 : 0.0, retired ? 0.7 : 0.02,
                                 rng.uniform() < 0.2 ? 0.1 : 0.0, 0.05, seekers ? 0.2 : 0.03});
    for (std::size_t k = 0; k < kIncomeComponents; ++k) hh.income[k] = y * inc[k];
    double pay = 0;
    for (const auto& p : members)
      if (p.employed) pay += (1.0 + p.education) * (1.0 + p.tenure_years / 20.0);
    for (auto& p : members) {
      if (p.employed) p.employment_income = hh.income[kEmployment] * (1.0 + p.education) * (1.0 + p.tenure_years / 20.0) / pay;
      if (!p.employed && p.age < 65) p.unemployment_benefits = 0.8 * hh.income[kBenefits] / static_cast<double>(seekers);
    }

    // Wealth: choose debt, then split gross assets.
    const bool owner = rng.uniform() < 0.3 + 0.5 * (nw > 0 ? std::min(1.0, nw / 400.0) : 0.0);
    double debt = 0.0, assets = 0.0;
    if (nw < 0) {
      assets = rng.exponential(1.0 / 5.0);
      debt = assets - nw;
    } else if (nw > 0) {
      debt = owner ? rng.uniform(0, 0.6) * nw : rng.uniform() < 0.3 ? rng.uniform(0, 0.1) * nw : 0.0;
      assets = nw + debt;
    }
    if (assets > 0) {
      const auto w = normalised({owner ? 0.6 : 0.0, rng.uniform() < 0.15 ? 0.2 : 0.0, rng.uniform() < 0.1 ? 0.15 : 0.0,
                                 rng.uniform() < 0.2 ? 0.08 : 0.0, rng.uniform() < 0.1 ? 0.05 : 0.0,
                                 rng.uniform() < 0.3 ? 0.07 : 0.0, 0.1, 0.02});
      for (std::size_t k = 0; k + 1 < kWealthComponents; ++k) hh.wealth[k] = assets * w[k];
    }
    hh.wealth[kLiabilities] = debt;
    d.households.push_back(hh);
    for (auto& p : members) d.persons.push_back(std::move(p));
  }
  for (std::size_t i = 0; i < d.households.size(); ++i)
    if (d.households[i].negative_income()) d.negative_income_households.push_back(i);
  return d;
}

}  // namespace detail

struct VarTruth {
  std::vector<std::string> variables;
  Eigen::VectorXd mean;
  Eigen::MatrixXd A;      // VAR(1) coefficients
  Eigen::MatrixXd chol;   // lower Cholesky factor of the innovation covariance
};

// Recursive macro system: own persistence on the diagonal, policy rates and the
// spread feeding into activity and asset prices with one lag.
inline VarTruth synthetic_var(const std::vector<std::string>& ordering, double persistence, std::size_t i) {
  VarTruth v;
  v.variables = ordering;
  const auto m = static_cast<Eigen::Index>(ordering.size());
  v.mean = Eigen::VectorXd::Zero(m);
  v.A = persistence * Eigen::MatrixXd::Identity(m, m);
  v.chol = Eigen::MatrixXd::Zero(m, m);
  const double s = 0.7 + 0.1 * static_cast<double>(i % 6);
  struct Row {
    const char* name;
    double level, sd, st, ea;
  };
  const Row rows[] = {{"GDP", 100 * std::log(1000.0), 0.6, -0.5 * s, -0.3 * s},
                      {"HICP", 100 * std::log(100.0), 0.3, -0.2, -0.1},
                      {"LCOMP", 100 * std::log(50.0), 0.5, -0.4 * s, -0.2 * s},
                      {"UNEMP", 100 * std::log(8.0), 2.0, 2.0 * s, 1.0 * s},
                      {"HP", 100 * std::log(150.0), 1.5, -1.5 * s, -0.5 * s},
                      {"DJ50", 100 * std::log(3000.0), 5.0, -4.0 * s, -3.0 * s},
                      {"LT-IR", 4.0, 0.2, 0.3, 0.2},
                      {"EA-spread", 1.0, 0.15, 0.0, 0.0},
                      {"ST-IR", 3.0, 0.25, 0.0, 0.0}};
  auto at = [&](const char* name) {
    const auto it = std::find(ordering.begin(), ordering.end(), name);
    return it == ordering.end() ? Eigen::Index{-1} : static_cast<Eigen::Index>(it - ordering.begin());
  };
  const auto st = at("ST-IR"), ea = at("EA-spread");
  for (const auto& r : rows) {
    const auto j = at(r.name);
    if (j < 0) continue;
    v.mean(j) = r.level;
    v.chol(j, j) = r.sd;
    if (st >= 0 && j != st) v.A(j, st) = r.st;
    if (ea >= 0 && j != ea) v.A(j, ea) = r.ea;
  }
  // mild correlation of the rate innovations
  if (const auto lt = at("LT-IR"); lt >= 0 && st >= 0) v.chol(st, lt) = lt < st ? 0.08 : 0.0;
  if (const auto gdp = at("GDP"); gdp >= 0 && st >= 0) v.A(st, gdp) = 0.02;
  return v;
}

inline Eigen::MatrixXd simulate_var(const VarTruth& v, int quarters, Rng& rng, int burn = 200) {
  if (bvar::spectral_radius(v.A, 1) >= 1.0) throw DomainError("requested VAR is not stable (spectral radius >= 1)");
  const auto m = v.mean.size();
  Eigen::VectorXd dev = Eigen::VectorXd::Zero(m), e(m);
  Eigen::MatrixXd out(quarters, m);
  for (int t = -burn; t < quarters; ++t) {
    for (Eigen::Index j = 0; j < m; ++j) e(j) = rng.normal();
    dev = v.A * dev + v.chol * e;
    if (t >= 0) out.row(t) = (v.mean + dev).transpose();
  }
  return out;
}

inline csv::Table macro_table(const VarTruth& v, const Eigen::MatrixXd& y, const Quarter& start) {
  csv::Table t;
  t.header = {"date"};
  for (const auto& n : v.variables) t.header.push_back(n);
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    std::vector<std::string> row{Quarter::from_ordinal(start.ordinal() + static_cast<int>(r)).str()};
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
      const auto& name = v.variables[static_cast<std::size_t>(j)];
      row.push_back(csv::format_double(is_log_series(name) ? std::exp(y(r, j) / 100.0) : y(r, j)));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    j.push_back(row);
  }
  return j;
}

struct SyntheticCountry {
  std::string code;
  MicroData micro;
  csv::Table macro;
  Eigen::MatrixXd macro_transformed;  // quarters x variables, model scale
  nlohmann::json truth;
};

inline SyntheticCountry generate_country(const std::string& code, std::size_t index, const SyntheticConfig& cfg,
                                         const std::vector<std::string>& ordering, std::uint64_t seed) {
  if (cfg.households < 50) throw ConfigError("config key 'synthetic.households': must be >= 50");
  if (cfg.quarters < 20) throw ConfigError("config key 'synthetic.quarters': must be >= 20");
  const auto& families = cfg.income_families.empty() ? default_income_families() : cfg.income_families;
  const auto& rs = cfg.copula_r.empty() ? default_copula_r() : cfg.copula_r;
  const auto inc = income_truth(families[index % families.size()], index);
  const auto nw = wealth_truth(index);
  const double r = rs[index % rs.size()];
  const auto var = synthetic_var(ordering, cfg.persistence, index);

  Rng rng(seed);
  SyntheticCountry c;
  c.code = code;
  c.micro = detail::synthetic_micro(code, copula_pairs(inc, nw, r, static_cast<std::size_t>(cfg.households), rng), rng);
  c.macro_transformed = simulate_var(var, cfg.quarters, rng);
  c.macro = macro_table(var, c.macro_transformed, parse_quarter(cfg.start, 0));
  c.truth = {{"country", code},
             {"income", {{"family", inc.family}, {"params", inc.params}}},
             {"net_wealth", {{"family", nw.family}, {"params", nw.params}}},
             {"copula_r", r},
             {"spearman_rho", 6.0 / M_PI * std::asin(r / 2.0)},
             {"var", {{"variables", var.variables},
                      {"lags", 1},
                      {"mean", std::vector<double>(var.mean.data(), var.mean.data() + var.mean.size())},
                      {"A", matrix_json(var.A)},
                      {"sigma_chol", matrix_json(var.chol)},
                      {"spectral_radius", bvar::spectral_radius(var.A, 1)}}}};
  return c;
}

// Writes <dir>/<country>/{households,persons,macro}.csv and truth.json plus a
// reference long-rate file for the spread principal component.
inline std::vector<std::filesystem::path> write_synthetic(const std::filesystem::path& dir, const RunConfig& cfg) {
  std::vector<std::filesystem::path> written;
  Eigen::VectorXd reference;
  const auto lt = std::find(cfg.bvar.ordering.begin(), cfg.bvar.ordering.end(), "LT-IR") - cfg.bvar.ordering.begin();
  const auto ea = std::find(cfg.bvar.ordering.begin(), cfg.bvar.ordering.end(), "EA-spread") - cfg.bvar.ordering.begin();
  for (std::size_t i = 0; i < cfg.countries.size(); ++i) {
    const auto& code = cfg.countries[i];
    const auto c = generate_country(code, i, cfg.synthetic, cfg.bvar.ordering, derive_seed(cfg.seed, "synthetic/" + code));
    const auto sub = dir / code;
    std::filesystem::create_directories(sub);
    write_households(sub / cfg.data.households, c.micro.households);
    write_persons(sub / cfg.data.persons, c.micro.persons);
    csv::write(sub / cfg.data.macro, c.macro);
    std::ofstream(sub / "truth.json") << c.truth.dump(2) << "\n";
    written.insert(written.end(), {sub / cfg.data.households, sub / cfg.data.persons, sub / cfg.data.macro, sub / "truth.json"});
    const Eigen::VectorXd base = c.macro_transformed.col(lt) - c.macro_transformed.col(ea);
    reference = reference.size() ? Eigen::VectorXd(reference + base) : base;
  }
  reference /= static_cast<double>(cfg.countries.size());
  csv::Table ref;
  ref.header = {"date", "LT-IR"};
  const auto start = parse_quarter(cfg.synthetic.start, 0);
  for (Eigen::Index t = 0; t < reference.size(); ++t)
    ref.rows.push_back({Quarter::from_ordinal(start.ordinal() + static_cast<int>(t)).str(), csv::format_double(reference(t))});
  csv::write(dir / "reference_rate.csv", ref);
  written.push_back(dir / "reference_rate.csv");
  return written;
}

}  // namespace mpd::pipeline
