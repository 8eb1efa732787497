#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "mpd/bart/bart.hpp"
#include "mpd/bart/design.hpp"
#include "mpd/bvar/irf.hpp"
#include "mpd/core/csv.hpp"
#include "mpd/core/error.hpp"
#include "mpd/core/parallel.hpp"
#include "mpd/data/records.hpp"
#include "mpd/metrics/report.hpp"

namespace mpd::microsim {

// Relative changes at one horizon. Prices, wages and the unemployment rate are
// proportional changes; `bonds` comes from the long rate via duration.
struct HorizonDelta {
  double house_prices = 0.0;
  double stock_prices = 0.0;
  double bond_prices = 0.0;
  double wages = 0.0;
  double unemployment = 0.0;
};

// deltas[h - 1] holds horizon h.
struct IrfDeltas {
  std::vector<HorizonDelta> deltas;
  int horizons() const { return static_cast<int>(deltas.size()); }
};

inline double log_response_to_change(double r) { return std::expm1(r / 100.0); }

// Builds deltas from median responses (variables x horizons 0..H) of the
// log-scaled HP, DJ50, LCOMP, UNEMP series and the LT-IR rate in percentage points.
inline IrfDeltas deltas_from_responses(const Eigen::MatrixXd& median, const std::vector<std::string>& variables,
                                       int horizons, double bond_duration = 5.0) {
  auto row = [&](const char* name) {
    const auto it = std::find(variables.begin(), variables.end(), name);
    if (it == variables.end()) throw DomainError(std::string("IRF lacks variable ") + name);
    return static_cast<Eigen::Index>(it - variables.begin());
  };
  if (median.cols() < horizons + 1) throw DomainError("IRF shorter than the simulation horizon");
  const auto hp = row("HP"), sp = row("DJ50"), lt = row("LT-IR"), wg = row("LCOMP"), un = row("UNEMP");
  IrfDeltas out;
  for (int h = 1; h <= horizons; ++h) {
    HorizonDelta d;
    d.house_prices = log_response_to_change(median(hp, h));
    d.stock_prices = log_response_to_change(median(sp, h));
    d.bond_prices = -bond_duration * median(lt, h) / 100.0;
    d.wages = log_response_to_change(median(wg, h));
    d.unemployment = log_response_to_change(median(un, h));
    for (double v : {d.house_prices, d.stock_prices, d.bond_prices, d.wages, d.unemployment})
      if (!std::isfinite(v)) throw DomainError("non-finite IRF delta at horizon " + std::to_string(h));
    out.deltas.push_back(d);
  }
  return out;
}

inline IrfDeltas deltas_from_irf(const bvar::IrfSet& set, double bond_duration = 5.0) {
  return deltas_from_responses(set.median, set.variables, set.horizons, bond_duration);
}

// Portfolio and wage revaluation. `imputed` (optional, one entry per household)
// is employment income imputed this horizon, which is not rescaled by wages.
inline std::vector<HouseholdRecord> apply_direct(std::vector<HouseholdRecord> panel, const HorizonDelta& d,
                                                 const std::vector<double>* imputed = nullptr) {
  if (imputed && imputed->size() != panel.size()) throw DomainError("imputed income size differs from panel");
  const double hp = 1.0 + d.house_prices, sp = 1.0 + d.stock_prices, bp = 1.0 + d.bond_prices, wg = 1.0 + d.wages;
  for (std::size_t i = 0; i < panel.size(); ++i) {
    auto& h = panel[i];
    h.wealth[kMainResidence] *= hp;
    h.wealth[kOtherRealEstate] *= hp;
    h.wealth[kShares] *= sp;
    h.wealth[kBonds] *= bp;
    const double fresh = imputed ? (*imputed)[i] : 0.0;
    if (fresh != 0.0)
      h.income[kEmployment] = (h.income[kEmployment] - fresh) * wg + fresh;
    else
      h.income[kEmployment] *= wg;
    h.income[kSelfEmployment] *= wg;
  }
  return panel;
}

// Per-person inputs to the employment channel, evaluated once on the baseline.
struct EmploymentModel {
  std::vector<double> prob_employed;
  std::vector<double> imputed_income;  // used only if the person becomes employed

  static EmploymentModel from_ensembles(const std::vector<PersonRecord>& persons,
                                        const bart::CovariateEncoder& status_encoder, const bart::Ensemble& pbart,
                                        const bart::CovariateEncoder& income_encoder, const bart::Ensemble& income,
                                        std::vector<std::string>* warnings = nullptr) {
    EmploymentModel m;
    m.prob_employed = pbart.predict(status_encoder.encode(persons, warnings));
    m.imputed_income = income.predict(income_encoder.encode(persons, warnings));
    for (auto& v : m.imputed_income) v = std::max(v, 0.0);
    return m;
  }
};

struct Transition {
  std::vector<HouseholdRecord> households;
  std::vector<PersonRecord> persons;
  std::vector<std::size_t> flipped;  // person indices, in selection order
  std::vector<double> imputed;       // per household
  std::size_t requested = 0;
  std::vector<std::string> warnings;
};

// Persons moving in or out of employment for a relative change `du` of the
// unemployment rate: |du| times the weighted number of unemployed persons,
// expressed in sample persons through the mean person weight.
inline std::size_t flip_count(const std::vector<PersonRecord>& persons, const std::vector<HouseholdRecord>& panel,
                              double du) {
  if (!std::isfinite(du)) throw DomainError("non-finite unemployment change");
  if (du == 0.0 || persons.empty()) return 0;
  std::unordered_map<std::string, double> weight;
  for (const auto& h : panel) weight[h.household_id] = h.weight;
  double unemployed = 0.0, total = 0.0;
  for (const auto& p : persons) {
    const auto it = weight.find(p.household_id);
    const double w = it == weight.end() ? 0.0 : it->second;
    total += w;
    if (!p.employed) unemployed += w;
  }
  if (total <= 0.0) return 0;
  const double mean_weight = total / static_cast<double>(persons.size());
  return static_cast<std::size_t>(std::llround(std::abs(du) * unemployed / mean_weight));
}

// Employment channel with an explicit number of flips. A fall in unemployment
// (du < 0) moves the most likely employed among the unemployed into work; a rise
// moves the least likely employed among the employed out of work.
inline Transition apply_employment_transition(const std::vector<PersonRecord>& persons,
                                              const std::vector<HouseholdRecord>& panel, double du, std::size_t count,
                                              const EmploymentModel& model, double replacement_rate) {
  if (model.prob_employed.size() != persons.size() || model.imputed_income.size() != persons.size())
    throw DomainError("employment model size differs from persons");
  if (!(replacement_rate >= 0.0 && replacement_rate <= 1.0)) throw DomainError("replacement rate outside [0, 1]");
  Transition t{panel, persons, {}, std::vector<double>(panel.size(), 0.0), count, {}};
  if (du == 0.0 || count == 0) return t;
  const bool into_work = du < 0.0;
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < persons.size(); ++i)
    if (persons[i].employed != into_work) pool.push_back(i);
  std::stable_sort(pool.begin(), pool.end(), [&](auto a, auto b) {
    return into_work ? model.prob_employed[a] > model.prob_employed[b] : model.prob_employed[a] < model.prob_employed[b];
  });
  if (count > pool.size()) {
    t.warnings.push_back("requested " + std::to_string(count) + " employment flips but only " +
                         std::to_string(pool.size()) + " persons are eligible");
    count = pool.size();
  }
  std::unordered_map<std::string, std::size_t> row;
  for (std::size_t i = 0; i < panel.size(); ++i) row[panel[i].household_id] = i;
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t i = pool[k];
    auto& p = t.persons[i];
    const auto it = row.find(p.household_id);
    if (it == row.end()) throw DomainError("person " + p.person_id + " has no household " + p.household_id);
    auto& h = t.households[it->second];
    if (into_work) {
      const double income = model.imputed_income[i];
      h.income[kEmployment] += income;
      h.income[kBenefits] -= p.unemployment_benefits;
      t.imputed[it->second] += income;
      p.employment_income = income;
      p.unemployment_benefits = 0.0;
    } else {
      const double benefits = replacement_rate * p.employment_income;
      h.income[kEmployment] -= p.employment_income;
      h.income[kBenefits] += benefits;
      p.unemployment_benefits = benefits;
      p.employment_income = 0.0;
    }
    p.employed = into_work;
    t.flipped.push_back(i);
  }
  return t;
}

inline Transition apply_employment_transition(const std::vector<PersonRecord>& persons,
                                              const std::vector<HouseholdRecord>& panel, double du,
                                              const EmploymentModel& model, double replacement_rate) {
  return apply_employment_transition(persons, panel, du, flip_count(persons, panel, du), model, replacement_rate);
}

// Metrics tracked over horizons. Tail dependence is left out.
inline constexpr std::array<const char*, 6> kTrackedMetrics = {"gini_income", "gini_net_wealth", "gini_wealth",
                                                                "gini_debt",   "gini_bivariate",  "spearman_rho"};

// Optional replacement for the plug-in Spearman's rho (e.g. a copula posterior
// median). It receives the panel and a seed shared by all horizons.
using RhoEstimator = std::function<double(const std::vector<HouseholdRecord>&, std::uint64_t)>;

struct SimulationConfig {
  double replacement_rate = 0.5;
  unsigned threads = 1;
  std::uint64_t seed = 0;
  RhoEstimator rho;
};

struct SimulationState {
  int horizon = 0;
  std::vector<HouseholdRecord> households;
  std::vector<std::size_t> flipped;
  metrics::MetricReport report;
  std::vector<std::string> warnings;
};

struct ShockPath {
  std::string shock;
  metrics::MetricReport baseline;
  std::vector<SimulationState> states;           // horizons 1..H
  std::map<std::string, std::vector<double>> pct;  // metric -> % change by horizon
};

inline metrics::MetricReport tracked_metrics(const std::vector<HouseholdRecord>& panel, const SimulationConfig& cfg) {
  metrics::MetricReport r = metrics::compute_report(panel, {}, cfg.seed, false);
  if (cfg.rho) r.spearman_rho = cfg.rho(panel, cfg.seed);
  return r;
}

inline double metric_value(const metrics::MetricReport& r, std::string_view name) {
  const auto v = r.values();
  for (std::size_t i = 0; i < v.size(); ++i)
    if (name == metrics::MetricReport::kColumns[i]) return v[i];
  throw DomainError("unknown metric " + std::string(name));
}

inline double pct_change(double now, double base) {
  if (now == base) return 0.0;
  return 100.0 * (now - base) / std::abs(base);
}

inline SimulationState simulate_horizon(const std::vector<HouseholdRecord>& baseline,
                                        const std::vector<PersonRecord>& persons, const EmploymentModel& model,
                                        const HorizonDelta& d, int horizon, const SimulationConfig& cfg) {
  auto t = apply_employment_transition(persons, baseline, d.unemployment, model, cfg.replacement_rate);
  SimulationState s;
  s.horizon = horizon;
  s.households = apply_direct(std::move(t.households), d, &t.imputed);
  s.flipped = std::move(t.flipped);
  s.warnings = std::move(t.warnings);
  s.report = tracked_metrics(s.households, cfg);
  return s;
}

// Every horizon starts from the baseline; horizons run in parallel and are
// collected in order.
inline ShockPath run_shock(const std::string& shock, const std::vector<HouseholdRecord>& baseline,
                           const std::vector<PersonRecord>& persons, const EmploymentModel& model,
                           const IrfDeltas& deltas, const SimulationConfig& cfg) {
  ShockPath path;
  path.shock = shock;
  path.baseline = tracked_metrics(baseline, cfg);
  path.states.resize(deltas.deltas.size());
  parallel_for(deltas.deltas.size(), cfg.threads, [&](std::size_t i) {
    path.states[i] = simulate_horizon(baseline, persons, model, deltas.deltas[i], static_cast<int>(i) + 1, cfg);
  });
  for (const char* m : kTrackedMetrics) {
    auto& v = path.pct[m];
    const double base = metric_value(path.baseline, m);
    for (const auto& s : path.states) v.push_back(pct_change(metric_value(s.report, m), base));
  }
  return path;
}

inline std::vector<ShockPath> run_simulation(const std::vector<HouseholdRecord>& baseline,
                                             const std::vector<PersonRecord>& persons, const EmploymentModel& model,
                                             const std::map<std::string, IrfDeltas>& shocks,
                                             const SimulationConfig& cfg) {
  std::vector<ShockPath> out;
  for (const auto& [name, deltas] : shocks) out.push_back(run_shock(name, baseline, persons, model, deltas, cfg));
  return out;
}

// Largest absolute value with its sign; the earliest horizon wins ties.
inline double peak_response(const std::vector<double>& trajectory) {
  if (trajectory.empty()) throw DomainError("peak of an empty trajectory");
  double best = trajectory.front();
  for (double v : trajectory)
    if (std::abs(v) > std::abs(best)) best = v;
  return best;
}

inline csv::Table trajectory_table(const std::vector<ShockPath>& paths) {
  csv::Table t;
  t.header = {"shock", "metric", "horizon", "pct_change"};
  for (const auto& p : paths)
    for (const char* m : kTrackedMetrics) {
      const auto& v = p.pct.at(m);
      for (std::size_t h = 0; h < v.size(); ++h)
        t.rows.push_back({p.shock, m, std::to_string(h + 1), csv::format_double(v[h])});
    }
  return t;
}

}  // namespace mpd::microsim
