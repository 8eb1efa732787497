#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "mpd/core/random.hpp"
#include "mpd/microsim/microsim.hpp"

using namespace mpd;
using namespace mpd::microsim;

namespace {

HouseholdRecord household(const std::string& id, double weight, std::array<double, kIncomeComponents> inc,
                          std::array<double, kWealthComponents> wealth) {
  HouseholdRecord h;
  h.household_id = id;
  h.weight = weight;
  h.income = inc;
  h.wealth = wealth;
  return h;
}

std::vector<HouseholdRecord> three_households() {
  return {household("h1", 1.0, {40000, 5000, 3000, 1200, 800, 0}, {100, 20, 30, 40, 50, 60, 70, 80, 90}),
          household("h2", 2.0, {0, 0, 15000, 0, 100, 6000}, {0, 0, 0, 10, 200, 5, 500, 0, 0}),
          household("h3", 1.5, {70000, 0, 0, 9000, 2500, 0}, {300000, 80000, 0, 25000, 12000, 7000, 9000, 1000, 150000})};
}

// Twenty persons in ten households: ten employed, ten unemployed.
struct Fixture {
  std::vector<HouseholdRecord> households;
  std::vector<PersonRecord> persons;
  EmploymentModel model;
};

Fixture labour_fixture() {
  Fixture f;
  for (int i = 0; i < 10; ++i)
    f.households.push_back(household("h" + std::to_string(i), 1.0, {0, 0, 0, 0, 0, 0}, {1000.0 * (i + 1), 0, 0, 0, 0, 0, 50, 0, 0}));
  for (int i = 0; i < 20; ++i) {
    PersonRecord p;
    p.person_id = "p" + std::to_string(i);
    p.household_id = "h" + std::to_string(i / 2);
    p.employed = i % 2 == 0;
    p.employment_income = p.employed ? 20000.0 + 1000.0 * i : 0.0;
    p.unemployment_benefits = p.employed ? 0.0 : 500.0 + i;
    auto& h = f.households[static_cast<std::size_t>(i / 2)];
    h.income[kEmployment] += p.employment_income;
    h.income[kBenefits] += p.unemployment_benefits;
    f.persons.push_back(p);
    // distinct probabilities in a scrambled order
    f.model.prob_employed.push_back(std::fmod(0.37 * (i + 1), 1.0));
    f.model.imputed_income.push_back(15000.0 + 100.0 * i);
  }
  return f;
}

std::vector<std::size_t> ranked(const Fixture& f, bool employed, bool highest, std::size_t k) {
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < f.persons.size(); ++i)
    if (f.persons[i].employed == employed) pool.push_back(i);
  std::sort(pool.begin(), pool.end(), [&](auto a, auto b) {
    return highest ? f.model.prob_employed[a] > f.model.prob_employed[b] : f.model.prob_employed[a] < f.model.prob_employed[b];
  });
  pool.resize(k);
  return pool;
}

std::map<std::string, IrfDeltas> shocks_from(std::vector<HorizonDelta> path) {
  return {{"target", IrfDeltas{path}}, {"qe", IrfDeltas{path}}};
}

}  // namespace

TEST(Deltas, ConvertsLogResponsesAndRates) {
  const std::vector<std::string> vars{"HP", "DJ50", "LT-IR", "LCOMP", "UNEMP"};
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(5, 3);
  m.col(1) << 10.0, -5.0, 0.5, 1.0, 20.0;
  m.col(2) << 0.0, 0.0, -0.2, 0.0, -10.0;
  const auto d = deltas_from_responses(m, vars, 2, 5.0);
  ASSERT_EQ(d.horizons(), 2);
  EXPECT_NEAR(d.deltas[0].house_prices, std::exp(0.1) - 1, 1e-15);
  EXPECT_NEAR(d.deltas[0].stock_prices, std::exp(-0.05) - 1, 1e-15);
  EXPECT_NEAR(1 + d.deltas[0].bond_prices, 0.975, 1e-15);
  EXPECT_NEAR(d.deltas[0].wages, std::exp(0.01) - 1, 1e-15);
  EXPECT_NEAR(d.deltas[0].unemployment, std::exp(0.2) - 1, 1e-15);
  EXPECT_NEAR(d.deltas[1].bond_prices, 0.01, 1e-15);
  EXPECT_THROW(deltas_from_responses(m, {"HP", "DJ50", "LT-IR", "LCOMP"}, 2), DomainError);
  EXPECT_THROW(deltas_from_responses(m, vars, 3), DomainError);
}

TEST(Direct, ZeroDeltasLeavePanelUnchanged) {
  const auto panel = three_households();
  const auto out = apply_direct(panel, HorizonDelta{});
  for (std::size_t i = 0; i < panel.size(); ++i) {
    EXPECT_EQ(out[i].income, panel[i].income);
    EXPECT_EQ(out[i].wealth, panel[i].wealth);
  }
}

TEST(Direct, AdjustmentTableRowByRow) {
  const auto panel = three_households();
  HorizonDelta d;
  d.house_prices = 0.10;
  d.stock_prices = -0.20;
  d.bond_prices = -5 * 0.005;
  d.wages = 0.03;
  d.unemployment = 0.4;  // employment channel is separate; must not touch anything here
  const auto out = apply_direct(panel, d);
  for (std::size_t i = 0; i < panel.size(); ++i) {
    const auto& a = panel[i];
    const auto& b = out[i];
    EXPECT_DOUBLE_EQ(b.wealth[kMainResidence], a.wealth[kMainResidence] * 1.10);
    EXPECT_DOUBLE_EQ(b.wealth[kOtherRealEstate], a.wealth[kOtherRealEstate] * 1.10);
    EXPECT_DOUBLE_EQ(b.wealth[kShares], a.wealth[kShares] * 0.80);
    EXPECT_DOUBLE_EQ(b.wealth[kBonds], a.wealth[kBonds] * 0.975);
    EXPECT_DOUBLE_EQ(b.income[kEmployment], a.income[kEmployment] * 1.03);
    EXPECT_DOUBLE_EQ(b.income[kSelfEmployment], a.income[kSelfEmployment] * 1.03);
    for (auto k : {kBusiness, kPensionInsurance, kDeposits, kOtherFinancial, kLiabilities}) EXPECT_EQ(b.wealth[k], a.wealth[k]);
    for (auto k : {kPensions, kRental, kFinancial, kBenefits}) EXPECT_EQ(b.income[k], a.income[k]);
    EXPECT_EQ(b.weight, a.weight);
    EXPECT_EQ(b.household_id, a.household_id);
  }
  EXPECT_DOUBLE_EQ(out[0].wealth[kMainResidence], 110.0);
  EXPECT_EQ(out[0].wealth[kDeposits], 70.0);
  EXPECT_DOUBLE_EQ(out[1].wealth[kBonds], 195.0);
}

TEST(Direct, ImputedIncomeIsNotRescaled) {
  auto panel = three_households();
  HorizonDelta d;
  d.wages = 0.5;
  const std::vector<double> imputed{10000, 0, 0};
  const auto out = apply_direct(panel, d, &imputed);
  EXPECT_DOUBLE_EQ(out[0].income[kEmployment], 30000 * 1.5 + 10000);
  EXPECT_DOUBLE_EQ(out[2].income[kEmployment], 70000 * 1.5);
  const std::vector<double> wrong(2, 0.0);
  EXPECT_THROW(apply_direct(panel, d, &wrong), DomainError);
}

TEST(Employment, FlipCountFromRelativeRateChange) {
  const auto f = labour_fixture();
  EXPECT_EQ(flip_count(f.persons, f.households, 0.0), 0u);
  EXPECT_EQ(flip_count(f.persons, f.households, -0.3), 3u);
  EXPECT_EQ(flip_count(f.persons, f.households, 0.3), 3u);
  EXPECT_EQ(flip_count(f.persons, f.households, 0.26), 3u);
  // weights of the unemployed relative to the mean weight
  auto heavy = f.households;
  for (auto& h : heavy) h.weight = 4.0;
  EXPECT_EQ(flip_count(f.persons, heavy, -0.3), 3u);
}

TEST(Employment, FallInUnemploymentFlipsMostLikelyEmployed) {
  const auto f = labour_fixture();
  const auto t = apply_employment_transition(f.persons, f.households, -0.3, f.model, 0.5);
  ASSERT_EQ(t.flipped.size(), 3u);
  const auto expected = ranked(f, false, true, 3);
  EXPECT_EQ(t.flipped, expected);
  std::vector<double> emp(10, 0), ben(10, 0);
  for (std::size_t i = 0; i < f.households.size(); ++i)
    emp[i] = f.households[i].income[kEmployment], ben[i] = f.households[i].income[kBenefits];
  for (auto i : expected) {
    const auto& p = t.persons[i];
    EXPECT_TRUE(p.employed);
    EXPECT_EQ(p.employment_income, f.model.imputed_income[i]);
    EXPECT_EQ(p.unemployment_benefits, 0.0);
    emp[i / 2] += f.model.imputed_income[i];
    ben[i / 2] -= f.persons[i].unemployment_benefits;
  }
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_DOUBLE_EQ(t.households[i].income[kEmployment], emp[i]);
    EXPECT_DOUBLE_EQ(t.households[i].income[kBenefits], ben[i]);
    EXPECT_DOUBLE_EQ(t.imputed[i], emp[i] - f.households[i].income[kEmployment]);
  }
  std::size_t changed = 0;
  for (std::size_t i = 0; i < f.persons.size(); ++i) changed += t.persons[i].employed != f.persons[i].employed;
  EXPECT_EQ(changed, 3u);
}

TEST(Employment, RiseInUnemploymentFlipsLeastLikelyEmployed) {
  const auto f = labour_fixture();
  const auto t = apply_employment_transition(f.persons, f.households, 0.3, f.model, 0.5);
  const auto expected = ranked(f, true, false, 3);
  EXPECT_EQ(t.flipped, expected);
  for (auto i : expected) {
    const auto& before = f.persons[i];
    const auto& after = t.persons[i];
    EXPECT_FALSE(after.employed);
    EXPECT_EQ(after.employment_income, 0.0);
    EXPECT_EQ(after.unemployment_benefits, 0.5 * before.employment_income);
    const auto& h0 = f.households[i / 2];
    const auto& h1 = t.households[i / 2];
    EXPECT_DOUBLE_EQ(h1.income[kEmployment], h0.income[kEmployment] - before.employment_income);
    EXPECT_DOUBLE_EQ(h1.income[kBenefits], h0.income[kBenefits] + 0.5 * before.employment_income);
  }
  for (double v : t.imputed) EXPECT_EQ(v, 0.0);
}

TEST(Employment, BenefitArithmetic) {
  std::vector<HouseholdRecord> panel{household("h", 1.0, {40000, 0, 0, 0, 0, 0}, {})};
  PersonRecord p;
  p.person_id = "a";
  p.household_id = "h";
  p.employed = true;
  p.employment_income = 40000;
  EmploymentModel m{{0.2}, {0.0}};
  const auto t = apply_employment_transition({p}, panel, 0.1, 1, m, 0.5);
  EXPECT_EQ(t.persons[0].unemployment_benefits, 20000.0);
  EXPECT_EQ(t.persons[0].employment_income, 0.0);
  EXPECT_EQ(t.households[0].income[kEmployment], 0.0);
  EXPECT_EQ(t.households[0].income[kBenefits], 20000.0);
}

TEST(Employment, NoChangeMeansNoFlips) {
  const auto f = labour_fixture();
  const auto t = apply_employment_transition(f.persons, f.households, 0.0, f.model, 0.5);
  EXPECT_TRUE(t.flipped.empty());
  for (std::size_t i = 0; i < f.households.size(); ++i) EXPECT_EQ(t.households[i].income, f.households[i].income);
}

TEST(Employment, ClampsToEligiblePool) {
  const auto f = labour_fixture();
  const auto t = apply_employment_transition(f.persons, f.households, -0.9, 25, f.model, 0.5);
  EXPECT_EQ(t.flipped.size(), 10u);
  ASSERT_EQ(t.warnings.size(), 1u);
  EXPECT_NE(t.warnings[0].find("25"), std::string::npos);
  EXPECT_THROW(apply_employment_transition(f.persons, f.households, 0.1, 1, f.model, 1.5), DomainError);
}

TEST(Simulation, ZeroResponsesGiveZeroTrajectories) {
  const auto f = labour_fixture();
  const auto paths = run_simulation(f.households, f.persons, f.model, shocks_from(std::vector<HorizonDelta>(12)), {});
  ASSERT_EQ(paths.size(), 2u);
  for (const auto& p : paths) {
    ASSERT_EQ(p.pct.size(), kTrackedMetrics.size());
    for (const auto& [metric, v] : p.pct) {
      ASSERT_EQ(v.size(), 12u);
      for (double x : v) EXPECT_EQ(x, 0.0) << metric;
    }
  }
}

TEST(Simulation, WealthChannelLeavesIncomeGini) {
  const auto f = labour_fixture();
  std::vector<HorizonDelta> path(6);
  for (std::size_t h = 0; h < path.size(); ++h) path[h].house_prices = 0.02 * (h + 1), path[h].stock_prices = -0.01 * h;
  auto scaled = path;
  for (auto& d : scaled) d.house_prices *= 3, d.stock_prices *= 3;
  for (const auto& shocks : {shocks_from(path), shocks_from(scaled)}) {
    const auto paths = run_simulation(f.households, f.persons, f.model, shocks, {});
    for (double x : paths[0].pct.at("gini_income")) EXPECT_EQ(x, 0.0);
    EXPECT_NE(paths[0].pct.at("gini_net_wealth")[3], 0.0);
  }
}

TEST(Simulation, HorizonsAreAnchoredToBaseline) {
  const auto f = labour_fixture();
  std::vector<HorizonDelta> path(5);
  for (std::size_t h = 0; h < path.size(); ++h) {
    path[h].house_prices = 0.01 * (h + 1);
    path[h].wages = -0.005 * h;
    path[h].unemployment = h % 2 ? 0.2 : -0.1;
  }
  SimulationConfig cfg;
  cfg.threads = 3;
  const auto paths = run_simulation(f.households, f.persons, f.model, shocks_from(path), cfg);
  SimulationConfig serial;
  const auto again = run_simulation(f.households, f.persons, f.model, shocks_from(path), serial);
  EXPECT_EQ(csv::to_string(trajectory_table(paths)), csv::to_string(trajectory_table(again)));
  // horizon 4 alone equals horizon 4 of the full run
  const auto alone = simulate_horizon(f.households, f.persons, f.model, path[3], 4, serial);
  for (std::size_t i = 0; i < alone.households.size(); ++i) {
    EXPECT_EQ(alone.households[i].income, paths[0].states[3].households[i].income);
    EXPECT_EQ(alone.households[i].wealth, paths[0].states[3].households[i].wealth);
  }
  // components outside the adjustment table never move
  for (const auto& s : paths[0].states)
    for (std::size_t i = 0; i < s.households.size(); ++i) {
      for (auto k : {kBusiness, kPensionInsurance, kDeposits, kOtherFinancial, kLiabilities})
        EXPECT_EQ(s.households[i].wealth[k], f.households[i].wealth[k]);
      for (auto k : {kPensions, kRental, kFinancial}) EXPECT_EQ(s.households[i].income[k], f.households[i].income[k]);
    }
  // flips follow the sign of the unemployment change
  for (const auto& s : paths[0].states)
    for (auto i : s.flipped) EXPECT_EQ(f.persons[i].employed, path[static_cast<std::size_t>(s.horizon - 1)].unemployment > 0);
}

TEST(Simulation, CommonWealthScalingKeepsGini) {
  Rng rng(4);
  std::vector<HouseholdRecord> panel;
  for (int i = 0; i < 300; ++i) {
    HouseholdRecord h;
    h.household_id = std::to_string(i);
    h.weight = rng.uniform(0.5, 2);
    h.income[kEmployment] = rng.exponential(1e-4);
    for (std::size_t k = 0; k < kWealthComponents; ++k) h.wealth[k] = rng.exponential(1e-5);
    panel.push_back(h);
  }
  auto scaled = panel;
  for (auto& h : scaled)
    for (auto& w : h.wealth) w *= 1.37;
  const auto a = metrics::compute_report(panel), b = metrics::compute_report(scaled);
  EXPECT_NEAR(a.gini_net_wealth, b.gini_net_wealth, 1e-12);
  EXPECT_NEAR(a.gini_wealth, b.gini_wealth, 1e-12);
  EXPECT_NEAR(a.gini_debt, b.gini_debt, 1e-12);
  EXPECT_NEAR(a.gini_bivariate, b.gini_bivariate, 1e-12);
  EXPECT_NEAR(a.gini_income, b.gini_income, 1e-12);
}

TEST(Simulation, RhoEstimatorHook) {
  const auto f = labour_fixture();
  SimulationConfig cfg;
  cfg.seed = 9;
  cfg.rho = [](const std::vector<HouseholdRecord>& p, std::uint64_t) { return 0.1 + p.front().wealth[kMainResidence] / 1e4; };
  std::vector<HorizonDelta> path(2);
  path[1].house_prices = 0.5;
  const auto paths = run_simulation(f.households, f.persons, f.model, shocks_from(path), cfg);
  EXPECT_DOUBLE_EQ(paths[0].baseline.spearman_rho, 0.2);
  EXPECT_EQ(paths[0].pct.at("spearman_rho")[0], 0.0);
  EXPECT_NEAR(paths[0].pct.at("spearman_rho")[1], 100 * 0.05 / 0.2, 1e-9);
}

TEST(Peak, SignedMaximum) {
  EXPECT_EQ(peak_response({0.1, -0.3, 0.2}), -0.3);
  EXPECT_EQ(peak_response({0.0, 0.0}), 0.0);
  EXPECT_EQ(peak_response({0.2, -0.4, 0.4}), -0.4);
  EXPECT_EQ(peak_response({0.4, -0.4}), 0.4);
  EXPECT_THROW(peak_response({}), DomainError);
}

TEST(Simulation, EmploymentModelFromEnsembles) {
  Rng rng(5);
  std::vector<PersonRecord> persons;
  std::vector<int> z;
  for (int i = 0; i < 200; ++i) {
    PersonRecord p;
    p.person_id = std::to_string(i);
    p.household_id = std::to_string(i / 2);
    p.gender = i % 3 ? "F" : "M";
    p.marital_status = "single";
    p.age = rng.uniform(20, 65);
    p.education = static_cast<int>(rng.index(4));
    p.employed = p.education + rng.normal() > 1.5;
    p.employment_income = p.employed ? 10000 + 5000 * p.education + rng.normal(0, 1000) : 0;
    z.push_back(p.employed);
    persons.push_back(p);
  }
  std::vector<PersonRecord> employed;
  std::vector<double> income;
  for (const auto& p : persons)
    if (p.employed) employed.push_back(p), income.push_back(p.employment_income);
  const auto status_enc = bart::CovariateEncoder::fit(persons, false);
  const auto income_enc = bart::CovariateEncoder::fit(employed, true);
  const bart::BartConfig quick{20, 400, 100, 1};
  const auto pbart = bart::fit_probit(status_enc.encode(persons), z, quick, 1);
  const auto reg = bart::fit_regression(income_enc.encode(employed), income, quick, 2);
  const auto m = EmploymentModel::from_ensembles(persons, status_enc, pbart, income_enc, reg);
  ASSERT_EQ(m.prob_employed.size(), persons.size());
  double hi = 0, lo = 0;
  int nhi = 0, nlo = 0;
  for (std::size_t i = 0; i < persons.size(); ++i) {
    EXPECT_GE(m.imputed_income[i], 0.0);
    if (persons[i].education == 3) hi += m.prob_employed[i], ++nhi;
    if (persons[i].education == 0) lo += m.prob_employed[i], ++nlo;
  }
  EXPECT_GT(hi / nhi, lo / nlo);
}
