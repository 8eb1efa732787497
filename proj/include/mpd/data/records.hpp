#pragma once

#include <array>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

namespace mpd {

inline constexpr std::size_t kIncomeComponents = 6;
inline constexpr std::size_t kWealthComponents = 9;

// Income component positions.
enum Income : std::size_t {
  kEmployment = 0,
  kSelfEmployment,
  kPensions,
  kRental,
  kFinancial,
  kBenefits,
};

// Wealth component positions; the last one is a liability.
enum Wealth : std::size_t {
  kMainResidence = 0,
  kOtherRealEstate,
  kBusiness,
  kShares,
  kBonds,
  kPensionInsurance,
  kDeposits,
  kOtherFinancial,
  kLiabilities,
};

inline constexpr std::array<const char*, kIncomeComponents> kIncomeNames = {
    "inc_employment", "inc_self_employment", "inc_pensions", "inc_rental", "inc_financial", "inc_benefits"};

inline constexpr std::array<const char*, kWealthComponents> kWealthNames = {
    "w_main_residence", "w_other_real_estate", "w_business",  "w_shares",     "w_bonds",
    "w_pension_insurance", "w_deposits",       "w_other_financial", "w_liabilities"};

struct PersonRecord {
  std::string person_id;
  std::string household_id;
  bool employed = false;
  std::string gender;
  int education = 0;  // ordered level
  double age = 0.0;
  std::string marital_status;
  double n_children = 0.0;
  double tenure_years = 0.0;
  double employment_income = 0.0;
  double unemployment_benefits = 0.0;
};

struct HouseholdRecord {
  std::string household_id;
  double weight = 1.0;
  std::array<double, kIncomeComponents> income{};
  std::array<double, kWealthComponents> wealth{};

  double total_income() const { return std::accumulate(income.begin(), income.end(), 0.0); }
  double assets() const { return std::accumulate(wealth.begin(), wealth.end() - 1, 0.0); }
  double debt() const { return wealth[kLiabilities]; }
  double net_wealth() const { return assets() - debt(); }
  bool negative_income() const { return total_income() < 0.0; }
};

struct MicroData {
  std::vector<HouseholdRecord> households;
  std::vector<PersonRecord> persons;
  // Indices of households whose total income is negative. They stay in the panel
  // for metrics and simulation but are excluded from marginal fitting.
  std::vector<std::size_t> negative_income_households;
};

}  // namespace mpd
