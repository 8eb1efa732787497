#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mpd/core/csv.hpp"
#include "mpd/core/error.hpp"
#include "mpd/data/records.hpp"

namespace mpd {

// Maps logical field names to CSV column names. Fields absent from the map use
// their logical name as column name.
struct ColumnMap {
  std::map<std::string, std::string> columns;

  std::string operator()(const std::string& logical) const {
    auto it = columns.find(logical);
    return it == columns.end() ? logical : it->second;
  }
};

struct MicroSchema {
  ColumnMap household;
  ColumnMap person;
};

namespace detail {

inline double non_negative(double v, const char* field, std::size_t row) {
  if (v < 0.0) throw ValidationError(std::string(field) + " must be >= 0 (row " + std::to_string(row) + ")");
  return v;
}

inline bool parse_bool(const std::string& cell, std::size_t row) {
  if (cell == "1" || cell == "true" || cell == "TRUE") return true;
  if (cell == "0" || cell == "false" || cell == "FALSE") return false;
  throw ParseError("expected boolean, got '" + cell + "'", row);
}

}  // namespace detail

inline std::vector<HouseholdRecord> parse_households(const csv::Table& t, const ColumnMap& map = {}) {
  const auto id = t.require(map("household_id"));
  const auto weight = t.require(map("weight"));
  std::array<std::size_t, kIncomeComponents> inc{};
  std::array<std::size_t, kWealthComponents> wl{};
  for (std::size_t k = 0; k < kIncomeComponents; ++k) inc[k] = t.require(map(kIncomeNames[k]));
  for (std::size_t k = 0; k < kWealthComponents; ++k) wl[k] = t.require(map(kWealthNames[k]));

  std::vector<HouseholdRecord> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::size_t line = r + 1;
    HouseholdRecord h;
    h.household_id = row[id];
    h.weight = detail::non_negative(csv::parse_double(row[weight], line), "weight", line);
    for (std::size_t k = 0; k < kIncomeComponents; ++k) h.income[k] = csv::parse_double(row[inc[k]], line);
    for (std::size_t k = 0; k < kWealthComponents; ++k) h.wealth[k] = csv::parse_double(row[wl[k]], line);
    out.push_back(std::move(h));
  }
  return out;
}

inline std::vector<PersonRecord> parse_persons(const csv::Table& t, const ColumnMap& map = {}) {
  const auto pid = t.require(map("person_id"));
  const auto hid = t.require(map("household_id"));
  const auto employed = t.require(map("employed"));
  const auto gender = t.require(map("gender"));
  const auto education = t.require(map("education"));
  const auto age = t.require(map("age"));
  const auto marital = t.require(map("marital_status"));
  const auto children = t.require(map("n_children"));
  const auto tenure = t.require(map("tenure_years"));
  const auto emp_inc = t.require(map("employment_income"));
  const auto benefits = t.require(map("unemployment_benefits"));

  std::vector<PersonRecord> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::size_t line = r + 1;
    PersonRecord p;
    p.person_id = row[pid];
    p.household_id = row[hid];
    p.employed = detail::parse_bool(row[employed], line);
    p.gender = row[gender];
    p.education = static_cast<int>(csv::parse_double(row[education], line));
    p.age = detail::non_negative(csv::parse_double(row[age], line), "age", line);
    p.marital_status = row[marital];
    p.n_children = detail::non_negative(csv::parse_double(row[children], line), "n_children", line);
    p.tenure_years = detail::non_negative(csv::parse_double(row[tenure], line), "tenure_years", line);
    p.employment_income =
        detail::non_negative(csv::parse_double(row[emp_inc], line), "employment_income", line);
    p.unemployment_benefits = csv::parse_double(row[benefits], line);
    out.push_back(std::move(p));
  }
  return out;
}

inline MicroData load_households(const std::filesystem::path& household_csv,
                                 const std::filesystem::path& person_csv, const MicroSchema& schema = {}) {
  MicroData d;
  d.households = parse_households(csv::read(household_csv), schema.household);
  if (!person_csv.empty()) d.persons = parse_persons(csv::read(person_csv), schema.person);
  for (std::size_t i = 0; i < d.households.size(); ++i)
    if (d.households[i].negative_income()) d.negative_income_households.push_back(i);
  return d;
}

inline csv::Table households_table(const std::vector<HouseholdRecord>& hs) {
  csv::Table t;
  t.header = {"household_id", "weight"};
  for (auto n : kIncomeNames) t.header.emplace_back(n);
  for (auto n : kWealthNames) t.header.emplace_back(n);
  for (const auto& h : hs) {
    std::vector<std::string> row{h.household_id, csv::format_double(h.weight)};
    for (double v : h.income) row.push_back(csv::format_double(v));
    for (double v : h.wealth) row.push_back(csv::format_double(v));
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline csv::Table persons_table(const std::vector<PersonRecord>& ps) {
  csv::Table t;
  t.header = {"person_id", "household_id", "employed", "gender", "education", "age", "marital_status",
              "n_children", "tenure_years", "employment_income", "unemployment_benefits"};
  for (const auto& p : ps)
    t.rows.push_back({p.person_id, p.household_id, p.employed ? "1" : "0", p.gender,
                      std::to_string(p.education), csv::format_double(p.age), p.marital_status,
                      csv::format_double(p.n_children), csv::format_double(p.tenure_years),
                      csv::format_double(p.employment_income), csv::format_double(p.unemployment_benefits)});
  return t;
}

inline void write_households(const std::filesystem::path& path, const std::vector<HouseholdRecord>& hs) {
  csv::write(path, households_table(hs));
}

inline void write_persons(const std::filesystem::path& path, const std::vector<PersonRecord>& ps) {
  csv::write(path, persons_table(ps));
}

}  // namespace mpd
