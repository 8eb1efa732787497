#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mpd/core/csv.hpp"
#include "mpd/core/error.hpp"

namespace mpd {

struct Quarter {
  int year = 0;
  int q = 1;  // 1..4

  int ordinal() const { return year * 4 + (q - 1); }
  static Quarter from_ordinal(int o) { return {o / 4, o % 4 + 1}; }
  std::string str() const { return std::to_string(year) + "Q" + std::to_string(q); }
  friend bool operator==(const Quarter&, const Quarter&) = default;
};

// Accepts "2001Q3", "2001-Q3" and "2001q3".
inline Quarter parse_quarter(std::string_view s, std::size_t row) {
  const auto pos = s.find_first_of("Qq");
  if (pos == std::string_view::npos || pos + 2 != s.size()) throw ParseError("bad quarter '" + std::string(s) + "'", row);
  auto year_part = s.substr(0, pos);
  if (!year_part.empty() && year_part.back() == '-') year_part.remove_suffix(1);
  Quarter out;
  out.year = static_cast<int>(csv::parse_double(year_part, row));
  out.q = s[pos + 1] - '0';
  if (out.q < 1 || out.q > 4) throw ParseError("bad quarter '" + std::string(s) + "'", row);
  return out;
}

inline constexpr std::array<std::string_view, 9> kMacroSeries = {
    "DJ50", "HP", "LCOMP", "LT-IR", "UNEMP", "EA-spread", "GDP", "HICP", "ST-IR"};

// Series that enter in 100*log(x); rates enter untransformed.
inline bool is_log_series(std::string_view name) {
  return name == "DJ50" || name == "HP" || name == "LCOMP" || name == "UNEMP" || name == "GDP" || name == "HICP";
}

inline bool is_known_series(std::string_view name) {
  for (auto s : kMacroSeries)
    if (s == name) return true;
  return false;
}

struct MacroPanel {
  std::string country;
  std::vector<Quarter> index;
  std::map<std::string, std::vector<double>> series;
  std::map<std::string, bool> log_transformed;

  std::size_t length() const { return index.size(); }
  bool has(const std::string& name) const { return series.count(name) > 0; }
  const std::vector<double>& at(const std::string& name) const {
    auto it = series.find(name);
    if (it == series.end()) throw SchemaError("macro panel " + country + " lacks series '" + name + "'");
    return it->second;
  }
};

// Throws ValidationError listing every quarter missing between the first and last date.
inline void check_contiguous(const std::vector<Quarter>& index) {
  std::string missing;
  for (std::size_t i = 1; i < index.size(); ++i) {
    const int prev = index[i - 1].ordinal(), cur = index[i].ordinal();
    if (cur <= prev) throw ValidationError("time index not strictly increasing at " + index[i].str());
    for (int o = prev + 1; o < cur; ++o) missing += (missing.empty() ? "" : ", ") + Quarter::from_ordinal(o).str();
  }
  if (!missing.empty()) throw ValidationError("gap in time index; missing quarters: " + missing);
}

// Applies 100*log(x) to level series that have not been transformed yet.
inline void apply_transforms(MacroPanel& panel) {
  for (auto& [name, values] : panel.series) {
    if (!is_log_series(name) || panel.log_transformed[name]) continue;
    for (double& v : values) {
      if (std::isnan(v)) continue;
      if (v <= 0.0) throw DomainError("series " + name + " must be positive before 100*log transform");
      v = 100.0 * std::log(v);
    }
    panel.log_transformed[name] = true;
  }
}

// Trims leading/trailing rows with any missing value and rejects interior gaps.
inline void trim_to_common_range(MacroPanel& panel) {
  const std::size_t n = panel.index.size();
  auto complete = [&](std::size_t t) {
    for (const auto& [_, v] : panel.series)
      if (std::isnan(v[t])) return false;
    return true;
  };
  std::size_t first = 0, last = n;
  while (first < n && !complete(first)) ++first;
  while (last > first && !complete(last - 1)) --last;
  for (std::size_t t = first; t < last; ++t)
    if (!complete(t)) throw ValidationError("missing interior value at " + panel.index[t].str());
  panel.index = std::vector<Quarter>(panel.index.begin() + first, panel.index.begin() + last);
  for (auto& [_, v] : panel.series) v = std::vector<double>(v.begin() + first, v.begin() + last);
}

inline MacroPanel parse_macro_panel(const csv::Table& t, std::string country, bool already_transformed = false) {
  const auto date = t.require("date");
  MacroPanel p;
  p.country = std::move(country);
  std::vector<std::pair<std::string, std::size_t>> cols;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (c == date) continue;
    if (!is_known_series(t.header[c])) throw SchemaError("unrecognized macro series '" + t.header[c] + "'");
    cols.emplace_back(t.header[c], c);
  }
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    p.index.push_back(parse_quarter(t.rows[r][date], r + 1));
    for (const auto& [name, c] : cols) {
      const auto& cell = t.rows[r][c];
      p.series[name].push_back(cell.empty() || cell == "NA" ? std::numeric_limits<double>::quiet_NaN()
                                                            : csv::parse_double(cell, r + 1));
    }
  }
  for (const auto& [name, _] : cols) p.log_transformed[name] = already_transformed && is_log_series(name);
  check_contiguous(p.index);
  trim_to_common_range(p);
  apply_transforms(p);
  return p;
}

inline MacroPanel load_macro_panel(const std::filesystem::path& path, std::string country,
                                   bool already_transformed = false) {
  return parse_macro_panel(csv::read(path), std::move(country), already_transformed);
}

}  // namespace mpd
