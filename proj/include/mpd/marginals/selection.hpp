#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mpd/core/csv.hpp"
#include "mpd/marginals/rwmh.hpp"

namespace mpd::marginals {

struct InformationCriteria {
  double bic = 0.0;
  double dic = 0.0;
};

// BIC = k ln n - 2 max_s loglik(s); DIC = Dbar + (Dbar - D(posterior mean)).
inline InformationCriteria information_criteria(const MarginalPosterior& post, std::span<const double> data) {
  const double k = static_cast<double>(post.dim());
  const double n = static_cast<double>(data.size());
  const double max_ll = *std::max_element(post.log_likelihood.begin(), post.log_likelihood.end());
  double mean_dev = 0.0;
  for (double ll : post.log_likelihood) mean_dev += -2.0 * ll;
  mean_dev /= static_cast<double>(post.log_likelihood.size());
  const auto theta_bar = post.posterior_mean();
  const double dev_at_mean = -2.0 * log_likelihood(make_family(post.family, theta_bar), data, post.location_offset);
  return {k * std::log(n) - 2.0 * max_ll, mean_dev + (mean_dev - dev_at_mean)};
}

struct SelectionRow {
  std::string country;
  FamilyTag family;
  InformationCriteria ic;
  bool best_dic = false;
  bool best_bic = false;
};

// Marks the minimum per criterion within each country.
inline void mark_best(std::vector<SelectionRow>& rows) {
  for (auto& r : rows) r.best_bic = r.best_dic = false;
  std::vector<std::string> countries;
  for (const auto& r : rows)
    if (std::find(countries.begin(), countries.end(), r.country) == countries.end()) countries.push_back(r.country);
  for (const auto& c : countries) {
    SelectionRow* bic = nullptr;
    SelectionRow* dic = nullptr;
    for (auto& r : rows) {
      if (r.country != c) continue;
      if (!bic || r.ic.bic < bic->ic.bic) bic = &r;
      if (!dic || r.ic.dic < dic->ic.dic) dic = &r;
    }
    bic->best_bic = true;
    dic->best_dic = true;
  }
}

// Returns the family with the lowest BIC among candidates fitted to the same data.
inline FamilyTag select_by_bic(const std::vector<SelectionRow>& rows) {
  return std::min_element(rows.begin(), rows.end(), [](auto& a, auto& b) { return a.ic.bic < b.ic.bic; })->family;
}

// Long-format selection table: one row per (family, country) with DIC/BIC and
// best-value markers.
inline csv::Table selection_table(const std::vector<SelectionRow>& rows) {
  csv::Table t;
  t.header = {"family", "country", "DIC", "BIC", "best_DIC", "best_BIC"};
  for (const auto& r : rows)
    t.rows.push_back({std::string(display_name(r.family)), r.country, csv::format_double(r.ic.dic),
                      csv::format_double(r.ic.bic), r.best_dic ? "1" : "0", r.best_bic ? "1" : "0"});
  return t;
}

inline csv::Table draws_table(const MarginalPosterior& post) {
  csv::Table t;
  t.header = post.names;
  t.header.push_back("log_likelihood");
  for (std::size_t s = 0; s < post.size(); ++s) {
    std::vector<std::string> row;
    for (std::size_t j = 0; j < post.dim(); ++j)
      row.push_back(csv::format_double(post.draws(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j))));
    row.push_back(csv::format_double(post.log_likelihood[s]));
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace mpd::marginals
