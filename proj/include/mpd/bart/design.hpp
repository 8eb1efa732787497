#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mpd/core/error.hpp"
#include "mpd/data/records.hpp"

namespace mpd::bart {

// Person covariates: one-hot gender and marital status, ordered education, age,
// number of children and (optionally) job tenure.
class CovariateEncoder {
 public:
  static CovariateEncoder fit(const std::vector<PersonRecord>& persons, bool with_tenure) {
    if (persons.empty()) throw DomainError("covariate encoder needs at least one person");
    CovariateEncoder e;
    e.with_tenure_ = with_tenure;
    e.gender_ = levels(persons, &PersonRecord::gender, e.gender_mode_);
    e.marital_ = levels(persons, &PersonRecord::marital_status, e.marital_mode_);
    return e;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& g : gender_) out.push_back("gender=" + g);
    out.emplace_back("education");
    out.emplace_back("age");
    for (const auto& m : marital_) out.push_back("marital_status=" + m);
    out.emplace_back("n_children");
    if (with_tenure_) out.emplace_back("tenure_years");
    return out;
  }

  // Unseen categorical levels fall back to the most frequent training level; each
  // substitution is reported through `warnings`.
  Eigen::MatrixXd encode(const std::vector<PersonRecord>& persons, std::vector<std::string>* warnings = nullptr) const {
    const auto cols = static_cast<Eigen::Index>(names().size());
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(persons.size()), cols);
    for (std::size_t r = 0; r < persons.size(); ++r) {
      const auto& p = persons[r];
      const auto i = static_cast<Eigen::Index>(r);
      Eigen::Index c = 0;
      x(i, c + position(gender_, p.gender, gender_mode_, "gender", p.person_id, warnings)) = 1.0;
      c += static_cast<Eigen::Index>(gender_.size());
      x(i, c++) = p.education;
      x(i, c++) = p.age;
      x(i, c + position(marital_, p.marital_status, marital_mode_, "marital_status", p.person_id, warnings)) = 1.0;
      c += static_cast<Eigen::Index>(marital_.size());
      x(i, c++) = p.n_children;
      if (with_tenure_) x(i, c++) = p.tenure_years;
    }
    return x;
  }

 private:
  static std::vector<std::string> levels(const std::vector<PersonRecord>& persons, std::string PersonRecord::*field,
                                         std::string& mode) {
    std::map<std::string, std::size_t> counts;
    for (const auto& p : persons) ++counts[p.*field];
    std::vector<std::string> out;
    std::size_t best = 0;
    for (const auto& [level, n] : counts) {
      out.push_back(level);
      if (n > best) best = n, mode = level;
    }
    return out;
  }

  static Eigen::Index position(const std::vector<std::string>& lv, const std::string& value, const std::string& mode,
                               const char* field, const std::string& id, std::vector<std::string>* warnings) {
    auto it = std::find(lv.begin(), lv.end(), value);
    if (it == lv.end()) {
      if (warnings)
        warnings->push_back("person " + id + ": unseen " + field + " level '" + value + "' mapped to '" + mode + "'");
      it = std::find(lv.begin(), lv.end(), mode);
    }
    return static_cast<Eigen::Index>(it - lv.begin());
  }

  bool with_tenure_ = true;
  std::vector<std::string> gender_, marital_;
  std::string gender_mode_, marital_mode_;
};

}  // namespace mpd::bart
