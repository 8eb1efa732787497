#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mpd/core/error.hpp"
#include "mpd/core/random.hpp"
#include "mpd/core/stats.hpp"

namespace mpd::marginals {

enum class FamilyTag { SinghMaddala, Dagum, ShiftedLogNormal, NegPosMixture };

inline std::string_view name(FamilyTag t) {
  switch (t) {
    case FamilyTag::SinghMaddala: return "singh_maddala";
    case FamilyTag::Dagum: return "dagum";
    case FamilyTag::ShiftedLogNormal: return "shifted_lognormal";
    case FamilyTag::NegPosMixture: return "negpos_mixture";
  }
  return "?";
}

inline std::string_view display_name(FamilyTag t) {
  switch (t) {
    case FamilyTag::SinghMaddala: return "Singh Maddala";
    case FamilyTag::Dagum: return "Dagum";
    case FamilyTag::ShiftedLogNormal: return "Log Normal 3";
    case FamilyTag::NegPosMixture: return "Dagum 3";
  }
  return "?";
}

inline FamilyTag parse_family(std::string_view s) {
  for (auto t : {FamilyTag::SinghMaddala, FamilyTag::Dagum, FamilyTag::ShiftedLogNormal, FamilyTag::NegPosMixture})
    if (name(t) == s) return t;
  throw DomainError("unknown marginal family '" + std::string(s) + "'");
}

namespace detail {
inline void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw DomainError(std::string(what) + " must be a positive finite value");
}
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}  // namespace detail

// F(x) = 1 - [1 + (x/b)^a]^{-q}, x > 0.
struct SinghMaddala {
  double a, b, q;

  static constexpr FamilyTag tag = FamilyTag::SinghMaddala;
  static constexpr std::array<const char*, 3> param_names = {"a", "b", "q"};

  SinghMaddala(double a, double b, double q) : a(a), b(b), q(q) {
    detail::require_positive(a, "a");
    detail::require_positive(b, "b");
    detail::require_positive(q, "q");
  }
  static SinghMaddala from(std::span<const double> p) { return {p[0], p[1], p[2]}; }
  std::vector<double> params() const { return {a, b, q}; }

  double cdf(double x) const {
    if (x <= 0.0) return 0.0;
    return -std::expm1(-q * std::log1p(std::pow(x / b, a)));
  }
  double log_pdf(double x) const {
    if (x <= 0.0) return detail::kNegInf;
    const double lz = a * (std::log(x) - std::log(b));
    return std::log(a) + std::log(q) + (a - 1.0) * std::log(x) - a * std::log(b) -
           (q + 1.0) * softplus(lz);
  }
  double quantile(double u) const { return b * std::pow(std::expm1(-std::log1p(-u) / q), 1.0 / a); }
};

// F(x) = [1 + (x/c)^{-d}]^{-p}, x > 0.
struct Dagum {
  double c, d, p;

  static constexpr FamilyTag tag = FamilyTag::Dagum;
  static constexpr std::array<const char*, 3> param_names = {"c", "d", "p"};

  Dagum(double c, double d, double p) : c(c), d(d), p(p) {
    detail::require_positive(c, "c");
    detail::require_positive(d, "d");
    detail::require_positive(p, "p");
  }
  static Dagum from(std::span<const double> v) { return {v[0], v[1], v[2]}; }
  std::vector<double> params() const { return {c, d, p}; }

  double cdf(double x) const {
    if (x <= 0.0) return 0.0;
    return std::exp(-p * std::log1p(std::pow(x / c, -d)));
  }
  double log_pdf(double x) const {
    if (x <= 0.0) return detail::kNegInf;
    const double lx = std::log(x), lc = std::log(c);
    return std::log(d) + std::log(p) + (d * p - 1.0) * lx - d * p * lc -
           (p + 1.0) * softplus(d * (lx - lc));
  }
  double quantile(double u) const { return c * std::pow(std::expm1(-std::log(u) / p), -1.0 / d); }
};

// F(x) = Phi((ln(x - gamma) - mu) / sigma), x > gamma >= 0.
struct ShiftedLogNormal {
  double mu, sigma, gamma;

  static constexpr FamilyTag tag = FamilyTag::ShiftedLogNormal;
  static constexpr std::array<const char*, 3> param_names = {"mu", "sigma", "gamma"};

  ShiftedLogNormal(double mu, double sigma, double gamma) : mu(mu), sigma(sigma), gamma(gamma) {
    if (!std::isfinite(mu)) throw DomainError("mu must be finite");
    detail::require_positive(sigma, "sigma");
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw DomainError("gamma must be >= 0");
  }
  static ShiftedLogNormal from(std::span<const double> v) { return {v[0], v[1], v[2]}; }
  std::vector<double> params() const { return {mu, sigma, gamma}; }

  double cdf(double x) const {
    if (x <= gamma) return 0.0;
    return normal_cdf((std::log(x - gamma) - mu) / sigma);
  }
  double log_pdf(double x) const {
    if (x <= gamma) return detail::kNegInf;
    const double y = std::log(x - gamma);
    return -y - std::log(sigma) + normal_log_pdf((y - mu) / sigma);
  }
  double quantile(double u) const { return gamma + std::exp(mu + sigma * normal_quantile(u)); }
};

// Three-part net-wealth model: reflected Weibull(l, k) below zero with mass w_neg,
// an atom of mass w_zero at zero, and Dagum(c, d, p) above zero with the remaining mass.
struct NegPosMixture {
  double w_neg, w_zero, l, k, c, d, p;

  static constexpr FamilyTag tag = FamilyTag::NegPosMixture;
  static constexpr std::array<const char*, 7> param_names = {"w_neg", "w_zero", "l", "k", "c", "d", "p"};

  NegPosMixture(double w_neg, double w_zero, double l, double k, double c, double d, double p)
      : w_neg(w_neg), w_zero(w_zero), l(l), k(k), c(c), d(d), p(p) {
    if (!(w_neg >= 0.0) || !(w_zero >= 0.0) || !(w_neg + w_zero < 1.0))
      throw DomainError("mixture weights need w_neg, w_zero >= 0 and w_neg + w_zero < 1");
    detail::require_positive(l, "l");
    detail::require_positive(k, "k");
    Dagum(c, d, p);
  }
  static NegPosMixture from(std::span<const double> v) { return {v[0], v[1], v[2], v[3], v[4], v[5], v[6]}; }
  std::vector<double> params() const { return {w_neg, w_zero, l, k, c, d, p}; }

  double kappa() const { return w_neg + w_zero; }
  double atom_mass() const { return w_zero; }
  Dagum positive_part() const { return {c, d, p}; }

  double cdf(double x) const {
    if (x < 0.0) return w_neg * std::exp(-std::pow(-x / l, k));
    if (x == 0.0) return kappa();
    return kappa() + (1.0 - kappa()) * positive_part().cdf(x);
  }
  // Density of the continuous parts; the atom has no density (see atom_mass()).
  double log_pdf(double x) const {
    if (x == 0.0) throw DomainError("mixture density undefined at the atom x = 0");
    if (x < 0.0) {
      if (w_neg == 0.0) return detail::kNegInf;
      const double z = -x / l;
      return std::log(w_neg) + std::log(k / l) + (k - 1.0) * std::log(z) - std::pow(z, k);
    }
    return std::log1p(-kappa()) + positive_part().log_pdf(x);
  }
  // Log of the likelihood contribution: density off the atom, probability mass on it.
  double log_lik_point(double x) const {
    if (x == 0.0) return w_zero > 0.0 ? std::log(w_zero) : detail::kNegInf;
    return log_pdf(x);
  }
  double quantile(double u) const {
    if (u < w_neg) return -l * std::pow(-std::log(u / w_neg), 1.0 / k);
    if (u <= kappa()) return 0.0;
    return positive_part().quantile((u - kappa()) / (1.0 - kappa()));
  }
};

using Family = std::variant<SinghMaddala, Dagum, ShiftedLogNormal, NegPosMixture>;

inline FamilyTag tag_of(const Family& f) {
  return std::visit([](const auto& m) { return std::decay_t<decltype(m)>::tag; }, f);
}

inline Family make_family(FamilyTag tag, std::span<const double> p) {
  switch (tag) {
    case FamilyTag::SinghMaddala: return SinghMaddala::from(p);
    case FamilyTag::Dagum: return Dagum::from(p);
    case FamilyTag::ShiftedLogNormal: return ShiftedLogNormal::from(p);
    case FamilyTag::NegPosMixture: return NegPosMixture::from(p);
  }
  throw DomainError("unknown family tag");
}

inline std::size_t dimension(FamilyTag tag) { return tag == FamilyTag::NegPosMixture ? 7 : 3; }

inline std::vector<std::string> parameter_names(FamilyTag tag) {
  auto names = [](const auto& arr) { return std::vector<std::string>(arr.begin(), arr.end()); };
  switch (tag) {
    case FamilyTag::SinghMaddala: return names(SinghMaddala::param_names);
    case FamilyTag::Dagum: return names(Dagum::param_names);
    case FamilyTag::ShiftedLogNormal: return names(ShiftedLogNormal::param_names);
    case FamilyTag::NegPosMixture: return names(NegPosMixture::param_names);
  }
  return {};
}

inline double cdf(const Family& f, double x) {
  return std::visit([x](const auto& m) { return m.cdf(x); }, f);
}
inline double log_pdf(const Family& f, double x) {
  return std::visit([x](const auto& m) { return m.log_pdf(x); }, f);
}
inline double quantile(const Family& f, double u) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("quantile level must lie in (0,1)");
  return std::visit([u](const auto& m) { return m.quantile(u); }, f);
}
// Log-likelihood contribution of one observation (mass at the mixture atom).
inline double log_lik_point(const Family& f, double x) {
  if (const auto* mix = std::get_if<NegPosMixture>(&f)) return mix->log_lik_point(x);
  return log_pdf(f, x);
}
inline double sample(const Family& f, Rng& rng) { return quantile(f, rng.uniform()); }

}  // namespace mpd::marginals
