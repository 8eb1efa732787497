#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mpd/bart/bart.hpp"
#include "mpd/bvar/gibbs.hpp"
#include "mpd/core/error.hpp"
#include "mpd/core/hash.hpp"
#include "mpd/marginals/rwmh.hpp"

namespace mpd::pipeline {

// Malformed or inconsistent configuration; the message names the line or key.
struct ConfigError : Error {
  using Error::Error;
};

inline constexpr const char* kOutputRootEnv = "MPD_OUTPUT_ROOT";

struct DataConfig {
  std::string dir;  // one subdirectory per country
  std::string households = "households.csv";
  std::string persons = "persons.csv";
  std::string macro = "macro.csv";
  std::string reference_rate;  // German long rate, needed only when spreads come from PCA
  bool macro_transformed = false;
};

struct SyntheticConfig {
  bool enabled = false;
  int households = 2000;
  int quarters = 160;
  std::string start = "1985Q1";
  std::vector<std::string> income_families;  // cycled over countries
  std::vector<double> copula_r;              // cycled over countries
  double persistence = 0.6;
};

struct DependenceConfig {
  std::size_t draws = 5000;
  double upper = 0.95;
  double lower = 0.05;
};

struct BvarConfig {
  int lags = 2;
  int horizons = 12;
  std::vector<std::string> ordering = bvar::kDefaultOrdering;
  bvar::GibbsConfig chain{15000, 5000, 5};
  bvar::PriorConfig prior;
  std::string spread = "auto";  // "column", "pca" or "auto"
};

struct SimulationConfig {
  double replacement_rate = 0.5;
  std::map<std::string, double> replacement_by_country;
  double bond_duration = 5.0;
  std::string rho = "copula";  // or "plugin"
  marginals::ChainConfig rho_chain{4000, 2000, 2};
  std::size_t rho_draws = 1000;

  double replacement_for(const std::string& country) const {
    const auto it = replacement_by_country.find(country);
    return it == replacement_by_country.end() ? replacement_rate : it->second;
  }
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::vector<std::string> countries;
  std::string output_dir = "mpd_output";
  DataConfig data;
  SyntheticConfig synthetic;
  marginals::ChainConfig marginal_chain;
  marginals::PriorSpec marginal_prior;
  DependenceConfig dependence;
  BvarConfig bvar;
  bart::BartConfig bart;
  SimulationConfig simulation;
  int tertiary_level = 3;

  std::filesystem::path output_root() const {
    if (const char* env = std::getenv(kOutputRootEnv); env && *env) return env;
    return output_dir;
  }
};

namespace detail {

inline std::string line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n')
      ++line, col = 1;
    else
      ++col;
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

// Walks one JSON object, rejecting keys that are never read.
class Section {
 public:
  Section(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config key '" + display() + "': expected an object");
  }
  void finish() const {
    for (const auto& [k, _] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown config key '" + key(k) + "'");
  }

  template <class T>
  void get(const char* name, T& out) {
    seen_.insert(name);
    if (!j_.contains(name)) return;
    const auto& v = j_.at(name);
    if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      if (!v.is_number_integer() || (std::is_unsigned_v<T> && v.get<long long>() < 0))
        throw ConfigError("config key '" + key(name) + "': expected " +
                          (std::is_unsigned_v<T> ? "a non-negative integer" : "an integer"));
    }
    try {
      out = v.get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config key '" + key(name) + "': expected " + expected<T>());
    }
  }
  bool has(const char* name) const { return j_.contains(name); }
  Section child(const char* name) {
    seen_.insert(name);
    static const nlohmann::json empty = nlohmann::json::object();
    return Section(j_.contains(name) ? j_.at(name) : empty, key(name));
  }
  const nlohmann::json& raw(const char* name) {
    seen_.insert(name);
    return j_.at(name);
  }
  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

 private:
  std::string display() const { return path_.empty() ? "<root>" : path_; }
  template <class T>
  static std::string expected() {
    if constexpr (std::is_same_v<T, bool>) return "a boolean";
    else if constexpr (std::is_integral_v<T>) return "an integer";
    else if constexpr (std::is_floating_point_v<T>) return "a number";
    else if constexpr (std::is_same_v<T, std::string>) return "a string";
    else return "a list";
  }

  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError("config key '" + key + "': " + what);
}

}  // namespace detail

inline RunConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config parse error at " + detail::line_col(text, e.byte == 0 ? 0 : e.byte - 1) + ": " +
                      e.what());
  }
  RunConfig c;
  {
    detail::Section root(j, "");
    root.get("seed", c.seed);
    root.get("countries", c.countries);
    root.get("output_dir", c.output_dir);
    root.get("tertiary_level", c.tertiary_level);
    {
      auto d = root.child("data");
      d.get("dir", c.data.dir);
      d.get("households", c.data.households);
      d.get("persons", c.data.persons);
      d.get("macro", c.data.macro);
      d.get("reference_rate", c.data.reference_rate);
      d.get("macro_transformed", c.data.macro_transformed);
      d.finish();
    }
    if (root.has("synthetic")) {
      c.synthetic.enabled = true;
      auto s = root.child("synthetic");
      s.get("enabled", c.synthetic.enabled);
      s.get("households", c.synthetic.households);
      s.get("quarters", c.synthetic.quarters);
      s.get("start", c.synthetic.start);
      s.get("income_families", c.synthetic.income_families);
      s.get("copula_r", c.synthetic.copula_r);
      s.get("persistence", c.synthetic.persistence);
      s.finish();
    }
    {
      auto m = root.child("marginals");
      m.get("iterations", c.marginal_chain.iterations);
      m.get("burn_in", c.marginal_chain.burn_in);
      m.get("thin", c.marginal_chain.thin);
      m.get("ig_shape", c.marginal_prior.ig_shape);
      m.get("ig_scale", c.marginal_prior.ig_scale);
      m.get("normal_sd", c.marginal_prior.normal_sd);
      m.finish();
    }
    {
      auto d = root.child("dependence");
      d.get("draws", c.dependence.draws);
      d.get("upper", c.dependence.upper);
      d.get("lower", c.dependence.lower);
      d.finish();
    }
    {
      auto b = root.child("bvar");
      b.get("lags", c.bvar.lags);
      b.get("horizons", c.bvar.horizons);
      b.get("ordering", c.bvar.ordering);
      b.get("iterations", c.bvar.chain.iterations);
      b.get("burn_in", c.bvar.chain.burn_in);
      b.get("thin", c.bvar.chain.thin);
      b.get("iw_scale", c.bvar.prior.iw_scale);
      b.get("spread", c.bvar.spread);
      b.finish();
    }
    {
      auto b = root.child("bart");
      b.get("trees", c.bart.trees);
      b.get("iterations", c.bart.iterations);
      b.get("burn_in", c.bart.burn_in);
      b.get("thin", c.bart.thin);
      b.finish();
    }
    {
      auto s = root.child("simulation");
      if (s.has("replacement_rate")) {
        const auto& rr = s.raw("replacement_rate");
        if (rr.is_number()) {
          c.simulation.replacement_rate = rr.get<double>();
        } else if (rr.is_object()) {
          for (const auto& [k, v] : rr.items()) {
            detail::require(v.is_number(), s.key("replacement_rate." + k), "expected a number");
            if (k == "default")
              c.simulation.replacement_rate = v.get<double>();
            else
              c.simulation.replacement_by_country[k] = v.get<double>();
          }
        } else {
          throw ConfigError("config key '" + s.key("replacement_rate") + "': expected a number or an object");
        }
      }
      s.get("bond_duration", c.simulation.bond_duration);
      s.get("rho", c.simulation.rho);
      s.get("rho_iterations", c.simulation.rho_chain.iterations);
      s.get("rho_burn_in", c.simulation.rho_chain.burn_in);
      s.get("rho_thin", c.simulation.rho_chain.thin);
      s.get("rho_draws", c.simulation.rho_draws);
      s.finish();
    }
    root.finish();
  }

  using detail::require;
  require(!c.countries.empty(), "countries", "at least one country is required");
  require(c.bvar.horizons >= 1, "bvar.horizons", "must be >= 1");
  require(c.bvar.lags >= 1, "bvar.lags", "must be >= 1");
  require(c.bvar.chain.iterations > c.bvar.chain.burn_in && c.bvar.chain.burn_in >= 0 && c.bvar.chain.thin >= 1,
          "bvar.iterations", "needs iterations > burn_in >= 0 and thin >= 1");
  require(c.marginal_chain.iterations > c.marginal_chain.burn_in && c.marginal_chain.thin >= 1,
          "marginals.iterations", "needs iterations > burn_in and thin >= 1");
  require(c.dependence.upper > 0 && c.dependence.upper < 1, "dependence.upper", "must lie in (0, 1)");
  require(c.dependence.lower > 0 && c.dependence.lower < 1, "dependence.lower", "must lie in (0, 1)");
  require(c.dependence.draws >= 1000, "dependence.draws", "must be >= 1000");
  require(c.bart.trees >= 1 && c.bart.iterations > c.bart.burn_in, "bart.iterations",
          "needs trees >= 1 and iterations > burn_in");
  require(c.simulation.replacement_rate >= 0 && c.simulation.replacement_rate <= 1, "simulation.replacement_rate",
          "must lie in [0, 1]");
  for (const auto& [k, v] : c.simulation.replacement_by_country)
    require(v >= 0 && v <= 1, "simulation.replacement_rate." + k, "must lie in [0, 1]");
  require(c.simulation.rho == "copula" || c.simulation.rho == "plugin", "simulation.rho",
          "must be \"copula\" or \"plugin\"");
  require(c.simulation.rho_draws >= 1000, "simulation.rho_draws", "must be >= 1000");
  require(c.bvar.spread == "auto" || c.bvar.spread == "column" || c.bvar.spread == "pca", "bvar.spread",
          "must be \"auto\", \"column\" or \"pca\"");
  require(!c.data.dir.empty() || c.synthetic.enabled, "data.dir",
          "required unless a synthetic section is present");
  for (const char* v : {"ST-IR", "EA-spread", "HP", "DJ50", "LT-IR", "LCOMP", "UNEMP"})
    require(std::find(c.bvar.ordering.begin(), c.bvar.ordering.end(), v) != c.bvar.ordering.end(), "bvar.ordering",
            std::string("must contain ") + v);
  for (double r : c.synthetic.copula_r) require(r > -1 && r < 1, "synthetic.copula_r", "entries must lie in (-1, 1)");
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file " + path.string() + " not found");
  return parse_config(read_file(path));
}

// Normalised sections; stage cache keys hash these so edits to unrelated
// sections keep a stage cached.
inline nlohmann::json section_json(const RunConfig& c, const std::string& section) {
  using nlohmann::json;
  if (section == "data")
    return {{"dir", c.data.dir},           {"households", c.data.households}, {"persons", c.data.persons},
            {"macro", c.data.macro},       {"reference_rate", c.data.reference_rate},
            {"macro_transformed", c.data.macro_transformed}};
  if (section == "synthetic")
    return {{"enabled", c.synthetic.enabled},   {"households", c.synthetic.households},
            {"quarters", c.synthetic.quarters}, {"start", c.synthetic.start},
            {"income_families", c.synthetic.income_families}, {"copula_r", c.synthetic.copula_r},
            {"persistence", c.synthetic.persistence}};
  if (section == "marginals")
    return {{"iterations", c.marginal_chain.iterations}, {"burn_in", c.marginal_chain.burn_in},
            {"thin", c.marginal_chain.thin},             {"ig_shape", c.marginal_prior.ig_shape},
            {"ig_scale", c.marginal_prior.ig_scale},     {"normal_sd", c.marginal_prior.normal_sd}};
  if (section == "dependence")
    return {{"draws", c.dependence.draws}, {"upper", c.dependence.upper}, {"lower", c.dependence.lower}};
  if (section == "bvar")
    return {{"lags", c.bvar.lags},       {"horizons", c.bvar.horizons},       {"ordering", c.bvar.ordering},
            {"iterations", c.bvar.chain.iterations}, {"burn_in", c.bvar.chain.burn_in},
            {"thin", c.bvar.chain.thin}, {"iw_scale", c.bvar.prior.iw_scale}, {"spread", c.bvar.spread},
            {"countries", c.countries}};
  if (section == "bart")
    return {{"trees", c.bart.trees}, {"iterations", c.bart.iterations}, {"burn_in", c.bart.burn_in},
            {"thin", c.bart.thin}};
  if (section == "simulation")
    return {{"replacement_rate", c.simulation.replacement_rate},
            {"replacement_by_country", c.simulation.replacement_by_country},
            {"bond_duration", c.simulation.bond_duration},
            {"rho", c.simulation.rho},
            {"rho_iterations", c.simulation.rho_chain.iterations},
            {"rho_burn_in", c.simulation.rho_chain.burn_in},
            {"rho_thin", c.simulation.rho_chain.thin},
            {"rho_draws", c.simulation.rho_draws}};
  if (section == "report") return {{"tertiary_level", c.tertiary_level}, {"countries", c.countries}};
  throw DomainError("unknown config section " + section);
}

}  // namespace mpd::pipeline
