#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mpd/bart/bart.hpp"
#include "mpd/bart/design.hpp"
#include "mpd/bvar/gibbs.hpp"
#include "mpd/bvar/irf.hpp"
#include "mpd/bvar/pca.hpp"
#include "mpd/copula/abscop.hpp"
#include "mpd/copula/moments.hpp"
#include "mpd/core/csv.hpp"
#include "mpd/core/hash.hpp"
#include "mpd/core/parallel.hpp"
#include "mpd/data/macro.hpp"
#include "mpd/data/micro_io.hpp"
#include "mpd/explore/regression.hpp"
#include "mpd/marginals/rwmh.hpp"
#include "mpd/marginals/selection.hpp"
#include "mpd/metrics/report.hpp"
#include "mpd/microsim/microsim.hpp"
#include "mpd/pipeline/config.hpp"
#include "mpd/pipeline/manifest.hpp"
#include "mpd/pipeline/svg.hpp"
#include "mpd/pipeline/synthetic.hpp"

namespace mpd::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

struct Context {
  RunConfig cfg;
  std::vector<std::string> countries;  // after the --country filter
  bool force = false;
  unsigned threads = 1;
  Manifest manifest;
  std::function<void(const std::string&)> log = [](const std::string& s) {
    static std::mutex m;
    std::lock_guard lock(m);
    std::cerr << s << "\n";
  };

  Context(RunConfig c, std::vector<std::string> filter = {}, bool force_ = false, unsigned threads_ = 1)
      : cfg(std::move(c)), force(force_), threads(std::max(1u, threads_)), manifest(cfg.output_root()) {
    for (const auto& f : filter)
      if (std::find(cfg.countries.begin(), cfg.countries.end(), f) == cfg.countries.end())
        throw ConfigError("country '" + f + "' is not listed under 'countries'");
    for (const auto& c2 : cfg.countries)
      if (filter.empty() || std::find(filter.begin(), filter.end(), c2) != filter.end()) countries.push_back(c2);
    json all;
    for (const char* s : {"data", "synthetic", "marginals", "dependence", "bvar", "bart", "simulation", "report"})
      all[s] = section_json(cfg, s);
    all["seed"] = cfg.seed;
    manifest.set_run_id(sha256_hex(all.dump()).substr(0, 16));
  }

  fs::path root() const { return manifest.root(); }
  fs::path data_dir() const { return cfg.synthetic.enabled ? root() / "data" : fs::path(cfg.data.dir); }
  fs::path input(const std::string& country, const std::string& file) const { return data_dir() / country / file; }
  fs::path stage_dir(const std::string& stage, const std::string& country = "") const {
    return country.empty() ? root() / stage : root() / stage / country;
  }
  std::uint64_t seed_for(const std::string& label) const { return derive_seed(cfg.seed, label); }

  std::string hash(const std::vector<std::string>& sections, const json& extra = json::object()) const {
    json j;
    for (const auto& s : sections) j[s] = section_json(cfg, s);
    j["seed"] = cfg.seed;
    j["extra"] = extra;
    return sha256_hex(j.dump());
  }

  void run(const std::string& key, const std::string& config_hash, const std::vector<fs::path>& inputs,
           const std::function<std::vector<fs::path>()>& produce) {
    {
      std::lock_guard lock(done_mutex_);
      if (!done_.insert(key).second) return;  // already handled in this invocation
    }
    const auto start = std::chrono::steady_clock::now();
    const auto outcome = run_stage(manifest, key, config_hash, inputs, force, produce);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    char buf[64];
    std::snprintf(buf, sizeof buf, " (%.1f s)", secs);
    log("[" + key + "] " + (outcome == StageOutcome::Cached ? std::string("cache hit") : "done" + std::string(buf)));
  }

 private:
  std::set<std::string> done_;
  std::mutex done_mutex_;
};

namespace detail {

inline fs::path write_json(const fs::path& path, const json& j) {
  fs::create_directories(path.parent_path());
  std::ofstream(path, std::ios::binary) << j.dump(2) << "\n";
  return path;
}

inline fs::path write_csv(const fs::path& path, const csv::Table& t) {
  fs::create_directories(path.parent_path());
  csv::write(path, t);
  return path;
}

inline void append(std::vector<fs::path>& to, const std::vector<fs::path>& from) { to.insert(to.end(), from.begin(), from.end()); }

// Incomes fitted by the positive-support families; the same households enter the copula.
struct FitSample {
  std::vector<double> income, net_wealth;
  std::size_t excluded = 0;
};

inline FitSample fit_sample(const std::vector<HouseholdRecord>& hs) {
  FitSample s;
  for (const auto& h : hs) {
    if (h.total_income() > 0) {
      s.income.push_back(h.total_income());
      s.net_wealth.push_back(h.net_wealth());
    } else {
      ++s.excluded;
    }
  }
  return s;
}

inline std::vector<HouseholdRecord> read_households(const fs::path& p) { return parse_households(csv::read(p)); }

inline marginals::MarginalPosterior read_posterior(const fs::path& draws_csv, const json& meta) {
  marginals::MarginalPosterior post;
  post.family = marginals::parse_family(meta.at("family").get<std::string>());
  post.names = marginals::parameter_names(post.family);
  post.location_offset = meta.at("location_offset").get<double>();
  post.n = meta.at("n").get<std::size_t>();
  const auto t = csv::read(draws_csv);
  const auto dim = post.names.size();
  post.draws.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(dim));
  std::vector<std::size_t> cols;
  for (const auto& n : post.names) cols.push_back(t.require(n));
  const auto ll = t.require("log_likelihood");
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (std::size_t j = 0; j < dim; ++j)
      post.draws(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = csv::parse_double(t.rows[r][cols[j]], r + 1);
    post.log_likelihood.push_back(csv::parse_double(t.rows[r][ll], r + 1));
  }
  return post;
}

inline const std::vector<marginals::FamilyTag>& candidates(const std::string& variable) {
  using marginals::FamilyTag;
  static const std::vector<FamilyTag> income{FamilyTag::SinghMaddala, FamilyTag::Dagum};
  static const std::vector<FamilyTag> wealth{FamilyTag::ShiftedLogNormal, FamilyTag::NegPosMixture};
  return variable == "income" ? income : wealth;
}

inline const std::vector<bvar::Shock>& shocks() {
  static const std::vector<bvar::Shock> s{bvar::Shock::Target, bvar::Shock::QE};
  return s;
}

inline void write_draws_binary(const fs::path& path, const bvar::VarDraws& d) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  const std::int64_t header[3] = {static_cast<std::int64_t>(d.size()), d.spec.m(), d.spec.lags};
  f.write(reinterpret_cast<const char*>(header), sizeof header);
  for (std::size_t s = 0; s < d.size(); ++s) {
    f.write(reinterpret_cast<const char*>(d.A[s].data()), static_cast<std::streamsize>(d.A[s].size() * sizeof(double)));
    f.write(reinterpret_cast<const char*>(d.sigma[s].data()),
            static_cast<std::streamsize>(d.sigma[s].size() * sizeof(double)));
  }
}

}  // namespace detail

// ---- synthetic fixture ----

inline void stage_synthetic(Context& ctx) {
  if (!ctx.cfg.synthetic.enabled) throw ConfigError("config key 'synthetic': no synthetic section configured");
  const json extra{{"countries", ctx.cfg.countries},
                   {"ordering", ctx.cfg.bvar.ordering},
                   {"files", {ctx.cfg.data.households, ctx.cfg.data.persons, ctx.cfg.data.macro}}};
  ctx.run("synthetic", ctx.hash({"synthetic"}, extra), {}, [&] { return write_synthetic(ctx.data_dir(), ctx.cfg); });
}

inline void ensure_data(Context& ctx) {
  if (ctx.cfg.synthetic.enabled) stage_synthetic(ctx);
}

// ---- marginal fits ----

inline std::vector<fs::path> marginal_outputs(const Context& ctx, const std::string& cc) {
  const auto d = ctx.stage_dir("marginals", cc);
  return {d / "marginals.json", d / "draws_income.csv", d / "draws_net_wealth.csv"};
}

inline void stage_marginals(Context& ctx) {
  ensure_data(ctx);
  parallel_for(ctx.countries.size(), ctx.threads, [&](std::size_t i) {
    const auto& cc = ctx.countries[i];
    const auto hh = ctx.input(cc, ctx.cfg.data.households);
    ctx.run("marginals/" + cc, ctx.hash({"marginals"}), {hh}, [&] {
      const auto sample = detail::fit_sample(detail::read_households(hh));
      const auto dir = ctx.stage_dir("marginals", cc);
      std::vector<fs::path> out;
      json meta{{"country", cc}, {"excluded_nonpositive_income", sample.excluded}};
      for (const std::string variable : {"income", "net_wealth"}) {
        const auto& data = variable == "income" ? sample.income : sample.net_wealth;
        std::vector<marginals::SelectionRow> rows;
        std::vector<marginals::MarginalPosterior> posts;
        for (auto tag : detail::candidates(variable)) {
          const auto label = "marginals/" + cc + "/" + variable + "/" + std::string(marginals::name(tag));
          posts.push_back(marginals::rwmh_fit(data, tag, ctx.cfg.marginal_prior, ctx.cfg.marginal_chain, ctx.seed_for(label)));
          rows.push_back({cc, tag, marginals::information_criteria(posts.back(), data)});
        }
        marginals::mark_best(rows);
        const auto best = marginals::select_by_bic(rows);
        const auto& post = *std::find_if(posts.begin(), posts.end(), [&](auto& p) { return p.family == best; });
        out.push_back(detail::write_csv(dir / ("selection_" + variable + ".csv"), marginals::selection_table(rows)));
        out.push_back(detail::write_csv(dir / ("draws_" + variable + ".csv"), marginals::draws_table(post)));
        json fits = json::object();
        for (std::size_t k = 0; k < posts.size(); ++k)
          fits[std::string(marginals::name(posts[k].family))] = {{"posterior_mean", posts[k].posterior_mean()},
                                                                 {"acceptance_rate", posts[k].acceptance_rate},
                                                                 {"bic", rows[k].ic.bic},
                                                                 {"dic", rows[k].ic.dic}};
        meta[variable] = {{"family", std::string(marginals::name(best))},
                          {"parameters", post.names},
                          {"location_offset", post.location_offset},
                          {"n", data.size()},
                          {"candidates", fits}};
      }
      out.push_back(detail::write_json(dir / "marginals.json", meta));
      return out;
    });
  });
}

inline std::pair<marginals::MarginalPosterior, marginals::MarginalPosterior> load_marginals(const Context& ctx,
                                                                                         const std::string& cc) {
  const auto dir = ctx.stage_dir("marginals", cc);
  const auto meta = json::parse(read_file(dir / "marginals.json"));
  return {detail::read_posterior(dir / "draws_income.csv", meta.at("income")),
          detail::read_posterior(dir / "draws_net_wealth.csv", meta.at("net_wealth"))};
}

// ---- dependence ----

inline void stage_dependence(Context& ctx) {
  stage_marginals(ctx);
  parallel_for(ctx.countries.size(), ctx.threads, [&](std::size_t i) {
    const auto& cc = ctx.countries[i];
    auto inputs = marginal_outputs(ctx, cc);
    inputs.push_back(ctx.input(cc, ctx.cfg.data.households));
    ctx.run("dependence/" + cc, ctx.hash({"dependence"}), inputs, [&] {
      const auto [m1, m2] = load_marginals(ctx, cc);
      const auto sample = detail::fit_sample(detail::read_households(ctx.input(cc, ctx.cfg.data.households)));
      const auto dir = ctx.stage_dir("dependence", cc);
      std::vector<fs::path> out;
      json summary{{"country", cc}, {"n", sample.income.size()}, {"draws", ctx.cfg.dependence.draws}};
      const std::pair<copula::Functional, double> targets[] = {{copula::Functional::SpearmanRho, 0.0},
                                                               {copula::Functional::UpperTail, ctx.cfg.dependence.upper},
                                                               {copula::Functional::LowerTail, ctx.cfg.dependence.lower}};
      for (const auto& [f, t] : targets) {
        const std::string name(copula::name(f));
        const auto post = copula::abscop_sample(copula::moment_for(f, t), {}, m1, m2, sample.income, sample.net_wealth,
                                                ctx.cfg.dependence.draws, ctx.seed_for("dependence/" + cc + "/" + name));
        summary[name] = copula::summary_json(post);
        out.push_back(detail::write_csv(dir / ("draws_" + name + ".csv"), copula::draws_table(post)));
      }
      out.push_back(detail::write_json(dir / "summary.json", summary));
      return out;
    });
  });
}

// ---- BVAR ----

inline fs::path reference_rate_path(const Context& ctx) {
  if (ctx.cfg.synthetic.enabled) return ctx.data_dir() / "reference_rate.csv";
  fs::path p = ctx.cfg.data.reference_rate;
  if (p.empty()) return p;
  return p.is_relative() ? ctx.data_dir() / p : p;
}

inline bool needs_pca(const Context& ctx, const std::string& cc) {
  if (ctx.cfg.bvar.spread == "pca") return true;
  if (ctx.cfg.bvar.spread == "column") return false;
  const auto t = csv::read(ctx.input(cc, ctx.cfg.data.macro));
  return std::find(t.header.begin(), t.header.end(), "EA-spread") == t.header.end();
}

// Panel in model units with the spread series filled in when it comes from the
// principal component of long-rate spreads across all configured countries.
inline MacroPanel model_panel(const Context& ctx, const std::string& cc) {
  auto panel = load_macro_panel(ctx.input(cc, ctx.cfg.data.macro), cc, ctx.cfg.data.macro_transformed);
  if (!needs_pca(ctx, cc)) {
    if (!panel.has("EA-spread")) throw SchemaError("macro panel " + cc + " lacks series 'EA-spread'");
    return panel;
  }
  const auto ref_path = reference_rate_path(ctx);
  if (ref_path.empty()) throw ConfigError("config key 'data.reference_rate': required to build the spread factor");
  const auto ref = load_macro_panel(ref_path, "reference", true);
  std::vector<std::vector<double>> rates;
  for (const auto& other : ctx.cfg.countries) {
    const auto p = other == cc ? panel : load_macro_panel(ctx.input(other, ctx.cfg.data.macro), other, ctx.cfg.data.macro_transformed);
    if (p.index.size() != ref.index.size() || p.index.front().ordinal() != ref.index.front().ordinal())
      throw ValidationError("long-rate series of " + other + " does not share the reference time index");
    rates.push_back(p.at("LT-IR"));
  }
  if (panel.index.size() != ref.index.size()) throw ValidationError("macro panel " + cc + " does not match the reference index");
  panel.series["EA-spread"] = bvar::pca_spread(rates, ref.at("LT-IR")).series;
  return panel;
}

inline std::vector<fs::path> bvar_inputs(const Context& ctx, const std::string& cc) {
  std::vector<fs::path> in{ctx.input(cc, ctx.cfg.data.macro)};
  if (needs_pca(ctx, cc)) {
    for (const auto& other : ctx.cfg.countries)
      if (other != cc) in.push_back(ctx.input(other, ctx.cfg.data.macro));
    in.push_back(reference_rate_path(ctx));
  }
  return in;
}

inline fs::path irf_path(const Context& ctx, const std::string& cc, bvar::Shock s) {
  return ctx.stage_dir("bvar", cc) / ("irf_" + bvar::shock_name(s) + ".csv");
}

inline void stage_bvar(Context& ctx) {
  ensure_data(ctx);
  parallel_for(ctx.countries.size(), ctx.threads, [&](std::size_t i) {
    const auto& cc = ctx.countries[i];
    ctx.run("bvar/" + cc, ctx.hash({"bvar"}), bvar_inputs(ctx, cc), [&] {
      const auto panel = model_panel(ctx, cc);
      const bvar::VarSpec spec{ctx.cfg.bvar.ordering, ctx.cfg.bvar.lags};
      const auto y = bvar::panel_matrix(panel, spec.variables);
      const auto draws = bvar::gibbs_fit(y, spec, ctx.cfg.bvar.prior, ctx.cfg.bvar.chain, ctx.seed_for("bvar/" + cc));
      const auto dir = ctx.stage_dir("bvar", cc);
      fs::create_directories(dir);
      std::vector<fs::path> out;
      detail::write_draws_binary(dir / "draws.bin", draws);
      out.push_back(dir / "draws.bin");
      json summary{{"country", cc},
                   {"observations", y.rows()},
                   {"retained_draws", draws.size()},
                   {"jitter_retries", draws.jitter_retries},
                   {"spread", needs_pca(ctx, cc) ? "pca" : "column"},
                   {"ordering", spec.variables}};
      for (auto shock : detail::shocks()) {
        const auto set = bvar::irf(draws, shock, ctx.cfg.bvar.horizons);
        out.push_back(detail::write_csv(irf_path(ctx, cc, shock), bvar::irf_table(set)));
        summary["explosive_" + bvar::shock_name(shock)] = set.draws.size() - set.kept();
        svg::Figure fig{cc + ": responses to a " + bvar::shock_name(shock) + " shock", "quarter", "response", {}, 3};
        for (std::size_t v = 0; v < set.variables.size(); ++v) {
          svg::Series s{"median", {}, {}, {}, {}};
          for (int h = 0; h <= set.horizons; ++h) {
            const auto r = static_cast<Eigen::Index>(v);
            s.x.push_back(h);
            s.y.push_back(set.median(r, h));
            s.lo.push_back(set.lo68(r, h));
            s.hi.push_back(set.hi68(r, h));
          }
          fig.panels.push_back({set.variables[v], {s}});
        }
        detail::append(out, svg::write_figure(dir / ("fig_irf_" + bvar::shock_name(shock)), fig));
      }
      out.push_back(detail::write_json(dir / "summary.json", summary));
      return out;
    });
  });
}

// ---- simulation ----

// Spearman's rho of a simulated panel from the copula: refit the selected
// families with a short chain and take the ABSCop posterior median.
inline microsim::RhoEstimator copula_rho(const Context& ctx, marginals::FamilyTag income_family,
                                         marginals::FamilyTag wealth_family) {
  const auto chain = ctx.cfg.simulation.rho_chain;
  const auto prior = ctx.cfg.marginal_prior;
  const auto draws = ctx.cfg.simulation.rho_draws;
  return [=](const std::vector<HouseholdRecord>& panel, std::uint64_t seed) {
    const auto s = detail::fit_sample(panel);
    const auto m1 = marginals::rwmh_fit(s.income, income_family, prior, chain, derive_seed(seed, "rho/income"));
    const auto m2 = marginals::rwmh_fit(s.net_wealth, wealth_family, prior, chain, derive_seed(seed, "rho/net_wealth"));
    return copula::abscop_sample(copula::moment_for(copula::Functional::SpearmanRho), {}, m1, m2, s.income,
                                 s.net_wealth, draws, derive_seed(seed, "rho/abscop"))
        .median;
  };
}

inline std::vector<fs::path> simulate_inputs(const Context& ctx, const std::string& cc) {
  std::vector<fs::path> in{ctx.input(cc, ctx.cfg.data.households), ctx.input(cc, ctx.cfg.data.persons)};
  for (auto s : detail::shocks()) in.push_back(irf_path(ctx, cc, s));
  if (ctx.cfg.simulation.rho == "copula") in.push_back(ctx.stage_dir("marginals", cc) / "marginals.json");
  return in;
}

inline void stage_simulate(Context& ctx) {
  if (ctx.cfg.simulation.rho == "copula") stage_marginals(ctx);
  stage_bvar(ctx);
  parallel_for(ctx.countries.size(), ctx.threads, [&](std::size_t i) {
    const auto& cc = ctx.countries[i];
    ctx.run("simulate/" + cc, ctx.hash({"bart", "simulation"}, {{"horizons", ctx.cfg.bvar.horizons}, {"ordering", ctx.cfg.bvar.ordering}}),
            simulate_inputs(ctx, cc), [&] {
      const auto micro = load_households(ctx.input(cc, ctx.cfg.data.households), ctx.input(cc, ctx.cfg.data.persons));
      const auto dir = ctx.stage_dir("simulate", cc);
      std::vector<fs::path> out;
      std::vector<std::string> warnings;

      // employment status and employment income models
      const auto status_enc = bart::CovariateEncoder::fit(micro.persons, false);
      std::vector<int> z;
      std::vector<PersonRecord> earners;
      std::vector<double> earnings;
      for (const auto& p : micro.persons) {
        z.push_back(p.employed ? 1 : 0);
        if (p.employed && p.employment_income > 0) earners.push_back(p), earnings.push_back(p.employment_income);
      }
      const auto pbart = bart::fit_probit(status_enc.encode(micro.persons), z, ctx.cfg.bart,
                                          ctx.seed_for("simulate/" + cc + "/pbart"), status_enc.names());
      const auto income_enc = bart::CovariateEncoder::fit(micro.persons, true);
      const auto income_bart = bart::fit_regression(income_enc.encode(earners), earnings, ctx.cfg.bart,
                                                    ctx.seed_for("simulate/" + cc + "/income_bart"), income_enc.names());
      const auto model = microsim::EmploymentModel::from_ensembles(micro.persons, status_enc, pbart, income_enc,
                                                                   income_bart, &warnings);
      out.push_back(detail::write_json(dir / "bart_summary.json",
                                       {{"employment_status", pbart.to_json()}, {"employment_income", income_bart.to_json()}}));

      std::map<std::string, microsim::IrfDeltas> shocks;
      for (auto s : detail::shocks()) {
        const auto median = bvar::median_from_table(csv::read(irf_path(ctx, cc, s)), ctx.cfg.bvar.ordering);
        shocks[bvar::shock_name(s)] = microsim::deltas_from_responses(median, ctx.cfg.bvar.ordering, ctx.cfg.bvar.horizons,
                                                                      ctx.cfg.simulation.bond_duration);
      }
      microsim::SimulationConfig sim;
      sim.replacement_rate = ctx.cfg.simulation.replacement_for(cc);
      sim.seed = ctx.seed_for("simulate/" + cc + "/metrics");
      if (ctx.cfg.simulation.rho == "copula") {
        const auto meta = json::parse(read_file(ctx.stage_dir("marginals", cc) / "marginals.json"));
        sim.rho = copula_rho(ctx, marginals::parse_family(meta.at("income").at("family").get<std::string>()),
                             marginals::parse_family(meta.at("net_wealth").at("family").get<std::string>()));
      }
      const auto paths = microsim::run_simulation(micro.households, micro.persons, model, shocks, sim);
      out.push_back(detail::write_csv(dir / "trajectories.csv", microsim::trajectory_table(paths)));

      csv::Table flips;
      flips.header = {"shock", "horizon", "unemployment_change", "flipped"};
      json summary{{"country", cc}, {"replacement_rate", sim.replacement_rate}, {"rho", ctx.cfg.simulation.rho}};
      svg::Figure fig{cc + ": distributional responses", "quarter", "% change from baseline", {}, 3};
      for (const char* m : microsim::kTrackedMetrics) fig.panels.push_back({m, {}});
      for (const auto& p : paths) {
        const auto& d = shocks.at(p.shock).deltas;
        for (const auto& s : p.states) {
          flips.rows.push_back({p.shock, std::to_string(s.horizon), csv::format_double(d[static_cast<std::size_t>(s.horizon - 1)].unemployment),
                                std::to_string(s.flipped.size())});
          for (const auto& w : s.warnings) warnings.push_back(p.shock + " h" + std::to_string(s.horizon) + ": " + w);
        }
        json base, peaks;
        for (std::size_t k = 0; k < microsim::kTrackedMetrics.size(); ++k) {
          const char* m = microsim::kTrackedMetrics[k];
          base[m] = microsim::metric_value(p.baseline, m);
          peaks[m] = microsim::peak_response(p.pct.at(m));
          svg::Series s{p.shock, {}, p.pct.at(m), {}, {}};
          for (std::size_t h = 1; h <= s.y.size(); ++h) s.x.push_back(static_cast<double>(h));
          fig.panels[k].series.push_back(s);
        }
        summary["baseline"] = base;
        summary["peak_pct_change"][p.shock] = peaks;
      }
      summary["warnings"] = warnings;
      out.push_back(detail::write_csv(dir / "flips.csv", flips));
      detail::append(out, svg::write_figure(dir / "fig_trajectories", fig));
      out.push_back(detail::write_json(dir / "simulation.json", summary));
      return out;
    });
  });
}

// ---- report ----

inline std::vector<fs::path> report_inputs(const Context& ctx) {
  std::vector<fs::path> in;
  for (const auto& cc : ctx.countries) {
    in.push_back(ctx.input(cc, ctx.cfg.data.households));
    in.push_back(ctx.input(cc, ctx.cfg.data.persons));
    in.push_back(ctx.stage_dir("marginals", cc) / "marginals.json");
    in.push_back(ctx.stage_dir("dependence", cc) / "summary.json");
    in.push_back(ctx.stage_dir("simulate", cc) / "trajectories.csv");
    for (const char* v : {"income", "net_wealth"}) in.push_back(ctx.stage_dir("marginals", cc) / ("selection_" + std::string(v) + ".csv"));
  }
  return in;
}

inline void stage_report(Context& ctx) {
  stage_dependence(ctx);
  stage_simulate(ctx);
  ctx.run("report", ctx.hash({"report", "dependence"}, {{"countries", ctx.countries}}), report_inputs(ctx), [&] {
    const auto dir = ctx.stage_dir("report");
    std::vector<fs::path> out;
    const metrics::TailThresholds tails{ctx.cfg.dependence.upper, ctx.cfg.dependence.lower};
    std::vector<MicroData> micro(ctx.countries.size());
    std::vector<metrics::MetricReport> initial(ctx.countries.size());
    std::vector<json> dependence(ctx.countries.size());
    parallel_for(ctx.countries.size(), ctx.threads, [&](std::size_t i) {
      const auto& cc = ctx.countries[i];
      micro[i] = load_households(ctx.input(cc, ctx.cfg.data.households), ctx.input(cc, ctx.cfg.data.persons));
      initial[i] = metrics::compute_report(micro[i].households, tails, ctx.seed_for("report/" + cc));
      dependence[i] = json::parse(read_file(ctx.stage_dir("dependence", cc) / "summary.json"));
    });
    out.push_back(detail::write_csv(dir / "metrics.csv", metrics::report_table(ctx.countries, initial)));

    csv::Table dep, selection, traj, peaks;
    dep.header = {"country", "functional", "median", "lo68", "hi68", "ess", "low_ess"};
    selection.header = {"variable", "family", "country", "DIC", "BIC", "best_DIC", "best_BIC"};
    traj.header = {"country", "shock", "metric", "horizon", "pct_change"};
    peaks.header = {"country", "shock", "metric", "peak_pct_change"};
    json report{{"countries", ctx.countries}, {"seed", ctx.cfg.seed}};
    // metric -> shock -> country -> trajectory
    std::map<std::string, std::map<std::string, std::map<std::string, std::vector<double>>>> series;
    std::map<std::string, std::vector<double>> responses;
    for (std::size_t i = 0; i < ctx.countries.size(); ++i) {
      const auto& cc = ctx.countries[i];
      for (const char* f : {"spearman_rho", "lambda_upper", "lambda_lower"}) {
        const auto& d = dependence[i].at(f);
        dep.rows.push_back({cc, f, csv::format_double(d.at("median")), csv::format_double(d.at("lo68")),
                            csv::format_double(d.at("hi68")), csv::format_double(d.at("ess")),
                            d.at("low_ess").get<bool>() ? "1" : "0"});
      }
      const auto meta = json::parse(read_file(ctx.stage_dir("marginals", cc) / "marginals.json"));
      for (const char* v : {"income", "net_wealth"}) {
        for (const auto& row : csv::read(ctx.stage_dir("marginals", cc) / ("selection_" + std::string(v) + ".csv")).rows) {
          std::vector<std::string> r{v};
          r.insert(r.end(), row.begin(), row.end());
          selection.rows.push_back(std::move(r));
        }
      }
      report["selected_families"][cc] = {{"income", meta.at("income").at("family")},
                                         {"net_wealth", meta.at("net_wealth").at("family")}};
      report["copula_spearman_rho"][cc] = dependence[i].at("spearman_rho").at("median");
      const auto t = csv::read(ctx.stage_dir("simulate", cc) / "trajectories.csv");
      const auto cs = t.require("shock"), cm = t.require("metric"), cp = t.require("pct_change");
      for (std::size_t r = 0; r < t.rows.size(); ++r) {
        std::vector<std::string> row{cc};
        row.insert(row.end(), t.rows[r].begin(), t.rows[r].end());
        traj.rows.push_back(std::move(row));
        series[t.rows[r][cm]][t.rows[r][cs]][cc].push_back(csv::parse_double(t.rows[r][cp], r + 1));
      }
    }
    for (const auto& [metric, by_shock] : series)
      for (const auto& [shock, by_country] : by_shock)
        for (std::size_t i = 0; i < ctx.countries.size(); ++i) {
          const auto& cc = ctx.countries[i];
          const double peak = microsim::peak_response(by_country.at(cc));
          peaks.rows.push_back({cc, shock, metric, csv::format_double(peak)});
          report["peak_pct_change"][cc][shock][metric] = peak;
          responses[metric + "/" + shock].push_back(peak);
        }
    out.push_back(detail::write_csv(dir / "dependence.csv", dep));
    out.push_back(detail::write_csv(dir / "selection.csv", selection));
    out.push_back(detail::write_csv(dir / "trajectories.csv", traj));
    out.push_back(detail::write_csv(dir / "peaks.csv", peaks));

    for (auto shock : detail::shocks()) {
      const auto name = bvar::shock_name(shock);
      svg::Figure fig{"Responses to a " + name + " shock", "quarter", "% change from baseline", {}, 3};
      for (const char* m : microsim::kTrackedMetrics) {
        svg::Panel p{m, {}};
        for (const auto& cc : ctx.countries) {
          svg::Series s{cc, {}, series.at(m).at(name).at(cc), {}, {}};
          for (std::size_t h = 1; h <= s.y.size(); ++h) s.x.push_back(static_cast<double>(h));
          p.series.push_back(std::move(s));
        }
        fig.panels.push_back(std::move(p));
      }
      detail::append(out, svg::write_figure(dir / ("fig_trajectories_" + name), fig));
    }

    if (ctx.countries.size() >= 3) {
      std::vector<std::map<std::string, double>> features;
      explore::FeatureOptions opt;
      opt.tertiary_level = ctx.cfg.tertiary_level;
      for (std::size_t i = 0; i < ctx.countries.size(); ++i) {
        auto init = initial[i];
        init.spearman_rho = dependence[i].at("spearman_rho").at("median").get<double>();
        features.push_back(explore::country_features(micro[i], init, opt));
      }
      std::vector<std::pair<std::string, std::vector<double>>> ys(responses.begin(), responses.end());
      const auto result = explore::regress_all(features, ys);
      out.push_back(detail::write_csv(dir / "explore_wide.csv", explore::wide_table(result)));
      out.push_back(detail::write_csv(dir / "explore_long.csv", explore::long_table(result)));
      std::vector<std::vector<double>> values(result.features.size(), std::vector<double>(result.responses.size(), NAN));
      std::vector<std::vector<std::string>> labels(result.features.size(), std::vector<std::string>(result.responses.size()));
      for (const auto& c : result.cells) {
        const auto r = static_cast<std::size_t>(std::find(result.features.begin(), result.features.end(), c.feature) - result.features.begin());
        const auto k = static_cast<std::size_t>(std::find(result.responses.begin(), result.responses.end(), c.response) - result.responses.begin());
        values[r][k] = c.fit.slope;
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", c.fit.slope);
        labels[r][k] = buf + c.fit.flag;
      }
      detail::append(out, svg::write_heatmap(dir / "fig_explore", "Standardised pairwise coefficients", result.features,
                                             result.responses, values, labels));
      report["explore"] = {{"status", "done"}, {"skipped", result.skipped}};
    } else {
      report["explore"] = {{"status", "skipped"}, {"reason", "fewer than 3 countries"}};
    }
    out.push_back(detail::write_json(dir / "report.json", report));
    return out;
  });
}

}  // namespace mpd::pipeline
