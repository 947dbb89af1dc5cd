// cofigel: run, validate and synthesize inputs for recommendation-aware DTN
// dissemination experiments.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cofigel/config.hpp"

namespace {

struct Common {
  std::string config;
  std::string preset;
  std::string schedulers;
  std::string seeds;
  std::string out;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--preset", c.preset, "built-in preset: sancab-like or rollernet-like");
  cmd->add_option("--config", c.config, "key=value configuration file (applied after the preset)");
  cmd->add_option("--scheduler", c.schedulers, "scheduler name(s), comma separated, or 'all'");
  cmd->add_option("--seeds", c.seeds, "seed count N (seeds 1..N) or a comma-separated list");
  cmd->add_option("--set", c.overrides, "extra key=value override, repeatable");
}

// Preset, then file, then flags.
cofigel::RunConfig load(const Common& c) {
  cofigel::RunConfig cfg;
  if (!c.preset.empty()) cofigel::apply_preset(cfg, c.preset);
  if (!c.config.empty()) cofigel::apply_config_file(cfg, c.config);
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw cofigel::ConfigError("--set: expected key=value, got '" + kv + "'");
    cofigel::set_option(cfg, cofigel::detail::trim(kv.substr(0, eq)), kv.substr(eq + 1));
  }
  if (!c.schedulers.empty()) cfg.schedulers = cofigel::parse_scheduler_list(c.schedulers);
  if (!c.seeds.empty()) cfg.seeds = cofigel::parse_seed_list(c.seeds);
  if (!c.out.empty()) cfg.out = c.out;
  return cfg;
}

int synth(const cofigel::RunConfig& cfg, const std::string& trace_out, const std::string& ratings_out) {
  const auto seed = cfg.seeds.front();
  auto rng = cofigel::make_rng(seed, cofigel::RngStream::trace);
  const auto trace = cofigel::synth_trace(cfg.synth_nodes, cfg.sim.duration, cfg.synth_mean_intercontact,
                                          cfg.synth_mean_contact_duration, rng);
  std::ofstream out(trace_out);
  if (!out) throw cofigel::Error("cannot write " + trace_out);
  cofigel::write_contact_trace(out, trace);
  if (!out) throw cofigel::Error("I/O failure writing " + trace_out);
  std::cerr << "wrote " << trace.size() << " contacts to " << trace_out << '\n';
  if (!ratings_out.empty()) {
    auto rrng = cofigel::make_rng(seed, cofigel::RngStream::ratings);
    const auto rows = cofigel::synth_ratings(cfg.synth_rating_users, cfg.synth_rating_items,
                                             cfg.synth_rating_density, cfg.synth_rating_groups, rrng);
    std::ofstream r(ratings_out);
    if (!r) throw cofigel::Error("cannot write " + ratings_out);
    cofigel::write_raw_ratings(r, rows);
    if (!r) throw cofigel::Error("I/O failure writing " + ratings_out);
    std::cerr << "wrote " << rows.size() << " ratings to " << ratings_out << '\n';
  }
  return cofigel::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trace-driven DTN simulator with collaborative-filtering-aware scheduling"};
  app.require_subcommand(1);

  Common run_opts, validate_opts, synth_opts;
  auto* run_cmd = app.add_subcommand("run", "execute every scheduler x seed run of a configuration");
  add_common(run_cmd, run_opts);
  run_cmd->add_option("--out", run_opts.out, "output directory");

  auto* validate_cmd = app.add_subcommand("validate", "check a configuration and list diagnostics");
  add_common(validate_cmd, validate_opts);

  std::string trace_out, ratings_out;
  auto* synth_cmd = app.add_subcommand("synth", "emit a synthetic contact trace (and optionally ratings)");
  add_common(synth_cmd, synth_opts);
  synth_cmd->add_option("--out", trace_out, "contact trace file to write")->required();
  synth_cmd->add_option("--ratings-out", ratings_out, "MovieLens-format ratings file to write");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? cofigel::kExitOk : cofigel::kExitConfig;
  }

  try {
    if (*run_cmd) return cofigel::run_experiment(load(run_opts));
    if (*validate_cmd) {
      const auto diagnostics = cofigel::validate_config(load(validate_opts));
      for (const auto& d : diagnostics) std::cout << d << '\n';
      if (diagnostics.empty()) std::cout << "ok\n";
      return diagnostics.empty() ? cofigel::kExitOk : cofigel::kExitConfig;
    }
    if (*synth_cmd) {
      const auto cfg = load(synth_opts);
      if (auto d = cofigel::validate_config(cfg); !d.empty()) {
        for (const auto& msg : d) std::cerr << "config error: " << msg << '\n';
        return cofigel::kExitConfig;
      }
      return synth(cfg, trace_out, ratings_out);
    }
  } catch (const cofigel::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return cofigel::kExitConfig;
  } catch (const cofigel::ParseError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return cofigel::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cofigel::kExitRuntime;
  }
  return cofigel::kExitOk;
}
