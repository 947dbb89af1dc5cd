#pragma once

// Run configuration: documented key=value files, two built-in presets and the
// experiment driver (schedulers x seeds).

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cofigel/metrics.hpp"
#include "cofigel/scheduler.hpp"
#include "cofigel/simulator.hpp"
#include "cofigel/trace_io.hpp"

namespace cofigel {

struct RunConfig {
  SimConfig sim;

  std::string trace;  // empty: synthesize one per seed
  std::size_t synth_nodes = 100;
  Seconds synth_mean_intercontact = 10000.0;
  Seconds synth_mean_contact_duration = 73.0;

  std::string ratings;  // empty: synthesize MovieLens-shaped ratings per seed
  std::size_t synth_rating_users = 943;
  std::size_t synth_rating_items = 1682;
  double synth_rating_density = 0.063;
  std::size_t synth_rating_groups = 8;
  int rating_threshold = 4;

  std::size_t reduce_users = 500;
  std::size_t reduce_items = 900;

  std::vector<SchedulerKind> schedulers{SchedulerKind::cofigel};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::string out = "out";
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// "<number><unit>" with the unit looked up in `units`; a bare number uses
// scale 1.
inline double with_unit(const std::string& key, const std::string& text, const std::map<std::string, double>& units) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(text, &pos);
  } catch (const std::exception&) {
    throw ConfigError(key + ": '" + text + "' is not a number");
  }
  const auto unit = trim(text.substr(pos));
  if (unit.empty()) return v;
  auto it = units.find(unit);
  if (it == units.end()) throw ConfigError(key + ": unknown unit '" + unit + "'");
  return v * it->second;
}

inline Seconds parse_duration(const std::string& key, const std::string& v) {
  return with_unit(key, v, {{"s", 1}, {"min", 60}, {"h", 3600}});
}

inline double parse_bytes(const std::string& key, const std::string& v) {
  return with_unit(key, v, {{"B", 1}, {"KB", 1e3}, {"MB", 1e6}, {"GB", 1e9}});
}

// Bytes per second; bit rates are converted.
inline double parse_bandwidth(const std::string& key, const std::string& v) {
  return with_unit(key, v,
                   {{"B/s", 1}, {"KB/s", 1e3}, {"MB/s", 1e6}, {"bps", 1.0 / 8}, {"Kbps", 1e3 / 8}, {"Mbps", 1e6 / 8},
                    {"Gbps", 1e9 / 8}});
}

inline std::size_t parse_count(const std::string& key, const std::string& v) {
  const double d = with_unit(key, v, {});
  if (d < 0 || d != std::floor(d)) throw ConfigError(key + ": expected a nonnegative integer, got '" + v + "'");
  return static_cast<std::size_t>(d);
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace detail

inline std::vector<SchedulerKind> parse_scheduler_list(const std::string& v) {
  std::vector<SchedulerKind> out;
  for (const auto& name : detail::split_list(v)) {
    if (name == "all") {
      out.assign(std::begin(kAllSchedulers), std::end(kAllSchedulers));
      continue;
    }
    auto k = parse_scheduler(name);
    if (!k) throw ConfigError("schedulers: unknown scheduler '" + name + "'");
    out.push_back(*k);
  }
  if (out.empty()) throw ConfigError("schedulers: empty list");
  return out;
}

// "N" means seeds 1..N; "a,b,c" is an explicit list.
inline std::vector<std::uint64_t> parse_seed_list(const std::string& v) {
  const auto parts = detail::split_list(v);
  if (parts.empty()) throw ConfigError("seeds: empty list");
  std::vector<std::uint64_t> out;
  if (parts.size() == 1) {
    const auto n = detail::parse_count("seeds", parts[0]);
    if (n == 0) throw ConfigError("seeds: need at least one seed");
    for (std::uint64_t s = 1; s <= n; ++s) out.push_back(s);
    return out;
  }
  for (const auto& p : parts) out.push_back(detail::parse_count("seeds", p));
  return out;
}

// Applies one key=value setting. Throws ConfigError naming the key.
inline void set_option(RunConfig& c, const std::string& key, const std::string& raw) {
  using namespace detail;
  const auto v = trim(raw);
  auto& s = c.sim;
  if (key == "duration") s.duration = parse_duration(key, v);
  else if (key == "warmup") s.warmup = parse_duration(key, v);
  else if (key == "cooldown") s.cooldown = parse_duration(key, v);
  else if (key == "report_interval") s.report_interval = parse_duration(key, v);
  else if (key == "bandwidth") s.bandwidth = parse_bandwidth(key, v);
  else if (key == "item_size") s.item_size = static_cast<Bytes>(parse_bytes(key, v));
  else if (key == "buffer_size") s.buffer_size = static_cast<Bytes>(parse_bytes(key, v));
  else if (key == "item_lifetime") s.item_lifetime = parse_duration(key, v);
  else if (key == "publish_rate") s.publish_rate = with_unit(key, v, {{"/h", 1}});
  else if (key == "top_k") s.top_k = parse_count(key, v);
  else if (key == "bootstrap_fraction") s.bootstrap_fraction = with_unit(key, v, {});
  else if (key == "metadata_cost") s.metadata_cost = static_cast<Bytes>(parse_bytes(key, v));
  else if (key == "prior_contact_rate") s.contact_prior.lambda = with_unit(key, v, {{"/s", 1}, {"/h", 1.0 / 3600}});
  else if (key == "prior_contact_bytes") s.contact_prior.bytes_per_contact = parse_bytes(key, v);
  else if (key == "publishers") s.publishers = parse_count(key, v);
  else if (key == "subscribers") s.subscribers = parse_count(key, v);
  else if (key == "min_contacts") s.min_contacts = parse_count(key, v);
  else if (key == "min_contact_items") s.min_contact_items = with_unit(key, v, {});
  else if (key == "trace") c.trace = v;
  else if (key == "synth_nodes") c.synth_nodes = parse_count(key, v);
  else if (key == "synth_mean_intercontact") c.synth_mean_intercontact = parse_duration(key, v);
  else if (key == "synth_mean_contact_duration") c.synth_mean_contact_duration = parse_duration(key, v);
  else if (key == "ratings") c.ratings = v;
  else if (key == "synth_rating_users") c.synth_rating_users = parse_count(key, v);
  else if (key == "synth_rating_items") c.synth_rating_items = parse_count(key, v);
  else if (key == "synth_rating_density") c.synth_rating_density = with_unit(key, v, {});
  else if (key == "synth_rating_groups") c.synth_rating_groups = parse_count(key, v);
  else if (key == "rating_threshold") c.rating_threshold = static_cast<int>(parse_count(key, v));
  else if (key == "reduce_users") c.reduce_users = parse_count(key, v);
  else if (key == "reduce_items") c.reduce_items = parse_count(key, v);
  else if (key == "schedulers") c.schedulers = parse_scheduler_list(v);
  else if (key == "seeds") c.seeds = parse_seed_list(v);
  else if (key == "out") c.out = v;
  else throw ConfigError(key + ": unknown key");
}

// Lines of "key = value"; '#' starts a comment.
inline void apply_config(RunConfig& c, std::istream& in, const std::string& name = "<config>") {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::trim(detail::strip_comment(line));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(name, lineno, "expected 'key = value'");
    try {
      set_option(c, detail::trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ParseError(name, lineno, e.what());
    }
  }
}

inline void apply_config_file(RunConfig& c, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  apply_config(c, in, path);
}

// Built-in presets. Synthetic trace parameters reproduce the published
// per-node contact counts and mean contact durations of the two traces.
inline const std::map<std::string, std::string>& presets() {
  static const std::map<std::string, std::string> p{
      {"sancab-like",
       "publishers = 22\n"
       "subscribers = 56\n"
       "publish_rate = 20\n"
       "duration = 6h\n"
       "item_size = 11MB\n"
       "buffer_size = 2GB\n"
       "bandwidth = 3Mbps\n"
       "item_lifetime = 2h\n"
       "warmup = 1h\n"
       "cooldown = 1h\n"
       "reduce_users = 500\n"
       "reduce_items = 900\n"
       "synth_nodes = 90\n"
       "synth_mean_contact_duration = 73s\n"
       // 213 contacts per node in 6 h over 89 peers
       "synth_mean_intercontact = 9025s\n"
       "prior_contact_rate = 35.5/h\n"
       "prior_contact_bytes = 27MB\n"},
      {"rollernet-like",
       "publishers = 10\n"
       "subscribers = 30\n"
       "publish_rate = 40\n"
       "duration = 3h\n"
       "item_size = 15MB\n"
       "buffer_size = 1GB\n"
       "bandwidth = 3Mbps\n"
       "item_lifetime = 75min\n"
       "warmup = 1h\n"
       "cooldown = 30min\n"
       "reduce_users = 500\n"
       "reduce_items = 900\n"
       "synth_nodes = 60\n"
       "synth_mean_contact_duration = 22s\n"
       // 501 contacts per node in 3 h over 59 peers
       "synth_mean_intercontact = 1272s\n"
       "prior_contact_rate = 167/h\n"
       "prior_contact_bytes = 8.25MB\n"},
  };
  return p;
}

inline void apply_preset(RunConfig& c, const std::string& name) {
  auto it = presets().find(name);
  if (it == presets().end()) throw ConfigError("preset: unknown preset '" + name + "'");
  std::istringstream in(it->second);
  apply_config(c, in, "preset " + name);
}

// Empty iff the configuration is runnable; every message names its key.
inline std::vector<std::string> validate_config(const RunConfig& c) {
  auto d = validate(c.sim);
  if (!c.trace.empty() && !std::filesystem::exists(c.trace)) d.push_back("trace: file not found: " + c.trace);
  if (!c.ratings.empty() && !std::filesystem::exists(c.ratings)) d.push_back("ratings: file not found: " + c.ratings);
  if (c.trace.empty()) {
    if (c.synth_nodes < 2) d.push_back("synth_nodes: need at least 2 nodes");
    if (c.synth_nodes < c.sim.publishers + c.sim.subscribers) {
      d.push_back("synth_nodes: fewer nodes than publishers + subscribers");
    }
    if (!(c.synth_mean_intercontact > 0)) d.push_back("synth_mean_intercontact: must be positive");
    if (!(c.synth_mean_contact_duration > 0)) d.push_back("synth_mean_contact_duration: must be positive");
  }
  if (c.ratings.empty()) {
    if (c.synth_rating_users == 0) d.push_back("synth_rating_users: must be positive");
    if (c.synth_rating_items == 0) d.push_back("synth_rating_items: must be positive");
    if (c.synth_rating_groups == 0) d.push_back("synth_rating_groups: must be positive");
    if (!(c.synth_rating_density > 0 && c.synth_rating_density <= 1)) {
      d.push_back("synth_rating_density: must be in (0, 1]");
    }
    if (c.reduce_users > c.synth_rating_users) d.push_back("reduce_users: exceeds synth_rating_users");
    if (c.reduce_items > c.synth_rating_items) d.push_back("reduce_items: exceeds synth_rating_items");
  }
  if (c.reduce_users == 0) d.push_back("reduce_users: must be positive");
  if (c.reduce_items == 0) d.push_back("reduce_items: must be positive");
  if (c.rating_threshold < 1 || c.rating_threshold > 5) d.push_back("rating_threshold: must be in 1..5");
  if (c.schedulers.empty()) d.push_back("schedulers: empty list");
  if (c.seeds.empty()) d.push_back("seeds: empty list");
  if (c.out.empty()) d.push_back("out: empty path");
  return d;
}

// Trace, reduced ratings and roles for one seed; shared by every scheduler.
struct Scenario {
  std::vector<ContactEvent> contacts;
  GroundTruthRatings ratings;
  RoleAssignment roles;
};

inline Scenario build_scenario(const RunConfig& c, std::uint64_t seed) {
  Scenario s;
  if (c.trace.empty()) {
    auto rng = make_rng(seed, RngStream::trace);
    s.contacts = synth_trace(c.synth_nodes, c.sim.duration, c.synth_mean_intercontact,
                             c.synth_mean_contact_duration, rng);
  } else {
    s.contacts = parse_contact_trace(c.trace);
  }
  auto rng = make_rng(seed, RngStream::ratings);
  GroundTruthRatings full;
  if (c.ratings.empty()) {
    full = binarize(synth_ratings(c.synth_rating_users, c.synth_rating_items, c.synth_rating_density,
                                  c.synth_rating_groups, rng),
                    c.rating_threshold);
  } else {
    full = parse_ratings(c.ratings, c.rating_threshold);
  }
  s.ratings = reduce_dataset(full, c.reduce_users, c.reduce_items, rng);
  std::vector<NodeId> nodes = trace_nodes(s.contacts);
  if (c.trace.empty()) {
    nodes.clear();
    for (std::size_t n = 0; n < c.synth_nodes; ++n) nodes.emplace_back(static_cast<std::int64_t>(n));
  }
  auto role_rng = make_rng(seed, RngStream::roles);
  s.roles = assign_roles(nodes, c.sim.publishers, c.sim.subscribers, s.ratings, role_rng,
                         eligibility_for(c.sim, s.contacts));
  return s;
}

inline std::string run_file_name(SchedulerKind k, std::uint64_t seed) {
  return std::string(scheduler_name(k)) + "_seed" + std::to_string(seed) + ".csv";
}

inline constexpr const char* kSummaryHeader =
    "scheduler,runs,positive_ratings_discovered,coverage,fcpp,precision,avg_positive_items_per_user,"
    "users_with_useful_item,deliveries,latency_p50,latency_p90";

// Mean over seeds of each summary quantity, one row per scheduler.
inline void write_summary(std::ostream& out, const std::vector<SchedulerKind>& kinds,
                          const std::map<SchedulerKind, std::vector<MetricsSummary>>& results) {
  using detail::fmt;
  out << kSummaryHeader << '\n';
  for (auto k : kinds) {
    auto it = results.find(k);
    if (it == results.end() || it->second.empty()) continue;
    const auto& rs = it->second;
    auto mean = [&](auto field) {
      double total = 0;
      for (const auto& r : rs) total += static_cast<double>(field(r));
      return total / static_cast<double>(rs.size());
    };
    out << scheduler_name(k) << ',' << rs.size() << ','
        << fmt(mean([](const auto& r) { return r.final_state.positive_ratings_discovered; })) << ','
        << fmt(mean([](const auto& r) { return r.final_state.coverage; })) << ','
        << fmt(mean([](const auto& r) { return r.final_state.fcpp; })) << ','
        << fmt(mean([](const auto& r) { return r.precision; })) << ','
        << fmt(mean([](const auto& r) { return r.avg_positive_items_per_user; })) << ','
        << fmt(mean([](const auto& r) { return r.users_with_useful_item; })) << ','
        << fmt(mean([](const auto& r) { return r.deliveries; })) << ','
        << fmt(mean([](const auto& r) { return r.latency_p50; })) << ','
        << fmt(mean([](const auto& r) { return r.latency_p90; })) << '\n';
  }
}

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitRuntime = 2 };

// Runs schedulers x seeds, one CSV per run plus summary.csv. On failure the
// outputs written so far stay and a FAILED marker explains what broke.
inline int run_experiment(const RunConfig& c, std::ostream& log = std::cerr) {
  if (auto d = validate_config(c); !d.empty()) {
    for (const auto& msg : d) log << "config error: " << msg << '\n';
    return kExitConfig;
  }
  namespace fs = std::filesystem;
  std::map<SchedulerKind, std::vector<MetricsSummary>> results;
  try {
    fs::create_directories(c.out);
    fs::remove(fs::path(c.out) / "FAILED");
    for (auto seed : c.seeds) {
      const auto scenario = build_scenario(c, seed);
      for (auto kind : c.schedulers) {
        const auto r = run(c.sim, scenario.contacts, scenario.ratings, scenario.roles, kind, seed);
        emit_report(r.report, (fs::path(c.out) / run_file_name(kind, seed)).string());
        results[kind].push_back(r.report.summary);
        log << scheduler_name(kind) << " seed " << seed << ": fcpp " << r.report.summary.final_state.fcpp
            << ", coverage " << r.report.summary.final_state.coverage << ", deliveries "
            << r.report.summary.deliveries << '\n';
      }
    }
    std::ofstream out(fs::path(c.out) / "summary.csv");
    write_summary(out, c.schedulers, results);
    if (!out) throw Error("I/O failure writing summary.csv");
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    std::ofstream(fs::path(c.out) / "FAILED") << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    log << "run failed: " << e.what() << '\n';
    std::error_code ec;
    fs::create_directories(c.out, ec);
    std::ofstream(fs::path(c.out) / "FAILED") << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace cofigel
