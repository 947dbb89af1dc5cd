// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Each criterion also has a wall-clock budget.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "cofigel/config.hpp"
#include "test_support.hpp"

using namespace cofigel;
using namespace cofigel::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

std::string num(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome worked_example() {
  Outcome o;
  const auto m = to_matrix(table1());
  const UserId u4{4};
  const double r1 = m.rank(u4, ItemId{1}).value_or(-1);
  const double r3 = m.rank(u4, ItemId{3}).value_or(-1);
  o.check(std::abs(r1 - 1.3032) <= 5e-3, "rank(u4,i1) = " + num(r1));
  o.check(std::abs(r3 - 0.7071) <= 5e-3, "rank(u4,i3) = " + num(r3));
  o.check(m.coverage_gain(u4, ItemId{1}) == 2, "coverage_gain(u4,i1) = " + std::to_string(m.coverage_gain(u4, ItemId{1})));
  o.check(m.coverage_gain(u4, ItemId{3}) == 4, "coverage_gain(u4,i3) = " + std::to_string(m.coverage_gain(u4, ItemId{3})));
  const double s12 = m.similarity(ItemId{1}, ItemId{2});
  const double s16 = m.similarity(ItemId{1}, ItemId{6});
  o.check(std::abs(s12 - 1.0 / (std::sqrt(5.0) * std::sqrt(2.0))) <= 1e-6, "Sim(1,2) = " + num(s12, 8));
  o.check(std::abs(s16 - 3.0 / (std::sqrt(5.0) * std::sqrt(4.0))) <= 1e-6, "Sim(1,6) = " + num(s16, 8));
  if (o.pass) {
    o.detail = "rank " + num(r1) + "/" + num(r3) + ", gain 2/4, Sim(1,2) " + num(s12, 6) + ", Sim(1,6) " + num(s16, 6);
  }
  return o;
}

// ---------------------------------------------------------------------------

struct RandomLog {
  TransferLog log;
  GroundTruthRatings gt;
  ItemCatalog catalog;
  int users = 0;
};

RandomLog random_log(std::mt19937_64& rng) {
  RandomLog c;
  const int n_items = 1 + static_cast<int>(rng() % 10);
  c.users = 1 + static_cast<int>(rng() % 10);
  std::vector<GroundTruthRow> rows;
  for (int i = 1; i <= n_items; ++i) {
    c.catalog.add({ItemId{i}, NodeId{0}, static_cast<double>(rng() % 100), 10, 1000.0});
    for (int u = 1; u <= c.users; ++u) {
      if (rng() % 3 == 0) rows.push_back({UserId{u}, ItemId{i}, rng() % 2 ? Rating::positive : Rating::negative});
    }
  }
  c.gt = GroundTruthRatings(rows);
  for (int i = 1; i <= n_items; ++i) {
    for (int u = 1; u <= c.users; ++u) {
      if (rng() % 2) continue;
      c.log.deliveries.push_back({c.catalog.at(ItemId{i}).publish_time + 1.0, ItemId{i}, UserId{u},
                                  rng() % 2 ? Rating::positive : Rating::negative});
    }
  }
  return c;
}

// Enumerates every (user, item) cell; never looks at the delivery order.
double precision_oracle(const RandomLog& c, const MeasurementWindow& w) {
  std::size_t rec = 0, liked = 0;
  for (int u = 1; u <= c.users; ++u) {
    for (const auto& d : c.log.deliveries) {
      if (d.user != UserId{u} || !w.contains(c.catalog.at(d.item).publish_time)) continue;
      if (d.predicted_label != Rating::positive) continue;
      ++rec;
      if (c.gt.find(d.user, d.item) == Rating::positive) ++liked;
    }
  }
  return rec == 0 ? 0.0 : static_cast<double>(liked) / static_cast<double>(rec);
}

Outcome oracle_equivalence() {
  Outcome o;
  std::mt19937_64 rng(2024);
  const int cases = 300;
  std::size_t checks = 0;
  for (int t = 0; t < cases && o.pass; ++t) {
    const auto d = random_dense(rng);
    const auto truth = extend_truth(d, rng);
    const auto m = to_matrix(d);
    std::vector<UserId> us;
    std::vector<ItemId> is;
    for (int u = 1; u <= d.users; ++u) us.emplace_back(u);
    for (int i = 1; i <= d.items; ++i) is.emplace_back(i);
    for (int i = 1; i <= d.items; ++i) {
      for (int j = 1; j <= d.items; ++j, ++checks) {
        o.check(std::abs(m.similarity(ItemId{i}, ItemId{j}) - oracle::sim(d, i, j)) <= 1e-9,
                "similarity mismatch in case " + std::to_string(t));
      }
    }
    for (int u = 1; u <= d.users; ++u) {
      for (int i = 1; i <= d.items; ++i, ++checks) {
        if (d.at(u, i) < 0) {
          // No rank is reported for unpredictable cells, where the oracle sum is 0.
          const auto got = m.rank(UserId{u}, ItemId{i});
          const double want = oracle::rank(d, u, i);
          o.check(got.has_value() == (want > 0.0) && std::abs(got.value_or(0.0) - want) <= 1e-9,
                  "rank mismatch in case " + std::to_string(t));
          o.check(m.coverage_gain(UserId{u}, ItemId{i}) == oracle::coverage_gain(d, u, i),
                  "coverage_gain mismatch in case " + std::to_string(t));
        }
      }
    }
    const std::size_t k = 1 + rng() % 4;
    o.check(std::abs(fcpp(m, to_ground_truth(truth), us, is, k) - oracle::fcpp(d, truth, k)) <= 1e-9,
            "FCPP mismatch in case " + std::to_string(t));
    const auto lc = random_log(rng);
    const MeasurementWindow w{20.0, 80.0};
    o.check(std::abs(precision(lc.log, lc.gt, lc.catalog, w) - precision_oracle(lc, w)) <= 1e-9,
            "precision mismatch in case " + std::to_string(t));
    checks += 2;
  }
  if (o.pass) o.detail = std::to_string(cases) + " random cases, " + std::to_string(checks) + " comparisons";
  return o;
}

// ---------------------------------------------------------------------------

Outcome bound_properties() {
  Outcome o;
  std::mt19937_64 rng(99);
  auto stats = [](std::size_t n, double r, double g) {
    ItemStats s;
    s.item = ItemId{1};
    s.n = n;
    s.r_plus = r;
    s.g_plus = g;
    return s;
  };
  std::size_t points = 0;
  for (int t = 0; t < 4000 && o.pass; ++t) {
    const std::size_t n = 10 + rng() % 991;
    const double r = 1 + static_cast<double>(rng() % (n - 1));
    const double room = static_cast<double>(n) - r;
    double prev = 1.0;
    for (double g = 0; g <= room; g += std::max(1.0, std::floor(room / 9)), ++points) {
      const double v = rating_gain_bound(stats(n, r, g));
      o.check(v >= 0.0 && v <= 1.0, "G out of [0,1]");
      o.check(v <= prev, "G increased with g+");
      prev = v;
    }
  }
  std::uniform_real_distribution<double> pos(0.0, 5e7), left(1.0, 2e4), rate(1e-4, 0.5), cap(1e4, 1e8);
  for (int t = 0; t < 20000 && o.pass; ++t, ++points) {
    QueuePositionMatrix sigma;
    std::vector<NodeId> holders;
    const int h = 1 + static_cast<int>(rng() % 5);
    for (int v = 0; v < h; ++v) {
      holders.emplace_back(v);
      sigma.record(ItemId{1}, NodeId{v}, static_cast<Bytes>(pos(rng)), 0.0);
    }
    const ContactStats cs{rate(rng), cap(rng)};
    const std::size_t targets = rng() % 60;
    const double ttl = left(rng);
    const double mu = mean_wait(sigma, ItemId{1}, cs, holders);
    const double d = delivery_factor(mu, targets, ttl);
    o.check(d >= 0.0 && d <= 1.0, "D out of [0,1]");
    QueuePositionMatrix more = sigma;
    const NodeId bumped{static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(h))};
    more.record(ItemId{1}, bumped, sigma.position(ItemId{1}, bumped) + static_cast<Bytes>(1 + rng() % 10'000'000), 1.0);
    o.check(delivery_factor(mean_wait(more, ItemId{1}, cs, holders), targets, ttl) <= d, "D increased with sum sigma");
    o.check(delivery_factor(mu, targets + 1, ttl) <= d, "D increased with |N|");
    o.check(delivery_factor(mu, targets, ttl + left(rng)) >= d, "D decreased with t");
  }
  // Spot values.
  const double g1 = rating_gain_bound(stats(100, 10, 50));
  o.check(std::abs(g1 - std::exp(100.0 / 90.0) * std::pow(0.9, 60)) <= 1e-12 && std::abs(g1 - 0.00546) <= 5e-6,
          "G(100,10,50) = " + num(g1, 6));
  o.check(rating_gain_bound(stats(100, 1, 0)) == 1.0, "G(100,1,0) != 1");
  QueuePositionMatrix sigma;
  sigma.record(ItemId{1}, NodeId{1}, 5'000'000, 0.0);
  sigma.record(ItemId{1}, NodeId{2}, 15'000'000, 0.0);
  const std::vector<NodeId> two{NodeId{1}, NodeId{2}};
  const double mu = mean_wait(sigma, ItemId{1}, ContactStats{1.0, 1e6}, two);
  o.check(mu == 10.0, "mu = " + num(mu));
  o.check(delivery_factor(10.0, 4, 100.0) == 0.6, "D(10,4,100) != 0.6");
  o.check(delivery_factor(0.0, 4, 100.0) == 1.0, "D(mu=0) != 1");
  o.check(delivery_factor(30.0, 4, 100.0) == 0.0, "D not clamped");
  auto s = stats(100, 10, 50);
  s.holders = two;
  s.targets = {UserId{1}, UserId{2}, UserId{3}, UserId{4}};
  const double u = utility(s, sigma, ContactStats{1.0, 1e6}, 100.0);
  o.check(std::abs(u - 60.0 * g1 * 0.6) <= 1e-12 && std::abs(u - 0.1966) <= 5e-4, "U = " + num(u, 6));
  o.check(utility(s, sigma, ContactStats{1.0, 1e6}, 0.0) == 0.0, "expired item has nonzero utility");
  if (o.pass) o.detail = std::to_string(points) + " grid points; G(100,10,50) " + num(g1, 6) + ", U " + num(u, 4);
  return o;
}

// ---------------------------------------------------------------------------

Outcome conservation_and_determinism() {
  Outcome o;
  std::size_t runs = 0, contacts_checked = 0;
  for (std::uint64_t seed = 1; seed <= 2 && o.pass; ++seed) {
    SimConfig c;
    c.duration = 3600.0;
    c.warmup = 600.0;
    c.cooldown = 600.0;
    c.report_interval = 300.0;
    c.bandwidth = 50'000.0;
    c.item_size = 1'000'000;
    c.buffer_size = 8'000'000;
    c.item_lifetime = 1800.0;
    c.publish_rate = 30.0;
    c.publishers = 3;
    c.subscribers = 8;
    c.min_contacts = 1;
    c.min_contact_items = 0;
    auto trng = make_rng(seed, RngStream::trace);
    const auto trace = synth_trace(20, c.duration, 900.0, 40.0, trng);
    auto rrng = make_rng(seed, RngStream::ratings);
    const auto gt = reduce_dataset(binarize(synth_ratings(60, 90, 0.15, 4, rrng), 4), 50, 70, rrng);
    std::map<std::tuple<Seconds, NodeId, NodeId>, Bytes> capacity;
    for (const auto& e : trace) {
      const Bytes cap = e.capacity(c.bandwidth);
      capacity[{e.start, e.node_a, e.node_b}] = cap;
      capacity[{e.start, e.node_b, e.node_a}] = cap;
    }
    const auto truth = run(c, trace, gt, SchedulerKind::ground_truth, seed);
    for (auto k : kAllSchedulers) {
      const auto a = run(c, trace, gt, k, seed);
      const auto b = run(c, trace, gt, k, seed);
      ++runs;
      const std::string tag = std::string(scheduler_name(k)) + " seed " + std::to_string(seed);
      o.check(a.log == b.log && transfer_log_csv(a.log) == transfer_log_csv(b.log), tag + ": logs differ");
      // Bytes per direction of each contact, recomputed from the transfers.
      std::map<std::tuple<Seconds, NodeId, NodeId>, Bytes> moved;
      for (const auto& t : a.log.transfers) moved[{t.time, t.from, t.to}] += t.bytes;
      for (const auto& [key, bytes] : moved) {
        auto it = capacity.find(key);
        o.check(it != capacity.end(), tag + ": transfer outside any contact");
        if (it != capacity.end()) o.check(bytes <= it->second, tag + ": contact capacity exceeded");
        ++contacts_checked;
      }
      o.check(a.report.series.size() == truth.report.series.size(), tag + ": snapshot count differs");
      for (std::size_t s = 0; s < std::min(a.report.series.size(), truth.report.series.size()); ++s) {
        o.check(truth.report.series[s].positive_ratings_discovered >= a.report.series[s].positive_ratings_discovered,
                tag + ": GroundTruth exceeded at snapshot " + std::to_string(s));
      }
    }
  }
  if (o.pass) {
    o.detail = std::to_string(runs) + " run pairs identical, " + std::to_string(contacts_checked) +
               " contact directions within capacity, GroundTruth bound holds";
  }
  return o;
}

// ---------------------------------------------------------------------------

// 30 nodes with exponential contacts, 200 items and 100 users drawn from
// MovieLens-format ratings, bandwidth tight enough that only a minority of
// (item, subscriber) pairs can be served.
struct DirectionalResult {
  std::map<SchedulerKind, double> fcpp, avg_positive, served;
  int seeds = 0;
};

const DirectionalResult& directional() {
  static const DirectionalResult result = [] {
    DirectionalResult r;
    SimConfig c;
    c.duration = 3 * 3600.0;
    c.warmup = 1800.0;
    c.cooldown = 1800.0;
    c.report_interval = 1800.0;
    c.bandwidth = 20'000.0;
    c.item_size = 1'000'000;
    c.buffer_size = 100'000'000;
    c.item_lifetime = 7200.0;
    c.publish_rate = 40.0;
    c.publishers = 5;
    c.subscribers = 15;
    c.min_contacts = 1;
    c.min_contact_items = 0;
    const double intercontact = 3600.0, contact = 60.0;
    c.contact_prior = {29.0 / intercontact, c.bandwidth * contact};
    const std::vector<SchedulerKind> kinds{SchedulerKind::cofigel, SchedulerKind::no_delivery_time,
                                           SchedulerKind::no_coverage};
    r.seeds = 5;
    for (int seed = 1; seed <= r.seeds; ++seed) {
      auto trng = make_rng(static_cast<std::uint64_t>(seed), RngStream::trace);
      const auto trace = synth_trace(30, c.duration, intercontact, contact, trng);
      auto rrng = make_rng(static_cast<std::uint64_t>(seed), RngStream::ratings);
      std::stringstream movielens;
      write_raw_ratings(movielens, synth_ratings(150, 300, 0.1, 6, rrng));
      const auto gt = reduce_dataset(parse_ratings(movielens, 4), 100, 200, rrng);
      for (auto k : kinds) {
        const auto res = run(c, trace, gt, k, static_cast<std::uint64_t>(seed));
        r.fcpp[k] += res.report.summary.final_state.fcpp / r.seeds;
        r.avg_positive[k] += res.report.summary.avg_positive_items_per_user / r.seeds;
        std::set<std::pair<NodeId, ItemId>> pairs;
        std::set<NodeId> subs;
        for (const auto& n : res.nodes) {
          if (n.role == NodeRole::subscriber) subs.insert(n.id);
        }
        for (const auto& t : res.log.transfers) {
          if (subs.contains(t.to)) pairs.emplace(t.to, t.item);
        }
        r.served[k] += static_cast<double>(pairs.size()) /
                       (static_cast<double>(res.catalog.size()) * static_cast<double>(subs.size())) / r.seeds;
      }
    }
    return r;
  }();
  return result;
}

Outcome fcpp_ordering() {
  Outcome o;
  const auto& r = directional();
  const double cf = r.fcpp.at(SchedulerKind::cofigel);
  const double nd = r.fcpp.at(SchedulerKind::no_delivery_time);
  const double nc = r.fcpp.at(SchedulerKind::no_coverage);
  const double served = r.served.at(SchedulerKind::cofigel);
  o.check(served <= 0.30, "scenario not constrained: " + num(served, 3) + " of pairs served");
  o.check(cf >= nd, "CoFiGel < NoDeliveryTime");
  o.check(nd >= nc, "NoDeliveryTime < NoCoverage");
  o.check(cf >= 1.5 * nc, "CoFiGel/NoCoverage = " + num(cf / nc, 3) + " < 1.5");
  const std::string values = "FCPP CoFiGel " + num(cf) + ", NoDeliveryTime " + num(nd) + ", NoCoverage " + num(nc) +
                             " (ratio " + num(cf / nc, 3) + ", " + std::to_string(r.seeds) + " seeds, " +
                             num(100 * served, 1) + "% pairs served)";
  o.detail = o.pass ? values : o.detail + "; " + values;
  return o;
}

Outcome useful_items() {
  Outcome o;
  const auto& r = directional();
  const double cf = r.avg_positive.at(SchedulerKind::cofigel);
  const double nc = r.avg_positive.at(SchedulerKind::no_coverage);
  o.check(cf >= 1.2 * nc, "ratio " + num(cf / nc, 3) + " < 1.2");
  const std::string values = "avg positive items per user CoFiGel " + num(cf, 3) + ", NoCoverage " + num(nc, 3) +
                             " (" + std::to_string(r.seeds) + " seeds)";
  o.detail = o.pass ? values : o.detail + "; " + values;
  return o;
}

// ---------------------------------------------------------------------------

Outcome preset_smoke() {
  Outcome o;
  std::size_t rows = 0;
  for (const auto& [name, text] : presets()) {
    RunConfig c;
    apply_preset(c, name);
    c.seeds = {1};
    c.schedulers = {SchedulerKind::cofigel};
    const auto dir = fs::temp_directory_path() / ("cofigel_acceptance_" + name);
    fs::remove_all(dir);
    c.out = dir.string();
    std::ostringstream log;
    const int code = run_experiment(c, log);
    o.check(code == kExitOk, name + ": exit code " + std::to_string(code) + ": " + log.str());
    if (code != kExitOk) continue;
    const auto path = dir / run_file_name(SchedulerKind::cofigel, 1);
    try {
      const auto report = parse_report(path.string());
      std::stringstream again;
      write_report(again, report);
      std::ifstream in(path);
      const std::string original(std::istreambuf_iterator<char>(in), {});
      o.check(again.str() == original, name + ": CSV does not round-trip");
      o.check(original.rfind(std::string(kReportHeader) + "\n", 0) == 0, name + ": bad header");
      o.check(!report.series.empty(), name + ": no snapshots");
      rows += report.series.size() + 1;
    } catch (const std::exception& e) {
      o.check(false, name + ": " + e.what());
    }
    std::ifstream sum(dir / "summary.csv");
    std::string header;
    std::getline(sum, header);
    o.check(header == kSummaryHeader, name + ": bad summary header");
    fs::remove_all(dir);
  }
  if (o.pass) o.detail = "both presets ran; " + std::to_string(rows) + " CSV rows parsed back identically";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget_s;
    std::function<Outcome()> body;
  };
  const std::vector<Criterion> criteria{
      {"C1 worked example", 1.0, worked_example},
      {"C2 oracle equivalence", 30.0, oracle_equivalence},
      {"C3 bound properties", 10.0, bound_properties},
      {"C4 conservation and determinism", 60.0, conservation_and_determinism},
      {"C5 FCPP ordering", 300.0, fcpp_ordering},
      {"C6 useful items per user", 300.0, useful_items},
      {"C7 preset smoke", 120.0, preset_smoke},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.body();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > c.budget_s) {
      o.pass = false;
      o.detail += "; over budget (" + num(c.budget_s, 0) + " s)";
    }
    failures += !o.pass;
    std::printf("%s %s [%.2f s] %s\n", o.pass ? "PASS" : "FAIL", c.name, secs, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
