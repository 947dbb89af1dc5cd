#pragma once

// Evaluation quantities: prediction coverage, FCPP (fraction of correctly
// predicted positives), precision of delivered recommendations and the two
// recall views (liked items per user, users with at least one liked item).
//
// Report CSV columns:
//
//   row                          "snapshot" or "summary"
//   t                            simulation time (s)
//   positive_ratings_discovered  positive ratings known anywhere, published items
//   coverage                     rated-or-predictable share of (user, published item)
//   fcpp                         correctly predicted or confirmed positives / ground-truth positives
//   precision                    liked share of recommended deliveries        (summary only)
//   recommended_deliveries       deliveries labelled positive on arrival      (summary only)
//   liked_recommended            of those, liked in ground truth              (summary only)
//   avg_positive_items_per_user  liked deliveries / users                     (summary only)
//   users_with_useful_item       users with >= 1 liked delivery               (summary only)
//   deliveries                   all windowed deliveries                      (summary only)
//   latency_p50, latency_p90     delivery time - publish time (s)             (summary only)

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "cofigel/node.hpp"
#include "cofigel/rating_matrix.hpp"
#include "cofigel/trace_io.hpp"
#include "cofigel/transfer_log.hpp"

namespace cofigel {

// Items published in [begin, end) are measured.
struct MeasurementWindow {
  Seconds begin = 0.0;
  Seconds end = 0.0;

  bool contains(Seconds publish_time) const { return publish_time >= begin && publish_time < end; }
};

struct Snapshot {
  Seconds t = 0.0;
  std::size_t positive_ratings_discovered = 0;
  double coverage = 0.0;
  double fcpp = 0.0;

  friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

struct RecallMeasures {
  double avg_positive_per_user = 0.0;
  std::size_t users_satisfied = 0;
};

struct MetricsSummary {
  Snapshot final_state;
  double precision = 0.0;
  std::size_t recommended_deliveries = 0;
  std::size_t liked_recommended = 0;
  double avg_positive_items_per_user = 0.0;
  std::size_t users_with_useful_item = 0;
  std::size_t deliveries = 0;
  double latency_p50 = 0.0;
  double latency_p90 = 0.0;

  friend bool operator==(const MetricsSummary&, const MetricsSummary&) = default;
};

struct MetricsReport {
  std::vector<Snapshot> series;
  MetricsSummary summary;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

// Rated or predictable (user, item) pairs over |users| x |items|.
inline double coverage(const RatingMatrix& knowledge, std::span<const UserId> users, std::span<const ItemId> items) {
  if (users.empty() || items.empty()) return 0.0;
  std::size_t covered = 0;
  // Fast path when `users` is exactly the matrix's user universe.
  const bool all_users = users.size() == knowledge.user_count() &&
                         std::set<UserId>(users.begin(), users.end()).size() == users.size() &&
                         std::all_of(users.begin(), users.end(), [&](UserId u) { return knowledge.has_user(u); });
  for (auto i : items) {
    if (!knowledge.has_item(i)) continue;
    if (all_users) {
      covered += knowledge.covered_count(i);
      continue;
    }
    for (auto u : users) {
      if (knowledge.has_user(u) && (knowledge.is_rated(u, i) || knowledge.is_predictable(u, i))) ++covered;
    }
  }
  return static_cast<double>(covered) / (static_cast<double>(users.size()) * static_cast<double>(items.size()));
}

// Positive ratings known for the given users and items.
inline std::size_t positive_ratings_known(const RatingMatrix& knowledge, std::span<const UserId> users,
                                          std::span<const ItemId> items) {
  std::size_t n = 0;
  for (auto i : items) {
    if (!knowledge.has_item(i)) continue;
    for (auto u : users) {
      if (!knowledge.has_user(u)) continue;
      if (auto r = knowledge.rated(u, i); r && r->value == Rating::positive) ++n;
    }
  }
  return n;
}

// Ground-truth positive pairs that are confirmed or currently predicted
// positive (each pair counted once), over all ground-truth positive pairs.
inline double fcpp(const RatingMatrix& knowledge, const GroundTruthRatings& gt, std::span<const UserId> users,
                   std::span<const ItemId> items, std::size_t k) {
  const std::set<UserId> wanted(users.begin(), users.end());
  std::size_t total = 0;
  std::size_t hit = 0;
  for (auto i : items) {
    for (auto u : gt.positive_raters(i)) {
      if (!wanted.contains(u)) continue;
      ++total;
      if (!knowledge.has_item(i) || !knowledge.has_user(u)) continue;
      if (auto r = knowledge.rated(u, i)) {
        if (r->value == Rating::positive) ++hit;
      } else if (knowledge.predicted_positive(u, i, k)) {
        ++hit;
      }
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

namespace detail {

inline bool in_window(const DeliveryRecord& d, const ItemCatalog& catalog, const MeasurementWindow& w) {
  return catalog.contains(d.item) && w.contains(catalog.at(d.item).publish_time);
}

}  // namespace detail

// Liked share of deliveries that arrived labelled positive.
inline double precision(const TransferLog& log, const GroundTruthRatings& gt, const ItemCatalog& catalog,
                        const MeasurementWindow& window, std::size_t* recommended = nullptr,
                        std::size_t* liked = nullptr) {
  std::size_t rec = 0;
  std::size_t good = 0;
  for (const auto& d : log.deliveries) {
    if (d.predicted_label != Rating::positive || !detail::in_window(d, catalog, window)) continue;
    ++rec;
    if (gt.positive(d.user, d.item)) ++good;
  }
  if (recommended) *recommended = rec;
  if (liked) *liked = good;
  return rec == 0 ? 0.0 : static_cast<double>(good) / static_cast<double>(rec);
}

inline RecallMeasures recall_measures(const TransferLog& log, const GroundTruthRatings& gt, const ItemCatalog& catalog,
                                      const MeasurementWindow& window, std::size_t n_users) {
  std::set<std::pair<UserId, ItemId>> liked;
  for (const auto& d : log.deliveries) {
    if (detail::in_window(d, catalog, window) && gt.positive(d.user, d.item)) liked.emplace(d.user, d.item);
  }
  std::set<UserId> satisfied;
  for (const auto& [u, i] : liked) satisfied.insert(u);
  RecallMeasures m;
  m.avg_positive_per_user = n_users == 0 ? 0.0 : static_cast<double>(liked.size()) / static_cast<double>(n_users);
  m.users_satisfied = satisfied.size();
  return m;
}

// Nearest-rank percentile of windowed delivery latencies; 0 when empty.
inline double latency_percentile(const TransferLog& log, const ItemCatalog& catalog, const MeasurementWindow& window,
                                 double p) {
  std::vector<double> lat;
  for (const auto& d : log.deliveries) {
    if (detail::in_window(d, catalog, window)) lat.push_back(d.time - catalog.at(d.item).publish_time);
  }
  if (lat.empty()) return 0.0;
  std::sort(lat.begin(), lat.end());
  const auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(lat.size())));
  return lat[std::clamp<std::size_t>(rank, 1, lat.size()) - 1];
}

inline MetricsSummary summarize(const Snapshot& final_state, const TransferLog& log, const GroundTruthRatings& gt,
                                const ItemCatalog& catalog, const MeasurementWindow& window, std::size_t n_users) {
  MetricsSummary s;
  s.final_state = final_state;
  s.precision = precision(log, gt, catalog, window, &s.recommended_deliveries, &s.liked_recommended);
  const auto r = recall_measures(log, gt, catalog, window, n_users);
  s.avg_positive_items_per_user = r.avg_positive_per_user;
  s.users_with_useful_item = r.users_satisfied;
  for (const auto& d : log.deliveries) {
    if (detail::in_window(d, catalog, window)) ++s.deliveries;
  }
  s.latency_p50 = latency_percentile(log, catalog, window, 0.5);
  s.latency_p90 = latency_percentile(log, catalog, window, 0.9);
  return s;
}

// ---- CSV -------------------------------------------------------------------

inline constexpr const char* kReportHeader =
    "row,t,positive_ratings_discovered,coverage,fcpp,precision,recommended_deliveries,liked_recommended,"
    "avg_positive_items_per_user,users_with_useful_item,deliveries,latency_p50,latency_p90";

namespace detail {

// Shortest representation that parses back to the same double.
inline std::string fmt(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline std::string fmt(std::size_t v) { return std::to_string(v); }

inline double to_double(const std::string& s, std::size_t line) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw ParseError("<report>", line, "bad number '" + s + "'");
  return v;
}

inline std::size_t to_count(const std::string& s, std::size_t line) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw ParseError("<report>", line, "bad count '" + s + "'");
  return v;
}

}  // namespace detail

inline void write_report(std::ostream& out, const MetricsReport& r) {
  using detail::fmt;
  out << kReportHeader << '\n';
  for (const auto& s : r.series) {
    out << "snapshot," << fmt(s.t) << ',' << fmt(s.positive_ratings_discovered) << ',' << fmt(s.coverage) << ','
        << fmt(s.fcpp) << ",,,,,,,,\n";
  }
  const auto& m = r.summary;
  out << "summary," << fmt(m.final_state.t) << ',' << fmt(m.final_state.positive_ratings_discovered) << ','
      << fmt(m.final_state.coverage) << ',' << fmt(m.final_state.fcpp) << ',' << fmt(m.precision) << ','
      << fmt(m.recommended_deliveries) << ',' << fmt(m.liked_recommended) << ',' << fmt(m.avg_positive_items_per_user)
      << ',' << fmt(m.users_with_useful_item) << ',' << fmt(m.deliveries) << ',' << fmt(m.latency_p50) << ','
      << fmt(m.latency_p90) << '\n';
}

inline void emit_report(const MetricsReport& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write report " + path);
  write_report(out, r);
  out.flush();
  if (!out) throw Error("I/O failure writing report " + path);
}

inline MetricsReport parse_report(std::istream& in) {
  MetricsReport r;
  std::string line;
  std::size_t lineno = 0;
  bool have_summary = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1) {
      if (line != kReportHeader) throw ParseError("<report>", 1, "unexpected header");
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 13) throw ParseError("<report>", lineno, "expected 13 columns");
    Snapshot s{detail::to_double(f[1], lineno), detail::to_count(f[2], lineno), detail::to_double(f[3], lineno),
               detail::to_double(f[4], lineno)};
    if (f[0] == "snapshot") {
      r.series.push_back(s);
    } else if (f[0] == "summary") {
      auto& m = r.summary;
      m.final_state = s;
      m.precision = detail::to_double(f[5], lineno);
      m.recommended_deliveries = detail::to_count(f[6], lineno);
      m.liked_recommended = detail::to_count(f[7], lineno);
      m.avg_positive_items_per_user = detail::to_double(f[8], lineno);
      m.users_with_useful_item = detail::to_count(f[9], lineno);
      m.deliveries = detail::to_count(f[10], lineno);
      m.latency_p50 = detail::to_double(f[11], lineno);
      m.latency_p90 = detail::to_double(f[12], lineno);
      have_summary = true;
    } else {
      throw ParseError("<report>", lineno, "unknown row kind '" + f[0] + "'");
    }
  }
  if (!have_summary) throw ParseError("<report>", lineno, "missing summary row");
  return r;
}

inline MetricsReport parse_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return parse_report(in);
}

}  // namespace cofigel
