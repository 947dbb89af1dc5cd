#pragma once

// Contact traces, MovieLens-style rating files, dataset reduction, role
// assignment and a synthetic contact generator.
//
// Contact trace format, one contact per line:
//
//     # comment
//     <start_seconds> <end_seconds> <node_a> <node_b>
//
// Rating format (MovieLens u.data): "<user>\t<item>\t<stars>\t<unix_time>".

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cofigel/rating_matrix.hpp"
#include "cofigel/types.hpp"

namespace cofigel {

struct ContactEvent {
  Seconds start = 0.0;
  Seconds end = 0.0;
  NodeId node_a;
  NodeId node_b;

  Seconds duration() const { return end - start; }
  Bytes capacity(double bandwidth) const {
    return static_cast<Bytes>(std::floor(duration() * bandwidth));
  }

  friend bool operator==(const ContactEvent&, const ContactEvent&) = default;
};

namespace detail {

inline std::string strip_comment(const std::string& line) {
  auto pos = line.find('#');
  return pos == std::string::npos ? line : line.substr(0, pos);
}

template <class T>
std::optional<T> read_number(std::istringstream& in) {
  T v{};
  if (!(in >> v)) return std::nullopt;
  return v;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return in;
}

}  // namespace detail

// Sorts by (start, node pair) with node_a < node_b, and fuses overlapping
// contacts of the same pair into one.
inline std::vector<ContactEvent> normalize_contacts(std::vector<ContactEvent> events) {
  for (auto& e : events) {
    if (e.node_b < e.node_a) std::swap(e.node_a, e.node_b);
  }
  auto by_time = [](const ContactEvent& x, const ContactEvent& y) {
    return std::tie(x.start, x.node_a, x.node_b, x.end) < std::tie(y.start, y.node_a, y.node_b, y.end);
  };
  std::sort(events.begin(), events.end(), by_time);
  std::vector<ContactEvent> out;
  std::map<std::pair<NodeId, NodeId>, std::size_t> open;  // pair -> index of its latest contact
  for (const auto& e : events) {
    auto key = std::make_pair(e.node_a, e.node_b);
    if (auto it = open.find(key); it != open.end() && e.start < out[it->second].end) {
      out[it->second].end = std::max(out[it->second].end, e.end);
      continue;
    }
    open[key] = out.size();
    out.push_back(e);
  }
  std::sort(out.begin(), out.end(), by_time);
  return out;
}

inline std::vector<ContactEvent> parse_contact_trace(std::istream& in, const std::string& name = "<trace>") {
  std::vector<ContactEvent> events;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream fields(detail::strip_comment(line));
    std::string probe;
    if (!(fields >> probe)) continue;
    fields.clear();
    fields.seekg(0);
    auto start = detail::read_number<double>(fields);
    auto end = detail::read_number<double>(fields);
    auto a = detail::read_number<std::int64_t>(fields);
    auto b = detail::read_number<std::int64_t>(fields);
    std::string extra;
    if (!start || !end || !a || !b || (fields >> extra)) {
      throw ParseError(name, lineno, "expected '<start> <end> <node_a> <node_b>'");
    }
    if (!(*end > *start)) throw ParseError(name, lineno, "contact end must be after start");
    if (*a == *b) throw ParseError(name, lineno, "contact between a node and itself");
    events.push_back({*start, *end, NodeId{*a}, NodeId{*b}});
  }
  return normalize_contacts(std::move(events));
}

inline std::vector<ContactEvent> parse_contact_trace(const std::string& path) {
  auto in = detail::open_input(path);
  return parse_contact_trace(in, path);
}

inline void write_contact_trace(std::ostream& out, const std::vector<ContactEvent>& events) {
  out << "# start end node_a node_b\n";
  out.precision(17);
  for (const auto& e : events) {
    out << e.start << ' ' << e.end << ' ' << e.node_a << ' ' << e.node_b << '\n';
  }
}

// Nodes appearing in a trace, ascending.
inline std::vector<NodeId> trace_nodes(const std::vector<ContactEvent>& events) {
  std::set<NodeId> s;
  for (const auto& e : events) {
    s.insert(e.node_a);
    s.insert(e.node_b);
  }
  return {s.begin(), s.end()};
}

// Exponential inter-contact gaps and durations, independently per node pair.
// The gap runs from the end of one contact to the start of the next.
template <class Rng>
std::vector<ContactEvent> synth_trace(std::size_t n_nodes, Seconds duration, Seconds mean_intercontact,
                                      Seconds mean_contact_duration, Rng& rng) {
  if (!(duration > 0 && mean_intercontact > 0 && mean_contact_duration > 0)) {
    throw UsageError("synth_trace: parameters must be positive");
  }
  std::exponential_distribution<double> gap(1.0 / mean_intercontact);
  std::exponential_distribution<double> length(1.0 / mean_contact_duration);
  std::vector<ContactEvent> events;
  for (std::size_t a = 0; a < n_nodes; ++a) {
    for (std::size_t b = a + 1; b < n_nodes; ++b) {
      Seconds t = gap(rng);
      while (t < duration) {
        const Seconds d = std::max(length(rng), 1e-3);
        events.push_back({t, t + d, NodeId{static_cast<std::int64_t>(a)}, NodeId{static_cast<std::int64_t>(b)}});
        t += d + gap(rng);
      }
    }
  }
  return normalize_contacts(std::move(events));
}

// ---- ratings ---------------------------------------------------------------

struct RawRating {
  UserId user;
  ItemId item;
  int stars = 0;
  std::int64_t timestamp = 0;
};

struct GroundTruthRow {
  UserId user;
  ItemId item;
  Rating value = Rating::negative;

  friend bool operator==(const GroundTruthRow&, const GroundTruthRow&) = default;
};

class GroundTruthRatings {
 public:
  GroundTruthRatings() = default;

  // Throws UsageError on a duplicate (user, item) row. Universes are the given
  // sets extended by every id present in the rows.
  GroundTruthRatings(std::vector<GroundTruthRow> rows, std::vector<UserId> users = {},
                     std::vector<ItemId> items = {}) {
    std::set<UserId> us(users.begin(), users.end());
    std::set<ItemId> is(items.begin(), items.end());
    for (const auto& r : rows) {
      if (!index_.emplace(key(r.user, r.item), r.value).second) {
        throw UsageError("duplicate rating for (" + std::to_string(r.user.value) + ", " +
                         std::to_string(r.item.value) + ")");
      }
      us.insert(r.user);
      is.insert(r.item);
      if (r.value == Rating::positive) positive_raters_[r.item].push_back(r.user);
    }
    for (auto& [item, raters] : positive_raters_) std::sort(raters.begin(), raters.end());
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
      return std::tie(a.user, a.item) < std::tie(b.user, b.item);
    });
    rows_ = std::move(rows);
    users_.assign(us.begin(), us.end());
    items_.assign(is.begin(), is.end());
  }

  const std::vector<GroundTruthRow>& rows() const { return rows_; }
  const std::vector<UserId>& users() const { return users_; }
  const std::vector<ItemId>& items() const { return items_; }

  std::optional<Rating> find(UserId u, ItemId i) const {
    auto it = index_.find(key(u, i));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool positive(UserId u, ItemId i) const { return find(u, i) == Rating::positive; }

  // Users who rated the item positively, ascending.
  const std::vector<UserId>& positive_raters(ItemId i) const {
    static const std::vector<UserId> none;
    auto it = positive_raters_.find(i);
    return it == positive_raters_.end() ? none : it->second;
  }

 private:
  static std::pair<std::int64_t, std::int64_t> key(UserId u, ItemId i) { return {u.value, i.value}; }

  struct PairHash {
    std::size_t operator()(const std::pair<std::int64_t, std::int64_t>& p) const noexcept {
      return std::hash<std::int64_t>{}(p.first * 1000003 ^ p.second);
    }
  };

  std::vector<GroundTruthRow> rows_;
  std::vector<UserId> users_;
  std::vector<ItemId> items_;
  std::unordered_map<std::pair<std::int64_t, std::int64_t>, Rating, PairHash> index_;
  std::map<ItemId, std::vector<UserId>> positive_raters_;
};

inline Rating binarize(int stars, int threshold) {
  return stars >= threshold ? Rating::positive : Rating::negative;
}

inline GroundTruthRatings binarize(const std::vector<RawRating>& raw, int threshold) {
  std::vector<GroundTruthRow> rows;
  rows.reserve(raw.size());
  for (const auto& r : raw) rows.push_back({r.user, r.item, binarize(r.stars, threshold)});
  return GroundTruthRatings(std::move(rows));
}

inline std::vector<RawRating> parse_raw_ratings(std::istream& in, const std::string& name = "<ratings>") {
  std::vector<RawRating> out;
  std::set<std::pair<std::int64_t, std::int64_t>> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream fields(line);
    std::string probe;
    if (!(fields >> probe)) continue;
    fields.clear();
    fields.seekg(0);
    auto user = detail::read_number<std::int64_t>(fields);
    auto item = detail::read_number<std::int64_t>(fields);
    auto stars = detail::read_number<int>(fields);
    auto ts = detail::read_number<std::int64_t>(fields);
    std::string extra;
    if (!user || !item || !stars || !ts || (fields >> extra)) {
      throw ParseError(name, lineno, "expected '<user>\\t<item>\\t<rating>\\t<timestamp>'");
    }
    if (*stars < 1 || *stars > 5) throw ParseError(name, lineno, "rating outside 1..5");
    if (!seen.emplace(*user, *item).second) throw ParseError(name, lineno, "duplicate (user, item) rating");
    out.push_back({UserId{*user}, ItemId{*item}, *stars, *ts});
  }
  return out;
}

inline GroundTruthRatings parse_ratings(std::istream& in, int threshold = 4, const std::string& name = "<ratings>") {
  return binarize(parse_raw_ratings(in, name), threshold);
}

inline GroundTruthRatings parse_ratings(const std::string& path, int threshold = 4) {
  auto in = detail::open_input(path);
  return parse_ratings(in, threshold, path);
}

inline void write_raw_ratings(std::ostream& out, const std::vector<RawRating>& rows) {
  for (const auto& r : rows) {
    out << r.user << '\t' << r.item << '\t' << r.stars << '\t' << r.timestamp << '\n';
  }
}

// MovieLens-shaped synthetic ratings with taste structure: users and items
// fall into groups, and a user's stars for an item depend on the affinity
// between the two groups plus noise. Each user rates roughly `density` of
// the catalogue, biased towards popular items.
template <class Rng>
std::vector<RawRating> synth_ratings(std::size_t n_users, std::size_t n_items, double density,
                                     std::size_t n_groups, Rng& rng) {
  if (n_users == 0 || n_items == 0 || n_groups == 0 || !(density > 0 && density <= 1)) {
    throw UsageError("synth_ratings: invalid parameters");
  }
  std::uniform_int_distribution<std::size_t> pick_group(0, n_groups - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.6);
  std::vector<std::size_t> user_group(n_users), item_group(n_items);
  for (auto& g : user_group) g = pick_group(rng);
  for (auto& g : item_group) g = pick_group(rng);
  // Affinity of user group a for item group b in stars.
  std::vector<double> affinity(n_groups * n_groups);
  for (std::size_t a = 0; a < n_groups; ++a) {
    for (std::size_t b = 0; b < n_groups; ++b) {
      affinity[a * n_groups + b] = a == b ? 4.6 : 1.5 + 1.5 * unit(rng);
    }
  }
  // Zipf-like popularity so that some items gather many ratings.
  std::vector<double> popularity(n_items);
  for (std::size_t i = 0; i < n_items; ++i) popularity[i] = 1.0 / std::sqrt(1.0 + static_cast<double>(i));
  std::shuffle(popularity.begin(), popularity.end(), rng);
  double mean_pop = 0;
  for (double p : popularity) mean_pop += p;
  mean_pop /= static_cast<double>(n_items);

  std::vector<RawRating> out;
  for (std::size_t u = 0; u < n_users; ++u) {
    for (std::size_t i = 0; i < n_items; ++i) {
      const double affine = user_group[u] == item_group[i] ? 2.0 : 0.7;
      const double p = std::min(1.0, density * affine * popularity[i] / mean_pop);
      if (unit(rng) >= p) continue;
      const double s = affinity[user_group[u] * n_groups + item_group[i]] + noise(rng);
      const int stars = static_cast<int>(std::clamp(std::lround(s), 1L, 5L));
      out.push_back({UserId{static_cast<std::int64_t>(u + 1)}, ItemId{static_cast<std::int64_t>(i + 1)}, stars,
                     static_cast<std::int64_t>(880000000 + out.size())});
    }
  }
  return out;
}

// Uniform random subsets of users and items; every row inside the chosen
// cross product is kept.
template <class Rng>
GroundTruthRatings reduce_dataset(const GroundTruthRatings& gt, std::size_t n_users, std::size_t n_items, Rng& rng) {
  if (n_users > gt.users().size() || n_items > gt.items().size()) {
    throw UsageError("reduce_dataset: requested " + std::to_string(n_users) + " users / " +
                     std::to_string(n_items) + " items from a universe of " +
                     std::to_string(gt.users().size()) + " / " + std::to_string(gt.items().size()));
  }
  std::vector<UserId> users;
  std::vector<ItemId> items;
  std::sample(gt.users().begin(), gt.users().end(), std::back_inserter(users), n_users, rng);
  std::sample(gt.items().begin(), gt.items().end(), std::back_inserter(items), n_items, rng);
  const std::set<UserId> keep_u(users.begin(), users.end());
  const std::set<ItemId> keep_i(items.begin(), items.end());
  std::vector<GroundTruthRow> rows;
  for (const auto& r : gt.rows()) {
    if (keep_u.contains(r.user) && keep_i.contains(r.item)) rows.push_back(r);
  }
  return GroundTruthRatings(std::move(rows), std::move(users), std::move(items));
}

// ---- roles -----------------------------------------------------------------

struct RoleAssignment {
  std::vector<NodeId> publishers;
  std::vector<NodeId> subscribers;
  std::vector<NodeId> relays;
  std::map<NodeId, std::vector<ItemId>> item_pool;     // publisher -> items
  std::map<NodeId, std::vector<UserId>> users_of;      // subscriber -> users
  std::map<UserId, NodeId> home;                       // user -> subscriber
};

// Which nodes are well connected enough to publish or subscribe.
struct Eligibility {
  std::size_t min_contacts = 10;
  Bytes min_contact_bytes = 0;
  std::map<NodeId, std::pair<std::size_t, Bytes>> observed;  // node -> (contacts, bytes)

  static Eligibility from_trace(const std::vector<ContactEvent>& events, double bandwidth, std::size_t min_contacts,
                                Bytes min_contact_bytes) {
    Eligibility e{min_contacts, min_contact_bytes, {}};
    for (const auto& c : events) {
      for (auto n : {c.node_a, c.node_b}) {
        auto& [count, bytes] = e.observed[n];
        ++count;
        bytes += c.capacity(bandwidth);
      }
    }
    return e;
  }

  bool admits(NodeId n) const {
    auto it = observed.find(n);
    if (it == observed.end()) return min_contacts == 0 && min_contact_bytes <= 0;
    return it->second.first >= min_contacts && it->second.second >= min_contact_bytes;
  }

  std::string describe() const {
    return ">= " + std::to_string(min_contacts) + " contacts and >= " + std::to_string(min_contact_bytes) +
           " contact bytes";
  }
};

// Publishers and subscribers are drawn from eligible nodes; everything else
// relays. Items go to a uniformly random publisher and users are spread
// round-robin over shuffled subscribers, so each user lives on exactly one
// node.
template <class Rng>
RoleAssignment assign_roles(std::vector<NodeId> node_ids, std::size_t n_publishers, std::size_t n_subscribers,
                            const GroundTruthRatings& gt, Rng& rng, const Eligibility& eligibility) {
  std::sort(node_ids.begin(), node_ids.end());
  node_ids.erase(std::unique(node_ids.begin(), node_ids.end()), node_ids.end());
  std::vector<NodeId> eligible;
  for (auto n : node_ids) {
    if (eligibility.admits(n)) eligible.push_back(n);
  }
  if (n_publishers == 0 || n_subscribers == 0) throw ConfigError("need at least one publisher and one subscriber");
  if (eligible.size() < n_publishers + n_subscribers) {
    throw ConfigError("only " + std::to_string(eligible.size()) + " nodes satisfy " + eligibility.describe() +
                      ", need " + std::to_string(n_publishers + n_subscribers));
  }
  std::shuffle(eligible.begin(), eligible.end(), rng);
  RoleAssignment roles;
  roles.publishers.assign(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(n_publishers));
  roles.subscribers.assign(eligible.begin() + static_cast<std::ptrdiff_t>(n_publishers),
                           eligible.begin() + static_cast<std::ptrdiff_t>(n_publishers + n_subscribers));
  std::set<NodeId> taken(roles.publishers.begin(), roles.publishers.end());
  taken.insert(roles.subscribers.begin(), roles.subscribers.end());
  for (auto n : node_ids) {
    if (!taken.contains(n)) roles.relays.push_back(n);
  }

  std::uniform_int_distribution<std::size_t> pick(0, n_publishers - 1);
  for (auto p : roles.publishers) roles.item_pool[p];
  for (auto i : gt.items()) roles.item_pool[roles.publishers[pick(rng)]].push_back(i);

  std::vector<UserId> users = gt.users();
  std::shuffle(users.begin(), users.end(), rng);
  for (auto s : roles.subscribers) roles.users_of[s];
  for (std::size_t k = 0; k < users.size(); ++k) {
    const auto node = roles.subscribers[k % n_subscribers];
    roles.users_of[node].push_back(users[k]);
    roles.home[users[k]] = node;
  }
  for (auto& [node, us] : roles.users_of) std::sort(us.begin(), us.end());

  std::sort(roles.publishers.begin(), roles.publishers.end());
  std::sort(roles.subscribers.begin(), roles.subscribers.end());
  return roles;
}

}  // namespace cofigel
