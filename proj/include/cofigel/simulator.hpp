#pragma once

// Deterministic trace-driven engine. Events are processed in (time, kind,
// node ids, item) order, kinds ordered expiry < publish < contact < snapshot.
// A contact is handled atomically at its start time: metadata exchange (rating
// matrices, queue positions, contact history), then the lower node id pushes
// items to the other, then the reverse direction. Each direction may use the
// full contact capacity; an item that does not fit the residual capacity ends
// the direction (its partial transfer is discarded).

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "cofigel/metrics.hpp"
#include "cofigel/node.hpp"
#include "cofigel/rating_matrix.hpp"
#include "cofigel/scheduler.hpp"
#include "cofigel/trace_io.hpp"
#include "cofigel/transfer_log.hpp"
#include "cofigel/utility.hpp"

namespace cofigel {

struct SimConfig {
  Seconds duration = 6 * 3600.0;
  Seconds warmup = 3600.0;
  Seconds cooldown = 3600.0;
  Seconds report_interval = 600.0;  // 0 disables snapshots
  double bandwidth = 375000.0;      // bytes per second
  Bytes item_size = 11'000'000;
  Bytes buffer_size = 2'000'000'000;
  Seconds item_lifetime = 2 * 3600.0;
  double publish_rate = 20.0;  // items per hour per publisher
  std::size_t top_k = 10;
  double bootstrap_fraction = 0.01;
  Bytes metadata_cost = 0;
  ContactStats contact_prior{1.0 / 600.0, 375000.0 * 30.0};
  // Role assignment, used when run() has to assign roles itself.
  std::size_t publishers = 22;
  std::size_t subscribers = 56;
  std::size_t min_contacts = 10;
  double min_contact_items = 10.0;  // eligibility, in item sizes of contact bytes
};

// Empty iff runnable. Each message starts with the offending key.
inline std::vector<std::string> validate(const SimConfig& c) {
  std::vector<std::string> d;
  auto positive = [&](const char* key, double v) {
    if (!(v > 0)) d.push_back(std::string(key) + ": must be positive");
  };
  positive("duration", c.duration);
  positive("bandwidth", c.bandwidth);
  positive("item_size", static_cast<double>(c.item_size));
  positive("buffer_size", static_cast<double>(c.buffer_size));
  positive("item_lifetime", c.item_lifetime);
  positive("publish_rate", c.publish_rate);
  positive("bootstrap_fraction", c.bootstrap_fraction);
  if (c.top_k == 0) d.push_back("top_k: must be positive");
  if (c.warmup < 0) d.push_back("warmup: must be nonnegative");
  if (c.cooldown < 0) d.push_back("cooldown: must be nonnegative");
  if (c.report_interval < 0) d.push_back("report_interval: must be nonnegative");
  if (c.metadata_cost < 0) d.push_back("metadata_cost: must be nonnegative");
  if (c.warmup >= c.duration) d.push_back("warmup: must be shorter than duration");
  if (c.warmup + c.cooldown >= c.duration) d.push_back("cooldown: warmup + cooldown must be shorter than duration");
  if (c.publishers == 0) d.push_back("publishers: must be positive");
  if (c.subscribers == 0) d.push_back("subscribers: must be positive");
  if (c.bootstrap_fraction > 1) d.push_back("bootstrap_fraction: must be at most 1");
  if (!(c.contact_prior.lambda > 0)) d.push_back("prior_contact_rate: must be positive");
  if (!(c.contact_prior.bytes_per_contact > 0)) d.push_back("prior_contact_bytes: must be positive");
  return d;
}

struct SimResult {
  SchedulerKind scheduler = SchedulerKind::cofigel;
  std::uint64_t seed = 0;
  TransferLog log;
  std::vector<NodeState> nodes;
  ItemCatalog catalog;  // every published item
  std::vector<UserId> users;
  MetricsReport report;
};

// Stream ids for deriving independent generators from one seed.
enum class RngStream : std::uint32_t { trace = 0, ratings = 1, publish = 2, roles = 3 };

inline std::mt19937_64 make_rng(std::uint64_t seed, RngStream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

inline Eligibility eligibility_for(const SimConfig& c, const std::vector<ContactEvent>& events) {
  return Eligibility::from_trace(events, c.bandwidth, c.min_contacts,
                                 static_cast<Bytes>(std::ceil(c.min_contact_items * static_cast<double>(c.item_size))));
}

class Simulator {
 public:
  Simulator(const SimConfig& config, const std::vector<ContactEvent>& contacts, const GroundTruthRatings& gt,
            const RoleAssignment& roles, SchedulerKind kind, std::uint64_t seed)
      : config_(config), contacts_(contacts), gt_(gt), roles_(roles), kind_(kind), seed_(seed) {
    if (auto d = validate(config_); !d.empty()) throw ConfigError("invalid configuration: " + d.front());
    users_ = gt_.users();
    build_nodes();
    build_events();
    ctx_.kind = kind_;
    ctx_.catalog = &catalog_;
    ctx_.home = &roles_.home;
    ctx_.top_k = config_.top_k;
    ctx_.bootstrap_fraction = config_.bootstrap_fraction;
    ctx_.contact_prior = config_.contact_prior;
    if (kind_ == SchedulerKind::cofigel_3g) ctx_.global_matrix = &global_;
    if (kind_ == SchedulerKind::ground_truth) {
      ctx_.ground_truth = &gt_;
      ctx_.holds = [this](NodeId n, ItemId i) { return node(n).holds(i); };
    }
  }

  SimResult run() {
    for (const auto& e : events_) {
      switch (e.kind) {
        case EventKind::expiry: on_expiry(e.item, e.t); break;
        case EventKind::publish: on_publish(e.item, e.t); break;
        case EventKind::contact: on_contact(e.contact, e.t); break;
        case EventKind::snapshot: series_.push_back(snapshot(e.t)); break;
      }
    }
    SimResult r;
    r.scheduler = kind_;
    r.seed = seed_;
    r.users = users_;
    r.report.series = series_;
    r.report.summary = summarize(snapshot(config_.duration), log_, gt_, catalog_, satisfaction_window(), users_.size());
    r.log = std::move(log_);
    r.nodes = std::move(nodes_);
    r.catalog = std::move(catalog_);
    return r;
  }

  // Items published in [warmup, duration - cooldown).
  MeasurementWindow satisfaction_window() const {
    return {config_.warmup, config_.duration - config_.cooldown};
  }

  // Coverage-style metrics ignore only the cooldown tail.
  MeasurementWindow coverage_window() const { return {0.0, config_.duration - config_.cooldown}; }

 private:
  enum class EventKind : std::uint8_t { expiry = 0, publish = 1, contact = 2, snapshot = 3 };

  struct Event {
    Seconds t = 0.0;
    EventKind kind = EventKind::snapshot;
    NodeId a;
    NodeId b;
    ItemId item;
    std::size_t contact = 0;

    bool operator<(const Event& o) const {
      return std::tie(t, kind, a, b, item, contact) < std::tie(o.t, o.kind, o.a, o.b, o.item, o.contact);
    }
  };

  NodeState& node(NodeId id) { return nodes_[node_index_.at(id)]; }
  const NodeState& node(NodeId id) const { return nodes_[node_index_.at(id)]; }

  void build_nodes() {
    std::set<NodeId> ids;
    for (const auto& c : contacts_) {
      ids.insert(c.node_a);
      ids.insert(c.node_b);
    }
    for (auto n : roles_.publishers) ids.insert(n);
    for (auto n : roles_.subscribers) ids.insert(n);
    for (auto n : roles_.relays) ids.insert(n);
    const std::set<NodeId> pubs(roles_.publishers.begin(), roles_.publishers.end());
    for (auto id : ids) {
      NodeState n;
      n.id = id;
      n.buffer_capacity = config_.buffer_size;
      n.matrix = RatingMatrix(gt_.users(), gt_.items());
      if (pubs.contains(id)) {
        n.role = NodeRole::publisher;
      } else if (auto it = roles_.users_of.find(id); it != roles_.users_of.end()) {
        n.role = NodeRole::subscriber;
        n.users = it->second;
      }
      node_index_[id] = nodes_.size();
      nodes_.push_back(std::move(n));
    }
    global_ = RatingMatrix(gt_.users(), gt_.items());
    if (kind_ == SchedulerKind::ground_truth) oracle_ = RatingMatrix(gt_.users(), gt_.items());
  }

  void build_events() {
    auto rng = make_rng(seed_, RngStream::publish);
    const Seconds interval = 3600.0 / config_.publish_rate;
    const auto n_pub = roles_.publishers.size();
    for (std::size_t p = 0; p < n_pub; ++p) {
      const auto pub = roles_.publishers[p];
      auto pool_it = roles_.item_pool.find(pub);
      if (pool_it == roles_.item_pool.end()) continue;
      auto pool = pool_it->second;
      std::shuffle(pool.begin(), pool.end(), rng);
      const Seconds phase = interval * static_cast<double>(p) / static_cast<double>(n_pub);
      for (std::size_t k = 0; k < pool.size(); ++k) {
        const Seconds t = phase + interval * static_cast<double>(k);
        if (t >= config_.duration) break;
        Item item{pool[k], pub, t, config_.item_size, t + config_.item_lifetime};
        schedule_.emplace(item.id, item);
        events_.push_back({t, EventKind::publish, pub, pub, item.id, 0});
        events_.push_back({item.expiry_time, EventKind::expiry, pub, pub, item.id, 0});
      }
    }
    for (std::size_t c = 0; c < contacts_.size(); ++c) {
      const auto& ev = contacts_[c];
      if (ev.start >= config_.duration) continue;
      events_.push_back({ev.start, EventKind::contact, ev.node_a, ev.node_b, ItemId{}, c});
    }
    if (config_.report_interval > 0) {
      for (std::size_t k = 1;; ++k) {
        const Seconds t = config_.report_interval * static_cast<double>(k);
        if (t > config_.duration) break;
        events_.push_back({t, EventKind::snapshot, NodeId{}, NodeId{}, ItemId{}, 0});
      }
    }
    std::sort(events_.begin(), events_.end());
  }

  double retention_utility(const NodeState& n, ItemId i, Seconds now) const {
    return policy_key(n, n, i, ctx_, now);
  }

  void on_publish(ItemId id, Seconds now) {
    const Item& item = schedule_.at(id);
    catalog_.add(item);
    published_.push_back(id);
    if (oracle_) {
      for (auto u : users_) {
        if (auto r = gt_.find(u, id)) oracle_->apply_rating(u, id, *r, now);
      }
    }
    auto& pub = node(item.publisher);
    // The publisher's own item outranks everything already stored.
    const bool fits = enforce_buffer(pub, item, catalog_, now, [&](ItemId i) {
      return i == id ? std::numeric_limits<double>::infinity() : retention_utility(pub, i, now);
    });
    if (fits) {
      pub.outbox.insert(id);
      pub.buffer_used += item.size;
    }
  }

  void on_expiry(ItemId id, Seconds now) {
    for (auto& n : nodes_) {
      if (n.outbox.contains(id) || n.inbox.contains(id)) expire_items(n, catalog_, now);
      n.sigma.erase(id);
    }
  }

  void on_contact(std::size_t index, Seconds now) {
    const auto& ev = contacts_[index];
    auto& a = node(ev.node_a);
    auto& b = node(ev.node_b);
    const Bytes capacity = ev.capacity(config_.bandwidth);

    a.matrix.merge_from(b.matrix);
    b.matrix.merge_from(a.matrix);
    a.sigma.merge_from(b.sigma);
    b.sigma.merge_from(a.sigma);
    a.contacts.record(capacity);
    b.contacts.record(capacity);

    const Bytes metadata = std::min(capacity, config_.metadata_cost);
    push(a, b, index, capacity, metadata, now);
    push(b, a, index, capacity, metadata, now);
  }

  void push(NodeState& from, NodeState& to, std::size_t index, Bytes capacity, Bytes metadata, Seconds now) {
    auto queue = rank_items(from, to, ctx_, now);
    record_queue_positions(from, queue, catalog_, now);
    Bytes budget = capacity - metadata;
    Bytes used = 0;
    for (auto i : queue) {
      if (to.holds(i)) continue;
      const Item& item = catalog_.at(i);
      if (item.size > budget - used) break;
      const bool accepted =
          enforce_buffer(to, item, catalog_, now, [&](ItemId x) { return retention_utility(to, x, now); });
      if (!accepted) continue;
      used += item.size;
      log_.transfers.push_back({now, from.id, to.id, i, item.size});
      receive(to, item, now);
    }
    log_.contacts.push_back({index, from.id, to.id, capacity, metadata, used});
  }

  void receive(NodeState& n, const Item& item, Seconds now) {
    n.buffer_used += item.size;
    if (n.role != NodeRole::subscriber) {
      n.inbox.insert(item.id);
      return;
    }
    // Users watch right away: record what was predicted, then reveal.
    const RatingMatrix& view = kind_ == SchedulerKind::cofigel_3g ? global_ : n.matrix;
    std::vector<DeliveryRecord> arrivals;
    for (auto u : n.users) {
      if (!delivered_.emplace(u, item.id).second) continue;
      const bool pos = view.has_item(item.id) && view.predicted_positive(u, item.id, config_.top_k);
      arrivals.push_back({now, item.id, u, pos ? Rating::positive : Rating::negative});
    }
    for (const auto& d : arrivals) {
      log_.deliveries.push_back(d);
      reveal_rating(n, d.user, item.id, now);
    }
    n.archive.insert(item.id);
  }

  void reveal_rating(NodeState& n, UserId u, ItemId i, Seconds now) {
    auto r = gt_.find(u, i);
    if (!r) return;
    if (!n.matrix.is_rated(u, i)) n.matrix.apply_rating(u, i, *r, now);
    if (!global_.is_rated(u, i)) global_.apply_rating(u, i, *r, now);
  }

  Snapshot snapshot(Seconds t) const {
    // GroundTruth knows every rating of every published item.
    const RatingMatrix& knowledge = oracle_ ? *oracle_ : global_;
    std::vector<ItemId> measured;
    const auto w = coverage_window();
    for (auto i : published_) {
      if (w.contains(catalog_.at(i).publish_time)) measured.push_back(i);
    }
    Snapshot s;
    s.t = t;
    s.positive_ratings_discovered = positive_ratings_known(knowledge, users_, published_);
    s.coverage = coverage(knowledge, users_, published_);
    s.fcpp = fcpp(knowledge, gt_, users_, measured, config_.top_k);
    return s;
  }

  SimConfig config_;
  const std::vector<ContactEvent>& contacts_;
  const GroundTruthRatings& gt_;
  RoleAssignment roles_;
  SchedulerKind kind_;
  std::uint64_t seed_;

  std::vector<UserId> users_;
  std::vector<NodeState> nodes_;
  std::map<NodeId, std::size_t> node_index_;
  std::map<ItemId, Item> schedule_;
  std::vector<Event> events_;
  ItemCatalog catalog_;
  std::vector<ItemId> published_;
  RatingMatrix global_;
  std::optional<RatingMatrix> oracle_;
  std::set<std::pair<UserId, ItemId>> delivered_;
  TransferLog log_;
  std::vector<Snapshot> series_;
  SchedulingContext ctx_;
};

inline SimResult run(const SimConfig& config, const std::vector<ContactEvent>& contacts, const GroundTruthRatings& gt,
                     const RoleAssignment& roles, SchedulerKind kind, std::uint64_t seed) {
  return Simulator(config, contacts, gt, roles, kind, seed).run();
}

// Assigns roles from the seed, then runs.
inline SimResult run(const SimConfig& config, const std::vector<ContactEvent>& contacts, const GroundTruthRatings& gt,
                     SchedulerKind kind, std::uint64_t seed) {
  auto rng = make_rng(seed, RngStream::roles);
  const auto roles = assign_roles(trace_nodes(contacts), config.publishers, config.subscribers, gt, rng,
                                  eligibility_for(config, contacts));
  return run(config, contacts, gt, roles, kind, seed);
}

}  // namespace cofigel
