#pragma once

// Per-item transfer utility U = (g+ + r+) * G * D built from node-local
// statistics only.
//
//   G  concentration bound on the chance that the item's positive predictions
//      are all confirmed and grow further (E[Omega] estimated by r+).
//   D  complement of the Markov bound on the item missing its deadline, with
//      the FIFO wait estimated from last known queue positions.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "cofigel/types.hpp"

namespace cofigel {

struct ItemStats {
  ItemId item;
  std::size_t n = 0;   // total users
  double g_plus = 0;   // current positive predictions
  double r_plus = 0;   // confirmed positive ratings, bootstrap floor applied
  std::vector<NodeId> holders;  // H_i
  std::vector<UserId> targets;  // N_i
};

struct ContactStats {
  double lambda = 0.0;             // contacts per second
  double bytes_per_contact = 0.0;  // mean transferable bytes per contact

  double service_rate() const { return lambda * bytes_per_contact; }
};

// Running record of a node's own contacts. Before the first contact (or at
// t = 0) the configured priors are reported.
class ContactHistory {
 public:
  void record(Bytes capacity) {
    ++count_;
    total_bytes_ += static_cast<double>(capacity);
  }

  std::size_t count() const { return count_; }

  ContactStats stats(Seconds now, const ContactStats& prior) const {
    ContactStats s = prior;
    if (count_ > 0 && now > 0.0) s.lambda = static_cast<double>(count_) / now;
    if (count_ > 0 && total_bytes_ > 0.0) s.bytes_per_contact = total_bytes_ / static_cast<double>(count_);
    return s;
  }

 private:
  std::size_t count_ = 0;
  double total_bytes_ = 0.0;
};

// Last known byte offset of each item in each holder's transfer queue.
class QueuePositionMatrix {
 public:
  struct Observation {
    Bytes position = 0;
    Seconds observed_at = 0.0;

    friend bool operator==(const Observation&, const Observation&) = default;
  };

  void record(ItemId item, NodeId node, Bytes position, Seconds now) {
    if (position < 0) throw UsageError("queue position must be nonnegative");
    auto& row = table_[item];
    auto it = std::lower_bound(row.begin(), row.end(), node, by_node);
    if (it != row.end() && it->first == node) {
      it->second = {position, now};
    } else {
      row.insert(it, {node, {position, now}});
    }
  }

  std::optional<Observation> find(ItemId item, NodeId node) const {
    auto it = table_.find(item);
    if (it == table_.end()) return std::nullopt;
    const auto& row = it->second;
    auto jt = std::lower_bound(row.begin(), row.end(), node, by_node);
    if (jt == row.end() || jt->first != node) return std::nullopt;
    return jt->second;
  }

  // Missing observations read as 0.
  Bytes position(ItemId item, NodeId node) const {
    auto o = find(item, node);
    return o ? o->position : 0;
  }

  // Nodes with any observation for the item, ascending.
  std::vector<NodeId> holders(ItemId item) const {
    std::vector<NodeId> out;
    if (auto it = table_.find(item); it != table_.end()) {
      out.reserve(it->second.size());
      for (const auto& [node, obs] : it->second) out.push_back(node);
    }
    return out;
  }

  // Freshest observation wins; equal timestamps keep the smaller position.
  bool merge_from(const QueuePositionMatrix& other) {
    bool changed = false;
    std::vector<Entry> merged;
    for (const auto& [item, theirs] : other.table_) {
      auto& mine = table_[item];
      if (mine == theirs) continue;
      merged.clear();
      merged.reserve(mine.size() + theirs.size());
      auto a = mine.begin();
      auto b = theirs.begin();
      while (a != mine.end() || b != theirs.end()) {
        if (b == theirs.end() || (a != mine.end() && a->first < b->first)) {
          merged.push_back(*a++);
        } else if (a == mine.end() || b->first < a->first) {
          merged.push_back(*b++);
          changed = true;
        } else {
          if (fresher(b->second, a->second)) {
            merged.push_back(*b);
            changed = true;
          } else {
            merged.push_back(*a);
          }
          ++a;
          ++b;
        }
      }
      mine.swap(merged);
    }
    return changed;
  }

  // Drops every observation of an item (used once it has expired everywhere).
  void erase(ItemId item) { table_.erase(item); }

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& [item, row] : table_) n += row.size();
    return n;
  }

  friend bool operator==(const QueuePositionMatrix&, const QueuePositionMatrix&) = default;

 private:
  using Entry = std::pair<NodeId, Observation>;

  static bool by_node(const Entry& e, NodeId n) { return e.first < n; }

  static bool fresher(const Observation& x, const Observation& y) {
    return x.observed_at > y.observed_at || (x.observed_at == y.observed_at && x.position < y.position);
  }

  std::map<ItemId, std::vector<Entry>> table_;
};

// max(1, ceil(fraction * n)): the r+ floor used before enough ratings exist.
inline double bootstrap_floor(std::size_t n, double fraction) {
  return std::max(1.0, std::ceil(fraction * static_cast<double>(n)));
}

// G_i = min{1, exp(r+^2 / (n - r+)) * (1 - r+/n)^(r+ + g+)}, evaluated in log
// space. 0 once every user has rated the item.
inline double rating_gain_bound(const ItemStats& s) {
  const double n = static_cast<double>(s.n);
  const double r = s.r_plus;
  if (r >= n) return 0.0;
  const double log_bound = r * r / (n - r) + (r + s.g_plus) * std::log1p(-r / n);
  return std::exp(std::min(0.0, log_bound));
}

// mu_i = sum of holders' queue positions / (rho * |H_i|), rho = lambda * B in
// bytes per second.
inline Seconds mean_wait(const QueuePositionMatrix& sigma, ItemId item, const ContactStats& cs,
                         std::span<const NodeId> holders) {
  if (holders.empty()) throw UsageError("mean_wait: item has no holders");
  const double rho = cs.service_rate();
  if (!(rho > 0.0)) throw UsageError("mean_wait: contact statistics not initialised");
  double total = 0.0;
  for (auto v : holders) total += static_cast<double>(sigma.position(item, v));
  return total / (rho * static_cast<double>(holders.size()));
}

// D_i = 1 - min{1, |N_i| * mu_i / t}; an expired item is worth nothing.
inline double delivery_factor(Seconds mu, std::size_t n_targets, Seconds t_remaining) {
  if (t_remaining <= 0.0) return 0.0;
  return 1.0 - std::min(1.0, static_cast<double>(n_targets) * mu / t_remaining);
}

inline double utility(const ItemStats& s, const QueuePositionMatrix& sigma, const ContactStats& cs,
                      Seconds t_remaining) {
  if (t_remaining <= 0.0) return 0.0;
  const double g = rating_gain_bound(s);
  const double d = delivery_factor(mean_wait(sigma, s.item, cs, s.holders), s.targets.size(), t_remaining);
  return (s.g_plus + s.r_plus) * g * d;
}

}  // namespace cofigel
