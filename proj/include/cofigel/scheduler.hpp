#pragma once

// Transfer-queue ordering policies. Only the key differs between them; all
// return the same eligible set (forwardable, unexpired, not held by the peer)
// sorted by key descending with ties broken by ascending item id.

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cofigel/node.hpp"
#include "cofigel/rating_matrix.hpp"
#include "cofigel/trace_io.hpp"
#include "cofigel/utility.hpp"

namespace cofigel {

enum class SchedulerKind : std::uint8_t {
  cofigel,
  cofigel_3g,
  no_delivery_time,
  no_coverage,
  no_item_recall,
  ground_truth,
};

inline constexpr SchedulerKind kAllSchedulers[] = {
    SchedulerKind::cofigel,     SchedulerKind::cofigel_3g,     SchedulerKind::no_delivery_time,
    SchedulerKind::no_coverage, SchedulerKind::no_item_recall, SchedulerKind::ground_truth,
};

inline std::string_view scheduler_name(SchedulerKind k) {
  switch (k) {
    case SchedulerKind::cofigel: return "CoFiGel";
    case SchedulerKind::cofigel_3g: return "CoFiGel3G";
    case SchedulerKind::no_delivery_time: return "NoDeliveryTime";
    case SchedulerKind::no_coverage: return "NoCoverage";
    case SchedulerKind::no_item_recall: return "NoItemRecall";
    case SchedulerKind::ground_truth: return "GroundTruth";
  }
  return "?";
}

// Case-insensitive.
inline std::optional<SchedulerKind> parse_scheduler(std::string_view s) {
  auto lower = [](std::string_view v) {
    std::string out(v);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
  };
  const auto want = lower(s);
  for (auto k : kAllSchedulers) {
    if (lower(scheduler_name(k)) == want) return k;
  }
  return std::nullopt;
}

// Everything a policy may consult besides the two nodes. The global matrix is
// set only for CoFiGel3G, ground truth and the global holding query only for
// GroundTruth.
struct SchedulingContext {
  SchedulerKind kind = SchedulerKind::cofigel;
  const ItemCatalog* catalog = nullptr;
  const std::map<UserId, NodeId>* home = nullptr;
  const RatingMatrix* global_matrix = nullptr;
  const GroundTruthRatings* ground_truth = nullptr;
  std::function<bool(NodeId, ItemId)> holds;
  std::size_t top_k = 10;
  double bootstrap_fraction = 0.01;
  ContactStats contact_prior{1.0 / 3600.0, 1.0e6};
};

namespace detail {

inline const RatingMatrix& rating_view(const NodeState& node, const SchedulingContext& ctx) {
  if (ctx.kind == SchedulerKind::cofigel_3g && ctx.global_matrix != nullptr) return *ctx.global_matrix;
  return node.matrix;
}

inline bool has_rating_identity(const NodeState& n) { return n.role == NodeRole::subscriber && !n.users.empty(); }

}  // namespace detail

// n, g+ and r+ (with bootstrap floor) from the rating view alone.
inline ItemStats rating_stats(const RatingMatrix& m, ItemId item, const SchedulingContext& ctx) {
  ItemStats s;
  s.item = item;
  s.n = m.user_count();
  s.r_plus = bootstrap_floor(s.n, ctx.bootstrap_fraction);
  if (m.has_item(item)) {
    s.g_plus = static_cast<double>(m.positive_predictions(item, ctx.top_k));
    s.r_plus = std::max(s.r_plus, static_cast<double>(m.positive_count(item)));
  }
  return s;
}

// rating_stats plus H_i (nodes with a queue-position observation, and the
// node itself) and N_i (positively predicted users whose node is not in H_i).
inline ItemStats local_item_stats(const NodeState& node, ItemId item, const SchedulingContext& ctx) {
  const RatingMatrix& m = detail::rating_view(node, ctx);
  ItemStats s = rating_stats(m, item, ctx);
  s.holders = node.sigma.holders(item);
  if (!std::binary_search(s.holders.begin(), s.holders.end(), node.id)) {
    s.holders.insert(std::lower_bound(s.holders.begin(), s.holders.end(), node.id), node.id);
  }
  if (m.has_item(item)) {
    for (auto u : m.positive_prediction_users(item, ctx.top_k)) {
      auto it = ctx.home->find(u);
      if (it != ctx.home->end() && std::binary_search(s.holders.begin(), s.holders.end(), it->second)) continue;
      s.targets.push_back(u);
    }
  }
  return s;
}

// Policy key of `item` held by `node` when facing `peer`.
inline double policy_key(const NodeState& node, const NodeState& peer, ItemId item, const SchedulingContext& ctx,
                         Seconds now) {
  const Item& it = ctx.catalog->at(item);
  switch (ctx.kind) {
    case SchedulerKind::cofigel:
    case SchedulerKind::cofigel_3g: {
      const auto stats = local_item_stats(node, item, ctx);
      return utility(stats, node.sigma, node.contacts.stats(now, ctx.contact_prior), it.expiry_time - now);
    }
    case SchedulerKind::no_delivery_time: {
      const auto stats = rating_stats(node.matrix, item, ctx);
      return (stats.g_plus + stats.r_plus) * rating_gain_bound(stats);
    }
    case SchedulerKind::no_coverage: {
      const RatingMatrix& m = node.matrix;
      if (!m.has_item(item)) return 0.0;
      if (!detail::has_rating_identity(peer)) {
        const auto stats = rating_stats(m, item, ctx);
        return stats.g_plus + stats.r_plus;
      }
      double best = 0.0;
      for (auto u : peer.users) {
        if (!m.has_user(u) || m.is_rated(u, item)) continue;
        best = std::max(best, m.rank(u, item).value_or(0.0));
      }
      return best;
    }
    case SchedulerKind::no_item_recall: {
      const RatingMatrix& m = node.matrix;
      if (!m.has_item(item)) return 0.0;
      const auto candidates = detail::has_rating_identity(peer) ? peer.users : m.unrated_users(item);
      std::size_t best = 0;
      for (auto u : candidates) {
        if (!m.has_user(u) || m.is_rated(u, item)) continue;
        best = std::max(best, m.coverage_gain(u, item));
      }
      return static_cast<double>(best);
    }
    case SchedulerKind::ground_truth: {
      if (ctx.ground_truth == nullptr || !ctx.holds) throw UsageError("GroundTruth policy needs ground truth");
      std::size_t unreached = 0;
      for (auto u : ctx.ground_truth->positive_raters(item)) {
        auto h = ctx.home->find(u);
        if (h != ctx.home->end() && !ctx.holds(h->second, item)) ++unreached;
      }
      return static_cast<double>(unreached);
    }
  }
  return 0.0;
}

// All of node's forwardable items in policy order (the node's transfer
// queue), regardless of what the peer holds.
inline std::vector<ItemId> rank_items(const NodeState& node, const NodeState& peer, const SchedulingContext& ctx,
                                      Seconds now) {
  std::vector<std::pair<double, ItemId>> keyed;
  for (auto i : node.forwardable(*ctx.catalog, now)) keyed.emplace_back(policy_key(node, peer, i, ctx, now), i);
  std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<ItemId> out;
  out.reserve(keyed.size());
  for (const auto& [k, i] : keyed) out.push_back(i);
  return out;
}

inline std::vector<ItemId> order_queue(const NodeState& node, const NodeState& peer, const SchedulingContext& ctx,
                                       Seconds now) {
  auto queue = rank_items(node, peer, ctx, now);
  std::erase_if(queue, [&](ItemId i) { return peer.holds(i); });
  return queue;
}

// Stores the queue on the node and records each item's byte offset in it.
inline void record_queue_positions(NodeState& node, std::vector<ItemId> queue, const ItemCatalog& catalog,
                                   Seconds now) {
  Bytes offset = 0;
  for (auto i : queue) {
    node.sigma.record(i, node.id, offset, now);
    offset += catalog.at(i).size;
  }
  node.transfer_queue = std::move(queue);
}

}  // namespace cofigel
