#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cofigel/rating_matrix.hpp"
#include "cofigel/types.hpp"
#include "cofigel/utility.hpp"

namespace cofigel {

struct Item {
  ItemId id;
  NodeId publisher;
  Seconds publish_time = 0.0;
  Bytes size = 0;
  Seconds expiry_time = 0.0;

  bool expired(Seconds now) const { return expiry_time <= now; }
};

// Published items by id.
class ItemCatalog {
 public:
  void add(const Item& item) {
    if (item.size <= 0) throw UsageError("item size must be positive");
    if (!(item.expiry_time > item.publish_time)) throw UsageError("item must expire after it is published");
    items_[item.id] = item;
  }

  bool contains(ItemId id) const { return items_.contains(id); }

  const Item& at(ItemId id) const {
    auto it = items_.find(id);
    if (it == items_.end()) throw UsageError("item " + std::to_string(id.value) + " was never published");
    return it->second;
  }

  std::size_t size() const { return items_.size(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

 private:
  std::map<ItemId, Item> items_;
};

enum class NodeRole : std::uint8_t { publisher, subscriber, relay };

struct NodeState {
  NodeId id;
  NodeRole role = NodeRole::relay;
  std::vector<UserId> users;  // users living on a subscriber node
  std::set<ItemId> outbox;
  std::set<ItemId> inbox;
  std::set<ItemId> archive;
  Bytes buffer_used = 0;
  Bytes buffer_capacity = 0;
  RatingMatrix matrix;
  QueuePositionMatrix sigma;
  ContactHistory contacts;
  std::vector<ItemId> transfer_queue;

  bool holds(ItemId i) const { return outbox.contains(i) || inbox.contains(i) || archive.contains(i); }

  Bytes free_space() const { return buffer_capacity - buffer_used; }

  // Stored, unexpired items in ascending id order.
  std::vector<ItemId> forwardable(const ItemCatalog& catalog, Seconds now) const {
    std::set<ItemId> all(outbox.begin(), outbox.end());
    all.insert(inbox.begin(), inbox.end());
    all.insert(archive.begin(), archive.end());
    std::vector<ItemId> out;
    for (auto i : all) {
      if (!catalog.at(i).expired(now)) out.push_back(i);
    }
    return out;
  }

  void remove(ItemId i, const ItemCatalog& catalog) {
    if (outbox.erase(i) + inbox.erase(i) + archive.erase(i) > 0) buffer_used -= catalog.at(i).size;
    std::erase(transfer_queue, i);
  }
};

// Drops expired items from outbox and inbox. Archived items stay on the
// device (they are never forwarded again).
inline void expire_items(NodeState& node, const ItemCatalog& catalog, Seconds now) {
  std::vector<ItemId> gone;
  for (const auto* box : {&node.outbox, &node.inbox}) {
    for (auto i : *box) {
      if (catalog.at(i).expired(now)) gone.push_back(i);
    }
  }
  for (auto i : gone) node.remove(i, catalog);
  std::erase_if(node.transfer_queue, [&](ItemId i) { return catalog.at(i).expired(now); });
}

// Makes room for `incoming` if possible. Expired items go first (archive
// included, nobody will watch or forward them again); then non-archive items
// whose utility is strictly below the incoming item's, lowest first, ties by
// ascending id. Nothing live is evicted unless the item then fits. The caller
// stores the item when this returns true.
template <class UtilityFn>
bool enforce_buffer(NodeState& node, const Item& incoming, const ItemCatalog& catalog, Seconds now,
                    UtilityFn&& utility_of) {
  if (incoming.size > node.buffer_capacity) return false;
  if (node.free_space() >= incoming.size) return true;

  std::vector<ItemId> expired;
  for (const auto* box : {&node.outbox, &node.inbox, &node.archive}) {
    for (auto i : *box) {
      if (catalog.at(i).expired(now)) expired.push_back(i);
    }
  }
  std::sort(expired.begin(), expired.end());
  for (auto i : expired) {
    if (node.free_space() >= incoming.size) return true;
    node.remove(i, catalog);
  }
  if (node.free_space() >= incoming.size) return true;

  const double bar = utility_of(incoming.id);
  std::vector<std::pair<double, ItemId>> victims;
  for (const auto* box : {&node.outbox, &node.inbox}) {
    for (auto i : *box) {
      const double u = utility_of(i);
      if (u < bar) victims.emplace_back(u, i);
    }
  }
  std::sort(victims.begin(), victims.end());
  Bytes reclaimable = node.free_space();
  for (const auto& [u, i] : victims) reclaimable += catalog.at(i).size;
  if (reclaimable < incoming.size) return false;
  for (const auto& [u, i] : victims) {
    if (node.free_space() >= incoming.size) break;
    node.remove(i, catalog);
  }
  return true;
}

}  // namespace cofigel
