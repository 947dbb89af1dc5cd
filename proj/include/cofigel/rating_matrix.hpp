#pragma once

// Item-based memory collaborative filtering over binary ratings.
//
// Unrated cells count as 0 in the cosine similarity, so only positive ratings
// contribute to Sim(i, j). A rated-negative cell is still "rated": it is never
// ranked or recommended.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include <boost/dynamic_bitset.hpp>

#include "cofigel/types.hpp"

namespace cofigel {

enum class Rating : std::uint8_t { negative = 0, positive = 1 };

enum class EntryStatus : std::uint8_t { rated, predicted, unpredictable };

struct RatedEntry {
  Rating value = Rating::negative;
  Seconds timestamp = 0.0;

  friend bool operator==(const RatedEntry&, const RatedEntry&) = default;
};

// Full view of one cell. `value` is the rating for rated cells and the top-k
// label for predicted ones; `timestamp` is set iff status == rated.
struct RatingEntry {
  Rating value = Rating::negative;
  EntryStatus status = EntryStatus::unpredictable;
  std::optional<Seconds> timestamp;
};

struct PredictionResult {
  UserId user;
  ItemId item;
  double rank = 0.0;
  Rating label = Rating::negative;
};

using UserSet = boost::dynamic_bitset<std::uint64_t>;

namespace detail {

// Shared by every code path that produces a similarity so that all of them
// agree to the last bit.
inline double cosine(std::size_t common, std::size_t count_a, std::size_t count_b) {
  if (common == 0) return 0.0;
  return static_cast<double>(common) /
         (std::sqrt(static_cast<double>(count_a)) * std::sqrt(static_cast<double>(count_b)));
}

}  // namespace detail

class RatingMatrix {
 public:
  RatingMatrix() = default;

  RatingMatrix(std::span<const UserId> users, std::span<const ItemId> items) {
    for (auto u : users) add_user(u);
    for (auto i : items) add_item(i);
  }

  void add_user(UserId u) {
    if (user_index_.contains(u)) return;
    user_index_.emplace(u, user_ids_.size());
    user_ids_.push_back(u);
    for (auto& p : item_positive_) p.push_back(false);
    for (auto& r : item_rated_) r.push_back(false);
    user_positive_.emplace_back(item_ids_.size());
    ++version_;
  }

  void add_item(ItemId i) {
    if (item_index_.contains(i)) return;
    item_index_.emplace(i, item_ids_.size());
    item_ids_.push_back(i);
    entries_.emplace_back();
    item_positive_.emplace_back(user_ids_.size());
    item_rated_.emplace_back(user_ids_.size());
    for (auto& p : user_positive_) p.push_back(false);
    ++version_;
  }

  bool has_user(UserId u) const { return user_index_.contains(u); }
  bool has_item(ItemId i) const { return item_index_.contains(i); }
  std::size_t user_count() const { return user_ids_.size(); }
  std::size_t item_count() const { return item_ids_.size(); }

  std::vector<UserId> users() const { return sorted(user_ids_); }
  std::vector<ItemId> items() const { return sorted(item_ids_); }

  // Bumped on every observable change; caches key off it.
  std::uint64_t version() const { return version_; }

  std::size_t rated_count() const { return rated_count_; }

  std::optional<RatedEntry> rated(UserId u, ItemId i) const {
    const auto ui = static_cast<std::uint32_t>(user_idx(u));
    const auto& row = entries_[item_idx(i)];
    auto it = std::lower_bound(row.begin(), row.end(), ui, by_user);
    if (it == row.end() || it->first != ui) return std::nullopt;
    return it->second;
  }

  bool is_rated(UserId u, ItemId i) const { return item_rated_[item_idx(i)][user_idx(u)]; }

  // Number of positive ratings observed for the item.
  std::size_t positive_count(ItemId i) const { return item_positive_[item_idx(i)].count(); }

  std::size_t positive_total() const {
    std::size_t n = 0;
    for (const auto& p : item_positive_) n += p.count();
    return n;
  }

  // Rated entries sorted by (user, item).
  std::vector<std::tuple<UserId, ItemId, RatedEntry>> rated_entries() const {
    std::vector<std::tuple<UserId, ItemId, RatedEntry>> out;
    out.reserve(rated_count_);
    for (std::size_t ii = 0; ii < entries_.size(); ++ii) {
      for (const auto& [ui, e] : entries_[ii]) out.emplace_back(user_ids_[ui], item_ids_[ii], e);
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
      return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
    });
    return out;
  }

  void apply_rating(UserId u, ItemId i, Rating value, Seconds now) {
    const auto ui = user_idx(u);
    const auto ii = item_idx(i);
    if (item_rated_[ii][ui]) {
      throw UsageError("apply_rating: (" + std::to_string(u.value) + ", " +
                       std::to_string(i.value) + ") is already rated");
    }
    set_entry(ui, ii, RatedEntry{value, now});
  }

  // Pulls every rated entry of `remote` into this matrix. Users and items
  // unknown locally are added. Returns true when anything changed.
  bool merge_from(const RatingMatrix& remote) {
    const auto before = version_;
    if (user_ids_ == remote.user_ids_ && item_ids_ == remote.item_ids_) {
      // Same index layout: merge item rows directly.
      for (std::size_t ii = 0; ii < entries_.size(); ++ii) {
        const auto& theirs = remote.entries_[ii];
        if (theirs.empty() || entries_[ii] == theirs) continue;
        for (const auto& [ui, e] : theirs) {
          auto current = find_entry(ui, ii);
          if (!current || supersedes(e, *current)) set_entry(ui, ii, e);
        }
      }
      return version_ != before;
    }
    for (auto u : remote.user_ids_) add_user(u);
    for (auto i : remote.item_ids_) add_item(i);
    for (std::size_t rii = 0; rii < remote.entries_.size(); ++rii) {
      const auto ii = item_idx(remote.item_ids_[rii]);
      for (const auto& [rui, e] : remote.entries_[rii]) {
        const auto ui = user_idx(remote.user_ids_[rui]);
        auto current = find_entry(ui, ii);
        if (!current || supersedes(e, *current)) set_entry(ui, ii, e);
      }
    }
    return version_ != before;
  }

  // Cosine similarity of the two items' positive-rater vectors; 0 when either
  // item has no positive rater.
  double similarity(ItemId i, ItemId j) const {
    const auto& a = item_positive_[item_idx(i)];
    const auto& b = item_positive_[item_idx(j)];
    return detail::cosine((a & b).count(), a.count(), b.count());
  }

  // Sum of Sim(i, j) over the user's positive items. nullopt marks an
  // unpredictable pair (no co-rating path, i.e. the sum is zero).
  std::optional<double> rank(UserId u, ItemId i) const {
    const auto ui = user_idx(u);
    const auto ii = item_idx(i);
    if (item_rated_[ii][ui]) {
      throw UsageError("rank: (" + std::to_string(u.value) + ", " + std::to_string(i.value) +
                       ") is rated");
    }
    double sum = 0.0;
    const auto& mine = user_positive_[ui];
    const auto& pi = item_positive_[ii];
    for (auto j = mine.find_first(); j != UserSet::npos; j = mine.find_next(j)) {
      const auto& pj = item_positive_[j];
      sum += detail::cosine((pi & pj).count(), pi.count(), pj.count());
    }
    if (sum == 0.0) return std::nullopt;
    return sum;
  }

  EntryStatus status(UserId u, ItemId i) const {
    if (is_rated(u, i)) return EntryStatus::rated;
    return predictable_idx(user_idx(u), item_idx(i)) ? EntryStatus::predicted
                                                     : EntryStatus::unpredictable;
  }

  RatingEntry entry(UserId u, ItemId i, std::size_t k) const {
    if (auto r = rated(u, i)) return {r->value, EntryStatus::rated, r->timestamp};
    if (!predictable_idx(user_idx(u), item_idx(i))) return {};
    return {predicted_positive(u, i, k) ? Rating::positive : Rating::negative,
            EntryStatus::predicted, std::nullopt};
  }

  // Every unrated predictable item for u, highest rank first (ties by
  // ascending item id); the first k are labelled positive.
  std::vector<PredictionResult> predict_user(UserId u, std::size_t k) const {
    if (k == 0) throw UsageError("predict_user: k must be positive");
    const auto ui = user_idx(u);
    std::vector<PredictionResult> out;
    for (auto [ii, r] : ranked_items(ui)) {
      out.push_back({u, item_ids_[ii], r, out.size() < k ? Rating::positive : Rating::negative});
    }
    return out;
  }

  // 1 + number of other users whose (v, i) cell is unpredictable now and
  // would become predictable if u rated i positively. Does not mutate.
  std::size_t coverage_gain(UserId u, ItemId i) const {
    const auto ui = user_idx(u);
    const auto ii = item_idx(i);
    if (item_rated_[ii][ui]) {
      throw UsageError("coverage_gain: (" + std::to_string(u.value) + ", " +
                       std::to_string(i.value) + ") is rated");
    }
    // (v, i) turns predictable iff v shares a positive item with u, since the
    // only new co-rating the hypothesis creates is through u.
    const auto& c = derived();
    UserSet newly = c.neighbours[ui];
    newly.reset(ui);
    newly -= item_rated_[ii];
    newly -= c.predictable_by_item[ii];
    return 1 + newly.count();
  }

  // ---- batch views used by the schedulers and metrics ----------------------

  bool is_predictable(UserId u, ItemId i) const {
    return !is_rated(u, i) && predictable_idx(user_idx(u), item_idx(i));
  }

  bool predicted_positive(UserId u, ItemId i, std::size_t k) const {
    return labels(k).positive_by_item[item_idx(i)][user_idx(u)];
  }

  // g+: users for whom i is currently among their top-k predictions.
  std::size_t positive_predictions(ItemId i, std::size_t k) const {
    return labels(k).positive_by_item[item_idx(i)].count();
  }

  std::vector<UserId> positive_prediction_users(ItemId i, std::size_t k) const {
    return to_users(labels(k).positive_by_item[item_idx(i)]);
  }

  std::vector<UserId> unrated_users(ItemId i) const {
    UserSet s = item_rated_[item_idx(i)];
    s.flip();
    return to_users(s);
  }

  // Rated plus predictable users of the item.
  std::size_t covered_count(ItemId i) const {
    const auto ii = item_idx(i);
    return item_rated_[ii].count() + derived().predictable_by_item[ii].count();
  }

  std::size_t predictable_count(ItemId i) const {
    return derived().predictable_by_item[item_idx(i)].count();
  }

 private:
  struct Derived {
    std::uint64_t version = ~std::uint64_t{0};
    // Per item with positive raters: (other item index, similarity), both
    // items having at least one common positive rater.
    std::vector<std::vector<std::pair<std::size_t, double>>> neighbours_of_item;
    // Users sharing at least one positive item with each user (self included
    // when the user has any positive rating).
    std::vector<UserSet> neighbours;
    // Unrated users with a nonzero rank on the item.
    std::vector<UserSet> predictable_by_item;
  };

  struct Labels {
    std::uint64_t version = ~std::uint64_t{0};
    std::size_t k = 0;
    std::vector<UserSet> positive_by_item;
  };

  using Entry = std::pair<std::uint32_t, RatedEntry>;

  static bool by_user(const Entry& e, std::uint32_t ui) { return e.first < ui; }

  std::optional<RatedEntry> find_entry(std::size_t ui, std::size_t ii) const {
    if (!item_rated_[ii][ui]) return std::nullopt;
    const auto& row = entries_[ii];
    auto it = std::lower_bound(row.begin(), row.end(), static_cast<std::uint32_t>(ui), by_user);
    return it->second;
  }

  // Conflict rule for two rated entries of the same cell: the earlier
  // timestamp is the origin; equal timestamps fall back to the lower value.
  static bool supersedes(const RatedEntry& theirs, const RatedEntry& ours) {
    if (theirs.timestamp != ours.timestamp) return theirs.timestamp < ours.timestamp;
    return theirs.value < ours.value;
  }

  template <class T>
  static std::vector<T> sorted(std::vector<T> v) {
    std::sort(v.begin(), v.end());
    return v;
  }

  std::size_t user_idx(UserId u) const {
    auto it = user_index_.find(u);
    if (it == user_index_.end()) throw UsageError("unknown user " + std::to_string(u.value));
    return it->second;
  }

  std::size_t item_idx(ItemId i) const {
    auto it = item_index_.find(i);
    if (it == item_index_.end()) throw UsageError("unknown item " + std::to_string(i.value));
    return it->second;
  }

  std::vector<UserId> to_users(const UserSet& s) const {
    std::vector<UserId> out;
    for (auto b = s.find_first(); b != UserSet::npos; b = s.find_next(b)) out.push_back(user_ids_[b]);
    std::sort(out.begin(), out.end());
    return out;
  }

  void set_entry(std::size_t ui, std::size_t ii, RatedEntry e) {
    auto& row = entries_[ii];
    const auto u32 = static_cast<std::uint32_t>(ui);
    auto it = std::lower_bound(row.begin(), row.end(), u32, by_user);
    if (it != row.end() && it->first == u32) {
      it->second = e;
    } else {
      row.insert(it, {u32, e});
      ++rated_count_;
    }
    item_rated_[ii].set(ui);
    const bool pos = e.value == Rating::positive;
    item_positive_[ii][ui] = pos;
    user_positive_[ui][ii] = pos;
    ++version_;
  }

  bool predictable_idx(std::size_t ui, std::size_t ii) const {
    return derived().predictable_by_item[ii][ui];
  }

  const Derived& derived() const {
    if (derived_.version == version_) return derived_;
    const auto n_items = item_ids_.size();
    const auto n_users = user_ids_.size();
    Derived d;
    d.version = version_;
    d.neighbours_of_item.assign(n_items, {});
    d.neighbours.assign(n_users, UserSet(n_users));
    d.predictable_by_item.assign(n_items, UserSet(n_users));

    std::vector<std::size_t> common(n_items, 0);
    std::vector<std::size_t> touched;
    for (std::size_t j = 0; j < n_items; ++j) {
      const auto& pj = item_positive_[j];
      if (pj.none()) continue;
      touched.clear();
      for (auto w = pj.find_first(); w != UserSet::npos; w = pj.find_next(w)) {
        d.neighbours[w] |= pj;
        const auto& liked = user_positive_[w];
        for (auto i = liked.find_first(); i != UserSet::npos; i = liked.find_next(i)) {
          if (common[i]++ == 0) touched.push_back(i);
        }
      }
      std::sort(touched.begin(), touched.end());
      const auto cj = pj.count();
      auto& out = d.neighbours_of_item[j];
      out.reserve(touched.size());
      for (auto i : touched) {
        out.emplace_back(i, detail::cosine(common[i], item_positive_[i].count(), cj));
        common[i] = 0;
      }
    }
    // (v, i) is predictable iff some positive rater of i is a neighbour of v.
    for (std::size_t i = 0; i < n_items; ++i) {
      const auto& pi = item_positive_[i];
      auto& out = d.predictable_by_item[i];
      for (auto w = pi.find_first(); w != UserSet::npos; w = pi.find_next(w)) out |= d.neighbours[w];
      out -= item_rated_[i];
    }
    derived_ = std::move(d);
    return derived_;
  }

  // Unrated predictable items of one user with their ranks, in recommendation
  // order. Sums run over the user's positive items in ascending index order,
  // exactly like rank(), so both paths produce identical doubles.
  std::vector<std::pair<std::size_t, double>> ranked_items(std::size_t ui) const {
    const auto& d = derived();
    std::vector<double> acc(item_ids_.size(), 0.0);
    std::vector<std::size_t> touched;
    const auto& mine = user_positive_[ui];
    for (auto j = mine.find_first(); j != UserSet::npos; j = mine.find_next(j)) {
      for (auto [i, s] : d.neighbours_of_item[j]) {
        if (item_rated_[i][ui]) continue;
        if (acc[i] == 0.0) touched.push_back(i);
        acc[i] += s;
      }
    }
    std::vector<std::pair<std::size_t, double>> out;
    out.reserve(touched.size());
    for (auto i : touched) out.emplace_back(i, acc[i]);
    std::sort(out.begin(), out.end(), [this](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return item_ids_[a.first] < item_ids_[b.first];
    });
    return out;
  }

  const Labels& labels(std::size_t k) const {
    if (k == 0) throw UsageError("top-k size must be positive");
    if (labels_.version == version_ && labels_.k == k) return labels_;
    Labels l;
    l.version = version_;
    l.k = k;
    l.positive_by_item.assign(item_ids_.size(), UserSet(user_ids_.size()));
    for (std::size_t u = 0; u < user_ids_.size(); ++u) {
      if (user_positive_[u].none()) continue;
      auto ranked = ranked_items(u);
      const auto top = std::min(k, ranked.size());
      for (std::size_t r = 0; r < top; ++r) l.positive_by_item[ranked[r].first].set(u);
    }
    labels_ = std::move(l);
    return labels_;
  }

  std::vector<UserId> user_ids_;
  std::vector<ItemId> item_ids_;
  std::unordered_map<UserId, std::size_t> user_index_;
  std::unordered_map<ItemId, std::size_t> item_index_;
  std::vector<std::vector<Entry>> entries_;  // per item, sorted by user index
  std::size_t rated_count_ = 0;
  std::vector<UserSet> item_positive_;  // per item, over users
  std::vector<UserSet> item_rated_;     // per item, over users
  std::vector<UserSet> user_positive_;  // per user, over items
  std::uint64_t version_ = 0;

  // Not synchronised: one matrix is never read from two threads at once.
  mutable Derived derived_;
  mutable Labels labels_;
};

// Union of rated entries; see RatingMatrix::merge_from for the conflict rule.
inline RatingMatrix merge(const RatingMatrix& local, const RatingMatrix& remote) {
  RatingMatrix out = local;
  out.merge_from(remote);
  return out;
}

// Entry-wise equality on the user/item universe and rated entries.
inline bool same_ratings(const RatingMatrix& a, const RatingMatrix& b) {
  return a.users() == b.users() && a.items() == b.items() && a.rated_entries() == b.rated_entries();
}

}  // namespace cofigel
