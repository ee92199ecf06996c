#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace crowdlab {

/// Sparse M x N matrix of observed labels in {-1,+1}. A missing
/// (worker, item) pair means the worker did not label the item; at most one
/// label per pair. Immutable after construction.
class LabelMatrix {
 public:
  struct Entry {
    std::int32_t worker;
    std::int32_t item;
    std::int8_t label;  // -1 or +1
  };

  LabelMatrix(int num_workers, int num_items, std::vector<Entry> entries)
      : num_workers_(num_workers), num_items_(num_items), by_item_(std::move(entries)) {
    if (num_workers_ < 1 || num_items_ < 1)
      throw std::invalid_argument("LabelMatrix dimensions must be positive");
    for (const Entry& e : by_item_) {
      if (e.worker < 0 || e.worker >= num_workers_)
        throw std::invalid_argument("worker index out of range: " + std::to_string(e.worker));
      if (e.item < 0 || e.item >= num_items_)
        throw std::invalid_argument("item index out of range: " + std::to_string(e.item));
      if (e.label != 1 && e.label != -1)
        throw std::invalid_argument("label must be -1 or +1");
    }
    std::sort(by_item_.begin(), by_item_.end(), [](const Entry& a, const Entry& b) {
      return std::pair(a.item, a.worker) < std::pair(b.item, b.worker);
    });
    for (std::size_t k = 1; k < by_item_.size(); ++k) {
      if (by_item_[k].item == by_item_[k - 1].item && by_item_[k].worker == by_item_[k - 1].worker)
        throw std::invalid_argument("duplicate observation for worker " +
                                    std::to_string(by_item_[k].worker) + ", item " +
                                    std::to_string(by_item_[k].item));
    }
    by_worker_ = by_item_;
    std::sort(by_worker_.begin(), by_worker_.end(), [](const Entry& a, const Entry& b) {
      return std::pair(a.worker, a.item) < std::pair(b.worker, b.item);
    });
    item_offsets_ = offsets(by_item_, num_items_, [](const Entry& e) { return e.item; });
    worker_offsets_ = offsets(by_worker_, num_workers_, [](const Entry& e) { return e.worker; });
  }

  int num_workers() const { return num_workers_; }
  int num_items() const { return num_items_; }
  std::size_t num_observations() const { return by_item_.size(); }

  // Entries of one item column, sorted by worker.
  std::span<const Entry> item_entries(int item) const {
    return {by_item_.data() + item_offsets_[item],
            item_offsets_[item + 1] - item_offsets_[item]};
  }

  // Entries of one worker row, sorted by item.
  std::span<const Entry> worker_entries(int worker) const {
    return {by_worker_.data() + worker_offsets_[worker],
            worker_offsets_[worker + 1] - worker_offsets_[worker]};
  }

  // All entries in (item, worker) order.
  const std::vector<Entry>& entries() const { return by_item_; }

 private:
  template <typename Key>
  static std::vector<std::size_t> offsets(const std::vector<Entry>& sorted, int n, Key key) {
    std::vector<std::size_t> off(static_cast<std::size_t>(n) + 1, 0);
    for (const Entry& e : sorted) ++off[static_cast<std::size_t>(key(e)) + 1];
    for (int k = 0; k < n; ++k) off[k + 1] += off[k];
    return off;
  }

  int num_workers_ = 0;
  int num_items_ = 0;
  std::vector<Entry> by_item_;
  std::vector<Entry> by_worker_;
  std::vector<std::size_t> item_offsets_;
  std::vector<std::size_t> worker_offsets_;
};

inline bool operator==(const LabelMatrix::Entry& a, const LabelMatrix::Entry& b) {
  return a.worker == b.worker && a.item == b.item && a.label == b.label;
}

/// Predicted labels for all N items. Items that received no observation are
/// labeled by the rule's shift (prior fallback) and listed in `undetermined`.
struct Prediction {
  std::vector<std::int8_t> labels;           // one of {-1,+1} per item
  std::vector<std::int32_t> undetermined;    // items with zero observations
};

/// Partial ground-truth map item index -> {-1,+1}.
class GoldLabels {
 public:
  GoldLabels() = default;

  static GoldLabels from_entries(std::vector<std::pair<std::int32_t, std::int8_t>> entries) {
    GoldLabels g;
    g.entries_ = std::move(entries);
    std::sort(g.entries_.begin(), g.entries_.end());
    for (std::size_t k = 0; k < g.entries_.size(); ++k) {
      auto [item, label] = g.entries_[k];
      if (item < 0) throw std::invalid_argument("gold item index must be nonnegative");
      if (label != 1 && label != -1) throw std::invalid_argument("gold label must be -1 or +1");
      if (k > 0 && g.entries_[k - 1].first == item)
        throw std::invalid_argument("duplicate gold label for item " + std::to_string(item));
    }
    return g;
  }

  // Gold label for every item j in [0, labels.size()).
  static GoldLabels full(const std::vector<std::int8_t>& labels) {
    std::vector<std::pair<std::int32_t, std::int8_t>> entries;
    entries.reserve(labels.size());
    for (std::size_t j = 0; j < labels.size(); ++j)
      entries.emplace_back(static_cast<std::int32_t>(j), labels[j]);
    return from_entries(std::move(entries));
  }

  const std::vector<std::pair<std::int32_t, std::int8_t>>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

  std::optional<int> label(std::int32_t item) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(),
                               std::pair(item, std::int8_t{-1}),
                               [](const auto& a, const auto& b) { return a.first < b.first; });
    if (it == entries_.end() || it->first != item) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<std::pair<std::int32_t, std::int8_t>> entries_;
};

/// Fraction of gold-covered items whose predicted label disagrees with gold.
/// Items absent from gold do not count at all.
inline double error_rate(const Prediction& pred, const GoldLabels& gold) {
  if (gold.empty()) throw std::invalid_argument("error_rate: empty gold set");
  std::size_t wrong = 0;
  for (auto [item, label] : gold.entries()) {
    if (static_cast<std::size_t>(item) >= pred.labels.size())
      throw std::invalid_argument("error_rate: gold item " + std::to_string(item) +
                                  " outside prediction range");
    if (pred.labels[item] != label) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(gold.size());
}

}  // namespace crowdlab
