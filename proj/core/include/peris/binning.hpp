#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "peris/corpus.hpp"
#include "peris/types.hpp"

namespace peris {

// Equal-width time intervals starting at `origin`. Interval n covers
// [origin + n*width, origin + (n+1)*width); the last interval is closed.
struct BinGrid {
  Timestamp origin = 0;
  Timestamp width = 1;
  std::size_t n_bins = 1;

  Timestamp end() const { return origin + width * static_cast<Timestamp>(n_bins); }
  bool in_span(Timestamp t) const { return t >= origin && t <= end(); }
  // Times before the origin map to bin 0, times at or past end() to the last bin.
  std::size_t bin_of(Timestamp t) const;

  friend bool operator==(const BinGrid&, const BinGrid&) = default;
};

BinGrid build_grid(std::span<const Timestamp> times, Timestamp width);
BinGrid build_grid(Timestamp min_time, Timestamp max_time, Timestamp width);

struct BinEntry {
  std::uint32_t bin = 0;
  std::uint32_t count = 0;
  friend bool operator==(const BinEntry&, const BinEntry&) = default;
};

// Sparse per-(user, item) frequency bins. Entries are sorted by bin and
// never hold a zero count.
class BinVector {
 public:
  BinVector() = default;
  explicit BinVector(std::size_t n_bins) : n_bins_(n_bins) {}
  BinVector(std::size_t n_bins, std::vector<BinEntry> entries);

  std::size_t n_bins() const { return n_bins_; }
  std::span<const BinEntry> entries() const { return entries_; }
  std::uint32_t at(std::size_t bin) const;
  std::uint64_t total() const;
  std::vector<double> dense() const;

  friend bool operator==(const BinVector&, const BinVector&) = default;

 private:
  std::size_t n_bins_ = 0;
  std::vector<BinEntry> entries_;
};

BinVector bin_counts(std::span<const Timestamp> times, const BinGrid& grid);

// Same counting rule as bin_counts, over the grid spanning every training time.
BinVector expanded_bins(std::span<const Timestamp> times, const BinGrid& full_grid);

// Keeps the last ceil(n/2) bins.
BinVector truncate_recent_half(const BinVector& v);
std::size_t recent_half_length(std::size_t n_bins);

bool pis_label(ItemIdx item, const ConsumptionHistory& history);

inline constexpr std::size_t kUnlimitedNeighbors = std::numeric_limits<std::size_t>::max();

struct Neighbor {
  UserIdx user = 0;
  std::uint32_t raw_count = 0;
  BinVector bins;
};

// Users other than `user` that consumed `item` before their history cutoff,
// ordered by consumption count (descending, then user index) and capped.
std::vector<Neighbor> neighbor_set(UserIdx user, ItemIdx item,
                                   std::span<const ConsumptionHistory> histories,
                                   const BinGrid& grid, std::size_t cap);

// True iff sum(weights[k] * labels[k]) >= 1.
bool extrinsic_label(std::span<const double> weights, std::span<const std::uint8_t> labels);

enum class HistoryPart { kPast, kAll };

struct ItemSequence {
  ItemIdx item = 0;
  std::uint32_t raw_count = 0;
  std::vector<double> values;
};

struct ItemConsumer {
  UserIdx user = 0;
  std::uint32_t raw_count = 0;
};

// Dense bin sequences for every (user, item) consumed in one history part,
// plus the per-item consumer index used for neighbor lookup.
class BinnedHistories {
 public:
  BinnedHistories(std::span<const ConsumptionHistory> histories, HistoryPart part,
                  const BinGrid& grid, std::size_t n_items, bool recent_half,
                  Timestamp shift = 0);

  const BinGrid& grid() const { return grid_; }
  std::size_t seq_len() const { return seq_len_; }
  std::size_t n_users() const { return by_user_.size(); }
  std::size_t n_items() const { return consumers_.size(); }

  std::span<const ItemSequence> items_of(UserIdx user) const { return by_user_.at(user); }
  const ItemSequence* find(UserIdx user, ItemIdx item) const;
  std::span<const ItemConsumer> consumers_of(ItemIdx item) const { return consumers_.at(item); }

  struct NeighborRef {
    UserIdx user;
    const ItemSequence* sequence;
  };
  std::vector<NeighborRef> neighbors(UserIdx user, ItemIdx item, std::size_t cap) const;

 private:
  BinGrid grid_;
  std::size_t seq_len_ = 0;
  std::vector<std::vector<ItemSequence>> by_user_;
  std::vector<std::vector<ItemConsumer>> consumers_;
};

}  // namespace peris
