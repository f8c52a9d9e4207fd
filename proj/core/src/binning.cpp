#include "peris/binning.hpp"

#include <algorithm>
#include <map>

namespace peris {

std::size_t BinGrid::bin_of(Timestamp t) const {
  if (t <= origin) return 0;
  const auto idx = static_cast<std::size_t>((t - origin) / width);
  return std::min(idx, n_bins - 1);
}

BinGrid build_grid(Timestamp min_time, Timestamp max_time, Timestamp width) {
  if (width <= 0) throw InputError("bin width must be positive");
  if (max_time < min_time) throw InputError("grid max precedes min");
  const Timestamp span = max_time - min_time;
  const auto n = static_cast<std::size_t>((span + width - 1) / width);
  return {min_time, width, std::max<std::size_t>(n, 1)};
}

BinGrid build_grid(std::span<const Timestamp> times, Timestamp width) {
  if (times.empty()) throw InputError("cannot build a bin grid from no timestamps");
  const auto [lo, hi] = std::minmax_element(times.begin(), times.end());
  return build_grid(*lo, *hi, width);
}

BinVector::BinVector(std::size_t n_bins, std::vector<BinEntry> entries)
    : n_bins_(n_bins), entries_(std::move(entries)) {
  std::sort(entries_.begin(), entries_.end(),
            [](const BinEntry& a, const BinEntry& b) { return a.bin < b.bin; });
  std::erase_if(entries_, [](const BinEntry& e) { return e.count == 0; });
  if (!entries_.empty() && entries_.back().bin >= n_bins_) {
    throw InputError("bin entry beyond vector length");
  }
}

std::uint32_t BinVector::at(std::size_t bin) const {
  const auto it = std::lower_bound(entries_.begin(), entries_.end(), bin,
                                   [](const BinEntry& e, std::size_t b) { return e.bin < b; });
  return (it != entries_.end() && it->bin == bin) ? it->count : 0;
}

std::uint64_t BinVector::total() const {
  std::uint64_t sum = 0;
  for (const auto& e : entries_) sum += e.count;
  return sum;
}

std::vector<double> BinVector::dense() const {
  std::vector<double> out(n_bins_, 0.0);
  for (const auto& e : entries_) out[e.bin] = e.count;
  return out;
}

BinVector bin_counts(std::span<const Timestamp> times, const BinGrid& grid) {
  std::map<std::uint32_t, std::uint32_t> counts;
  for (const Timestamp t : times) ++counts[static_cast<std::uint32_t>(grid.bin_of(t))];
  std::vector<BinEntry> entries;
  entries.reserve(counts.size());
  for (const auto& [bin, count] : counts) entries.push_back({bin, count});
  return BinVector(grid.n_bins, std::move(entries));
}

BinVector expanded_bins(std::span<const Timestamp> times, const BinGrid& full_grid) {
  return bin_counts(times, full_grid);
}

std::size_t recent_half_length(std::size_t n_bins) { return (n_bins + 1) / 2; }

BinVector truncate_recent_half(const BinVector& v) {
  if (v.n_bins() == 0) throw InputError("cannot truncate an empty bin vector");
  const std::size_t keep = recent_half_length(v.n_bins());
  const std::size_t drop = v.n_bins() - keep;
  std::vector<BinEntry> entries;
  for (const auto& e : v.entries()) {
    if (e.bin >= drop) entries.push_back({static_cast<std::uint32_t>(e.bin - drop), e.count});
  }
  return BinVector(keep, std::move(entries));
}

bool pis_label(ItemIdx item, const ConsumptionHistory& history) {
  return std::any_of(history.recent().begin(), history.recent().end(),
                     [&](const HistoryEvent& e) { return e.item == item; });
}

std::vector<Neighbor> neighbor_set(UserIdx user, ItemIdx item,
                                   std::span<const ConsumptionHistory> histories,
                                   const BinGrid& grid, std::size_t cap) {
  std::vector<Neighbor> out;
  for (const auto& h : histories) {
    if (h.user() == user) continue;
    std::vector<Timestamp> times;
    for (const auto& e : h.past()) {
      if (e.item == item) times.push_back(e.time);
    }
    if (times.empty()) continue;
    out.push_back({h.user(), static_cast<std::uint32_t>(times.size()), bin_counts(times, grid)});
  }
  std::stable_sort(out.begin(), out.end(), [](const Neighbor& a, const Neighbor& b) {
    if (a.raw_count != b.raw_count) return a.raw_count > b.raw_count;
    return a.user < b.user;
  });
  if (out.size() > cap) out.resize(cap);
  return out;
}

bool extrinsic_label(std::span<const double> weights, std::span<const std::uint8_t> labels) {
  if (weights.size() != labels.size()) throw InputError("weights and labels differ in length");
  double sum = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) sum += weights[k] * labels[k];
  return sum >= 1.0;
}

BinnedHistories::BinnedHistories(std::span<const ConsumptionHistory> histories,
                                 HistoryPart part, const BinGrid& grid, std::size_t n_items,
                                 bool recent_half, Timestamp shift)
    : grid_(grid),
      seq_len_(recent_half ? recent_half_length(grid.n_bins) : grid.n_bins),
      by_user_(histories.size()),
      consumers_(n_items) {
  const std::size_t drop = grid.n_bins - seq_len_;
  for (std::size_t u = 0; u < histories.size(); ++u) {
    const auto events = part == HistoryPart::kPast ? histories[u].past() : histories[u].events();
    std::map<ItemIdx, ItemSequence> seqs;
    for (const auto& e : events) {
      if (e.item >= n_items) throw InputError("item index out of range");
      auto& s = seqs[e.item];
      if (s.values.empty()) {
        s.item = e.item;
        s.values.assign(seq_len_, 0.0);
      }
      ++s.raw_count;
      const std::size_t bin = grid.bin_of(e.time + shift);
      if (bin >= drop) s.values[bin - drop] += 1.0;
    }
    auto& row = by_user_[u];
    row.reserve(seqs.size());
    for (auto& [item, s] : seqs) {
      consumers_[item].push_back({static_cast<UserIdx>(u), s.raw_count});
      row.push_back(std::move(s));
    }
  }
  for (auto& list : consumers_) {
    std::stable_sort(list.begin(), list.end(), [](const ItemConsumer& a, const ItemConsumer& b) {
      if (a.raw_count != b.raw_count) return a.raw_count > b.raw_count;
      return a.user < b.user;
    });
  }
}

const ItemSequence* BinnedHistories::find(UserIdx user, ItemIdx item) const {
  const auto& row = by_user_.at(user);
  const auto it = std::lower_bound(row.begin(), row.end(), item,
                                   [](const ItemSequence& s, ItemIdx i) { return s.item < i; });
  return (it != row.end() && it->item == item) ? &*it : nullptr;
}

std::vector<BinnedHistories::NeighborRef> BinnedHistories::neighbors(UserIdx user, ItemIdx item,
                                                                     std::size_t cap) const {
  std::vector<NeighborRef> out;
  for (const auto& c : consumers_.at(item)) {
    if (out.size() >= cap) break;
    if (c.user == user) continue;
    out.push_back({c.user, find(c.user, item)});
  }
  return out;
}

}  // namespace peris
