#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "peris/corpus.hpp"
#include "peris/scorer.hpp"
#include "peris/types.hpp"

namespace peris {

inline constexpr std::size_t kNegativesPerPair = 100;
inline constexpr std::size_t kTopK = 10;

// 1 + number of negatives scoring at least as high as the test item.
std::size_t rank_of(double test_score, std::span<const double> negative_scores);
// Scores the test item and its negatives with `scorer` and ranks it.
std::size_t rank_one(const Scorer& scorer, UserIdx user, ItemIdx test_item,
                     std::span<const ItemIdx> negatives);

double hr_at_k(std::size_t rank, std::size_t k);
double ndcg_at_k(std::size_t rank, std::size_t k);

enum class SplitPart { kValid, kTest };

struct EvalPair {
  UserIdx user = 0;
  ItemIdx item = 0;
  Timestamp time = 0;  // earliest consumption of the item in the evaluated part
};

// The (user, item) pairs of one evaluated part together with what negative
// sampling and the elapsed-time analysis need to know about each user.
class EvalContext {
 public:
  static EvalContext build(const IndexedSplit& split, SplitPart part);

  std::size_t n_users() const { return excluded_.size(); }
  std::size_t n_items() const { return n_items_; }
  std::span<const EvalPair> pairs() const { return pairs_; }
  // Users with at least one pair; ascending.
  std::span<const UserIdx> users() const { return users_; }
  // Items of the user in train, valid or test; ascending.
  std::span<const ItemIdx> excluded(UserIdx user) const { return excluded_.at(user); }
  // Items of the user in train; ascending.
  std::span<const ItemIdx> train_items(UserIdx user) const { return train_items_.at(user); }
  std::optional<Timestamp> last_train_time(UserIdx user) const;

 private:
  std::size_t n_items_ = 0;
  std::vector<EvalPair> pairs_;
  std::vector<UserIdx> users_;
  std::vector<std::vector<ItemIdx>> excluded_;
  std::vector<std::vector<ItemIdx>> train_items_;
  std::vector<std::optional<Timestamp>> last_train_;
};

// The sampled negatives of pair `pair_index`, drawn without replacement from
// the items outside `excluded` with a generator seeded from (seed, pair_index).
std::vector<ItemIdx> eval_negatives(std::span<const ItemIdx> excluded, std::size_t n_items,
                                    std::uint64_t seed, std::size_t pair_index);

struct RankRecord {
  UserIdx user = 0;
  ItemIdx item = 0;
  Timestamp time = 0;
  std::size_t rank = 0;
};

struct RankingReport {
  std::vector<std::size_t> cutoffs;
  std::vector<double> hr;
  std::vector<double> ndcg;
  std::vector<RankRecord> records;

  double hr_at(std::size_t k) const;
  double ndcg_at(std::size_t k) const;
  // (HR@10 + nDCG@10) / 2
  double combined() const { return (hr_at(10) + ndcg_at(10)) / 2.0; }
};

RankingReport evaluate(const Scorer& scorer, const EvalContext& ctx,
                       std::span<const std::size_t> cutoffs, std::uint64_t seed,
                       std::size_t threads = 1);
RankingReport evaluate(const Scorer& scorer, const EvalContext& ctx, std::uint64_t seed,
                       std::size_t threads = 1);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single run
};

struct AggregateReport {
  std::vector<std::size_t> cutoffs;
  std::vector<MeanStd> hr;
  std::vector<MeanStd> ndcg;
  MeanStd combined;
  std::size_t runs = 0;
};

AggregateReport aggregate(std::span<const RankingReport> reports);

// Nearest-rank percentile of an ascending sample: element ceil(p/100 * n).
std::int64_t nearest_rank_percentile(std::span<const std::int64_t> sorted, double p);

inline constexpr std::array<double, 3> kCohortPercentiles{25.0, 50.0, 75.0};

// Bucket 0: <= p25, 1: (p25, p50], 2: (p50, p75], 3: > p75.
std::size_t cohort_of(std::int64_t value, const std::array<std::int64_t, 3>& thresholds);

struct CohortAssignment {
  std::array<std::int64_t, 3> thresholds{};
  std::vector<std::size_t> bucket;  // parallel to the input values
};

CohortAssignment assign_cohorts(std::span<const std::int64_t> values);

struct CohortBucket {
  std::size_t users = 0;
  std::size_t pairs = 0;
  double score = 0.0;  // mean (HR@10 + nDCG@10) / 2 over the bucket's pairs
};

struct CohortTable {
  std::array<std::int64_t, 3> thresholds{};  // elapsed days
  std::array<CohortBucket, 4> buckets{};
};

// Groups users by whole days between their last training consumption and
// their earliest evaluated consumption.
CohortTable elapsed_cohorts(const RankingReport& report, const EvalContext& ctx);

using TopLists = std::vector<std::vector<ItemIdx>>;

// Top-k items for each evaluated user (in ctx.users() order) over every item
// outside the user's training history, ordered by score (descending) then
// item index.
TopLists top_k_lists(const Scorer& scorer, const EvalContext& ctx, std::size_t k = kTopK,
                     std::size_t threads = 1);

// Mean over users of |a_u ∩ b_u| / 10.
double overlap_ratio(const TopLists& a, const TopLists& b);

inline constexpr std::int64_t kDaysPerMonth = 30;

struct ShiftPoint {
  int offset = 0;  // months
  double overlap = 0.0;
};

using ScorerFactory = std::function<std::unique_ptr<Scorer>(Timestamp shift)>;

std::vector<int> default_shift_offsets();

// Overlap between top-10 lists computed from histories shifted by each offset
// (in 30-day months) and the unshifted lists.
std::vector<ShiftPoint> shift_sensitivity(const ScorerFactory& factory, const EvalContext& ctx,
                                          std::span<const int> offsets, std::size_t threads = 1);

nlohmann::json to_json(const RankingReport& report);
nlohmann::json to_json(const AggregateReport& report);
nlohmann::json to_json(const CohortTable& table);
nlohmann::json to_json(std::span<const ShiftPoint> curve);

// user,item,time,rank per record with a header line.
std::string records_csv(const RankingReport& report, const IndexedSplit& split);

}  // namespace peris
