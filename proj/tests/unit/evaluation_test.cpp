#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "oracles.hpp"
#include "peris/evaluation.hpp"
#include "peris/training.hpp"
#include "test_support.hpp"

namespace peris {
namespace {

// Scores from a fixed table, optionally offset by a per-item time term.
class TableScorer final : public Scorer {
 public:
  explicit TableScorer(Matrix table) : table_(std::move(table)) {}
  std::size_t n_users() const override { return static_cast<std::size_t>(table_.rows()); }
  std::size_t n_items() const override { return static_cast<std::size_t>(table_.cols()); }
  void score(UserIdx user, std::span<const ItemIdx> items, std::span<double> out) const override {
    for (std::size_t n = 0; n < items.size(); ++n) out[n] = table_(user, items[n]);
  }

 private:
  Matrix table_;
};

TEST(Rank, Examples) {
  const std::vector<double> low(100, 0.0), high(100, 2.0), tied(100, 1.0);
  EXPECT_EQ(rank_of(1.0, low), 1u);
  EXPECT_EQ(rank_of(1.0, high), 101u);
  EXPECT_EQ(rank_of(1.0, tied), 101u);
}

TEST(Metrics, ClosedForms) {
  EXPECT_EQ(hr_at_k(1, 10), 1.0);
  EXPECT_EQ(ndcg_at_k(1, 10), 1.0);
  EXPECT_NEAR(ndcg_at_k(2, 10), 1.0 / std::log2(3.0), 1e-12);
  EXPECT_NEAR(ndcg_at_k(2, 10), 0.63093, 1e-5);
  EXPECT_EQ(hr_at_k(11, 10), 0.0);
  EXPECT_EQ(ndcg_at_k(11, 10), 0.0);
  EXPECT_EQ(hr_at_k(10, 10), 1.0);
  EXPECT_THROW(hr_at_k(0, 10), InputError);
}

TEST(Rank, MatchesFullSortOracle) {
  Rng rng(1);
  std::uniform_int_distribution<int> coarse(0, 20);
  std::normal_distribution<double> fine(0.0, 1.0);
  for (int c = 0; c < 2000; ++c) {
    std::vector<double> scores(101);
    // Coarse integer scores make ties common.
    for (auto& s : scores) s = c % 2 ? coarse(rng) : fine(rng);
    const std::size_t rank = rank_of(scores[0], std::span(scores).subspan(1));
    ASSERT_EQ(rank, oracle::full_sort_rank(scores));
    for (std::size_t k : {5u, 10u}) {
      EXPECT_EQ(hr_at_k(rank, k), oracle::dcg_at(rank, k) > 0 ? 1.0 : 0.0);
      EXPECT_EQ(ndcg_at_k(rank, k), oracle::dcg_at(rank, k));
    }
  }
}

IndexedSplit sample_split() {
  DatasetSplit s;
  s.train = {{"a", "i1", 10}, {"a", "i2", 20}, {"b", "i1", 15}, {"b", "i3", 40}};
  for (int n = 4; n < 120; ++n) s.train.push_back({"c", "i" + std::to_string(n), 30});
  s.valid = {{"a", "i3", 50}, {"a", "i3", 52}, {"b", "i2", 55}};
  s.test = {{"a", "i5", 70}, {"b", "i6", 80}, {"b", "i5", 81}};
  s.train_end_time = 45;
  s.valid_end_time = 60;
  return IndexedSplit::from(s);
}

TEST(EvalContext, DistinctPairsAndExclusions) {
  const auto split = sample_split();
  const auto ctx = EvalContext::build(split, SplitPart::kValid);
  ASSERT_EQ(ctx.pairs().size(), 2u);
  const UserIdx a = split.users.at("a");
  EXPECT_EQ(ctx.pairs()[0].user, a);
  EXPECT_EQ(ctx.pairs()[0].time, 50);
  const auto ex = ctx.excluded(a);
  for (const char* id : {"i1", "i2", "i3", "i5"}) {
    EXPECT_TRUE(std::binary_search(ex.begin(), ex.end(), split.items.at(id))) << id;
  }
  EXPECT_EQ(ctx.last_train_time(a), Timestamp{20});
  EXPECT_EQ(ctx.last_train_time(split.users.at("b")), Timestamp{40});
}

TEST(EvalNegatives, DisjointSeededAndEnough) {
  const std::vector<ItemIdx> excluded = {0, 3, 4, 50};
  const auto x = eval_negatives(excluded, 120, 7, 3);
  EXPECT_EQ(x.size(), kNegativesPerPair);
  std::set<ItemIdx> s(x.begin(), x.end());
  EXPECT_EQ(s.size(), x.size());
  for (ItemIdx i : excluded) EXPECT_EQ(s.count(i), 0u);
  EXPECT_EQ(x, eval_negatives(excluded, 120, 7, 3));
  EXPECT_NE(x, eval_negatives(excluded, 120, 7, 4));
  EXPECT_THROW(eval_negatives(excluded, 103, 7, 0), InputError);
  EXPECT_EQ(eval_negatives(excluded, 104, 7, 0).size(), 100u);
}

TEST(Evaluate, RanksAgainstSampledNegatives) {
  const auto split = sample_split();
  const auto ctx = EvalContext::build(split, SplitPart::kTest);
  Rng rng(2);
  Matrix table(static_cast<Eigen::Index>(split.n_users()), static_cast<Eigen::Index>(split.n_items()));
  for (auto& x : table.reshaped()) x = std::uniform_int_distribution<int>(0, 9)(rng);
  const TableScorer scorer(table);
  const auto report = evaluate(scorer, ctx, 11);
  ASSERT_EQ(report.records.size(), ctx.pairs().size());
  double hr10 = 0.0, nd10 = 0.0;
  for (std::size_t p = 0; p < ctx.pairs().size(); ++p) {
    const auto& pair = ctx.pairs()[p];
    const auto negs = eval_negatives(ctx.excluded(pair.user), ctx.n_items(), 11, p);
    std::vector<double> scores = {table(pair.user, pair.item)};
    for (ItemIdx i : negs) scores.push_back(table(pair.user, i));
    const std::size_t rank = oracle::full_sort_rank(scores);
    EXPECT_EQ(report.records[p].rank, rank);
    hr10 += rank <= 10;
    nd10 += oracle::dcg_at(rank, 10);
  }
  const double n = static_cast<double>(ctx.pairs().size());
  EXPECT_DOUBLE_EQ(report.hr_at(10), hr10 / n);
  EXPECT_DOUBLE_EQ(report.ndcg_at(10), nd10 / n);
  EXPECT_LE(report.hr_at(5), report.hr_at(10));
  EXPECT_LE(report.hr_at(10), report.hr_at(20));
  EXPECT_LE(report.ndcg_at(10), report.hr_at(10));

  const auto again = evaluate(scorer, ctx, 11, 3);
  for (std::size_t p = 0; p < report.records.size(); ++p) EXPECT_EQ(again.records[p].rank, report.records[p].rank);
  EXPECT_EQ(again.hr, report.hr);
  EXPECT_EQ(again.ndcg, report.ndcg);
}

TEST(Aggregate, MeanAndSampleStd) {
  RankingReport a, b;
  a.cutoffs = b.cutoffs = {10};
  a.hr = {0.2};
  b.hr = {0.4};
  a.ndcg = {0.1};
  b.ndcg = {0.3};
  const std::vector<RankingReport> runs = {a, b};
  const auto agg = aggregate(runs);
  EXPECT_DOUBLE_EQ(agg.hr[0].mean, 0.3);
  EXPECT_NEAR(agg.hr[0].std, std::sqrt(0.02), 1e-15);
  EXPECT_DOUBLE_EQ(agg.combined.mean, 0.25);
  EXPECT_EQ(agg.runs, 2u);
}

std::int64_t brute_percentile(std::vector<std::int64_t> v, double p) {
  std::sort(v.begin(), v.end());
  // Smallest value with at least p% of the sample at or below it.
  for (const auto x : v) {
    std::size_t at_or_below = 0;
    for (const auto y : v) at_or_below += y <= x;
    if (100.0 * static_cast<double>(at_or_below) >= p * static_cast<double>(v.size())) return x;
  }
  return v.back();
}

TEST(Cohorts, MatchBruteForcePercentileScan) {
  Rng rng(3);
  for (int c = 0; c < 50; ++c) {
    std::vector<std::int64_t> v(1000);
    std::uniform_int_distribution<std::int64_t> d(0, c % 2 ? 20 : 400);
    for (auto& x : v) x = d(rng);
    const auto got = assign_cohorts(v);
    const std::array<std::int64_t, 3> th = {brute_percentile(v, 25), brute_percentile(v, 50),
                                            brute_percentile(v, 75)};
    EXPECT_EQ(got.thresholds, th);
    for (std::size_t n = 0; n < v.size(); ++n) {
      std::size_t bucket = 3;
      for (std::size_t b = 0; b < 3; ++b) {
        if (v[n] <= th[b]) {
          bucket = b;
          break;
        }
      }
      ASSERT_EQ(got.bucket[n], bucket);
    }
  }
}

TEST(Cohorts, IdenticalValuesCollapseToOneBucket) {
  const std::vector<std::int64_t> v(40, 7);
  const auto got = assign_cohorts(v);
  for (const auto b : got.bucket) EXPECT_EQ(b, 0u);
}

TEST(Cohorts, ElapsedDaysPerUser) {
  const auto split = sample_split();
  const auto ctx = EvalContext::build(split, SplitPart::kTest);
  RankingReport report;
  report.cutoffs = {10};
  for (const auto& p : ctx.pairs()) report.records.push_back({p.user, p.item, p.time, 1});
  const auto table = elapsed_cohorts(report, ctx);
  std::size_t users = 0, pairs = 0;
  for (const auto& b : table.buckets) {
    users += b.users;
    pairs += b.pairs;
  }
  EXPECT_EQ(users, 2u);
  EXPECT_EQ(pairs, ctx.pairs().size());
  // Times are seconds, so every elapsed gap here is under one day.
  EXPECT_EQ(table.thresholds, (std::array<std::int64_t, 3>{0, 0, 0}));
  EXPECT_DOUBLE_EQ(table.buckets[0].score, 1.0);
}

TEST(Overlap, Examples) {
  const TopLists a = {{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}};
  const TopLists b = {{10, 11, 12, 13, 14, 15, 16, 17, 18, 19}};
  const TopLists c = {{0, 1, 2, 3, 4, 15, 16, 17, 18, 19}};
  EXPECT_EQ(overlap_ratio(a, a), 1.0);
  EXPECT_EQ(overlap_ratio(a, b), 0.0);
  EXPECT_EQ(overlap_ratio(a, c), 0.5);
  const TopLists short_list = {{0, 1}};
  EXPECT_THROW(overlap_ratio(a, short_list), InputError);
}

TEST(TopK, OrderedByScoreThenItemOverUnseenItems) {
  const auto split = sample_split();
  const auto ctx = EvalContext::build(split, SplitPart::kTest);
  Matrix table = Matrix::Zero(static_cast<Eigen::Index>(split.n_users()), static_cast<Eigen::Index>(split.n_items()));
  const UserIdx a = split.users.at("a");
  table(a, split.items.at("i1")) = 5.0;
  table(a, split.items.at("i9")) = 3.0;
  const auto lists = top_k_lists(TableScorer(table), ctx, 10);
  ASSERT_EQ(ctx.users().size(), 2u);
  ASSERT_EQ(lists.size(), 2u);
  ASSERT_EQ(ctx.users()[0], a);
  ASSERT_EQ(lists[0].size(), 10u);
  EXPECT_EQ(lists[0][0], split.items.at("i9"));
  for (std::size_t n = 2; n < 10; ++n) EXPECT_LT(lists[0][n - 1], lists[0][n]);
  for (ItemIdx i : lists[0]) EXPECT_NE(i, split.items.at("i1"));
}

TEST(Shift, TimeBlindScorerIsInvariant) {
  const auto split = sample_split();
  const auto ctx = EvalContext::build(split, SplitPart::kTest);
  Rng rng(4);
  Matrix table(static_cast<Eigen::Index>(split.n_users()), static_cast<Eigen::Index>(split.n_items()));
  for (auto& x : table.reshaped()) x = std::normal_distribution<double>(0, 1)(rng);
  std::vector<Timestamp> requested;
  const ScorerFactory factory = [&](Timestamp shift) {
    requested.push_back(shift);
    return std::make_unique<TableScorer>(table);
  };
  const auto offsets = default_shift_offsets();
  EXPECT_EQ(offsets.size(), 13u);
  const auto curve = shift_sensitivity(factory, ctx, offsets);
  ASSERT_EQ(curve.size(), 13u);
  for (const auto& p : curve) EXPECT_EQ(p.overlap, 1.0);
  for (const auto s : requested) EXPECT_EQ(s % days(kDaysPerMonth), 0);
}

TEST(Shift, WholeWidthShiftTranslatesBins) {
  Rng rng(5);
  const auto data = testing::random_corpus(30, 40, 12, 300, rng);
  auto split = testing::train_only_split(data);
  HyperParams hp;
  hp.k = 4;
  hp.bin_width_days = 30;
  hp.recent_days = 60;
  hp.recent_half = false;
  const TrainingData td(split, hp);
  const auto base = td.inference_bins();
  const auto shifted = td.shifted_inference_bins(days(30));
  for (UserIdx u = 0; u < td.n_users(); ++u) {
    for (const auto& seq : base->items_of(u)) {
      const auto* moved = shifted->find(u, seq.item);
      ASSERT_NE(moved, nullptr);
      // One width later: every bin moves up by one and the last bin keeps
      // what would fall past the end of the grid.
      const std::size_t n = seq.values.size();
      ASSERT_GE(n, 3u);
      EXPECT_EQ(moved->values[0], 0.0);
      for (std::size_t b = 1; b + 1 < n; ++b) EXPECT_EQ(moved->values[b], seq.values[b - 1]);
      EXPECT_EQ(moved->values[n - 1], seq.values[n - 2] + seq.values[n - 1]);
    }
  }
}

TEST(Report, JsonAndCsvShapes) {
  const auto split = sample_split();
  const auto ctx = EvalContext::build(split, SplitPart::kTest);
  const TableScorer scorer(Matrix::Zero(static_cast<Eigen::Index>(split.n_users()), static_cast<Eigen::Index>(split.n_items())));
  const auto report = evaluate(scorer, ctx, 1);
  const auto j = to_json(report);
  EXPECT_EQ(j.at("pairs").get<std::size_t>(), ctx.pairs().size());
  EXPECT_TRUE(j.at("hr").contains("10"));
  const auto csv = records_csv(report, split);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "user,item,time,rank");
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), ctx.pairs().size() + 1);
}

}  // namespace
}  // namespace peris
