#include <gtest/gtest.h>

#include <map>
#include <set>
#include <sstream>

#include "peris/corpus.hpp"
#include "test_support.hpp"

namespace peris {
namespace {

TEST(Ingest, SingleRecord) {
  std::istringstream in("u1\ti1\t100\n");
  const auto data = ingest(in);
  ASSERT_EQ(data.size(), 1u);
  EXPECT_EQ(data[0], (Interaction{"u1", "i1", 100}));
}

TEST(Ingest, EmptyStream) {
  std::istringstream in("");
  EXPECT_TRUE(ingest(in).empty());
}

TEST(Ingest, KeepsDuplicates) {
  std::istringstream in("u1\ti1\t5\nu1\ti1\t5\n");
  EXPECT_EQ(ingest(in).size(), 2u);
}

TEST(Ingest, MalformedLineReportsLineNumber) {
  std::istringstream in("u1\ti1\t100\nu2\ti2\n");
  try {
    ingest(in);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Ingest, NonIntegerTimestamp) {
  std::istringstream a("u1\ti1\t10.5\n");
  EXPECT_THROW(ingest(a), ParseError);
  std::istringstream b("u1\ti1\tabc\n");
  EXPECT_THROW(ingest(b), ParseError);
  std::istringstream c("u1\ti1\t-4\n");
  EXPECT_THROW(ingest(c), ParseError);
}

TEST(Ingest, RoundTripsThroughTsv) {
  Rng rng(3);
  const auto data = testing::random_corpus(20, 30, 8, 50, rng);
  std::ostringstream out;
  write_tsv(out, data);
  std::istringstream in(out.str());
  EXPECT_EQ(ingest(in), data);
}

InteractionSet user_with_items(const std::string& user, std::size_t n) {
  InteractionSet out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({user, "i" + std::to_string(i), 10});
  return out;
}

TEST(FilterUsers, Boundary) {
  EXPECT_TRUE(filter_users(user_with_items("a", 9), 10).empty());
  EXPECT_EQ(filter_users(user_with_items("a", 10), 10).size(), 10u);
}

TEST(FilterUsers, CountsDistinctItems) {
  InteractionSet data = user_with_items("a", 4);
  data.push_back({"a", "i0", 20});
  EXPECT_TRUE(filter_users(data, 5).empty());
}

TEST(FilterUsers, MatchesBruteForceRecount) {
  Rng rng(11);
  InteractionSet data;
  std::uniform_int_distribution<int> n_events(1, 15), item(0, 25);
  for (int u = 0; u < 200; ++u) {
    const int n = n_events(rng);
    for (int k = 0; k < n; ++k) {
      data.push_back({"u" + std::to_string(u), "i" + std::to_string(item(rng)), k});
    }
  }
  std::map<std::string, std::set<std::string>> distinct;
  for (const auto& r : data) distinct[r.user].insert(r.item);
  InteractionSet expected;
  for (const auto& r : data) {
    if (distinct[r.user].size() >= 6) expected.push_back(r);
  }
  const auto kept = filter_users(data, 6);
  EXPECT_EQ(kept, expected);
  EXPECT_EQ(filter_users(kept, 6), kept);
}

TEST(ChronologicalSplit, DayBoundaries) {
  InteractionSet data;
  for (int d = 1; d <= 100; ++d) data.push_back({"u", "i" + std::to_string(d % 3), days(d)});
  const auto split = chronological_split(data, days(30), days(30));
  EXPECT_EQ(split.train.size(), 40u);
  EXPECT_EQ(split.valid.size(), 30u);
  EXPECT_EQ(split.test.size(), 30u);
  EXPECT_EQ(split.train.back().time, days(40));
  EXPECT_EQ(split.valid.front().time, days(41));
  EXPECT_EQ(split.valid.back().time, days(70));
  EXPECT_EQ(split.test.front().time, days(71));
}

TEST(ChronologicalSplit, DropsColdStart) {
  InteractionSet data = {{"a", "x", days(1)}, {"a", "y", days(80)}, {"b", "x", days(90)},
                         {"a", "x", days(95)}};
  const auto split = chronological_split(data, days(30), days(30));
  ASSERT_EQ(split.test.size(), 1u);
  EXPECT_EQ(split.test[0], (Interaction{"a", "x", days(95)}));
  EXPECT_TRUE(split.valid.empty());
}

TEST(ChronologicalSplit, EmptyTrainingSplit) {
  InteractionSet data = {{"a", "x", days(10)}, {"a", "y", days(20)}};
  EXPECT_THROW(chronological_split(data, days(30), days(30)), InputError);
  EXPECT_THROW(chronological_split({}, days(30), days(30)), InputError);
  EXPECT_THROW(chronological_split(data, 0, days(30)), InputError);
}

TEST(ChronologicalSplit, MatchesScanOracle) {
  Rng rng(5);
  const auto data = testing::random_corpus(60, 40, 20, 200, rng);
  const auto split = chronological_split(data, days(30), days(20));
  Timestamp max_time = 0;
  for (const auto& r : data) max_time = std::max(max_time, r.time);
  const Timestamp valid_end = max_time - days(30);
  const Timestamp train_end = valid_end - days(20);
  std::set<std::string> users, items;
  InteractionSet train, valid, test;
  for (const auto& r : data) {
    if (r.time <= train_end) {
      train.push_back(r);
      users.insert(r.user);
      items.insert(r.item);
    }
  }
  for (const auto& r : data) {
    if (r.time <= train_end || !users.count(r.user) || !items.count(r.item)) continue;
    (r.time <= valid_end ? valid : test).push_back(r);
  }
  EXPECT_EQ(split.train, train);
  EXPECT_EQ(split.valid, valid);
  EXPECT_EQ(split.test, test);
  EXPECT_EQ(split.train_end_time, train_end);
  EXPECT_EQ(split.valid_end_time, valid_end);
  const auto manifest = split.manifest();
  EXPECT_EQ(manifest.at("train_end_time").get<Timestamp>(), train_end);
}

TEST(Vocabulary, SortedAndDeduplicated) {
  Vocabulary v({"b", "a", "c", "a"});
  EXPECT_EQ(v.size(), 3u);
  EXPECT_EQ(v.id(0), "a");
  EXPECT_EQ(v.at("c"), 2u);
  EXPECT_FALSE(v.find("z").has_value());
  EXPECT_THROW(v.at("z"), InputError);
}

TEST(BuildHistories, CutoffBoundary) {
  std::vector<IndexedEvent> train = {{0, 1, 5}, {0, 2, 15}, {0, 3, 10}};
  const auto h = build_histories(train, 10, 1);
  ASSERT_EQ(h.size(), 1u);
  ASSERT_EQ(h[0].past().size(), 1u);
  EXPECT_EQ(h[0].past()[0].time, 5);
  ASSERT_EQ(h[0].recent().size(), 2u);
  EXPECT_EQ(h[0].recent()[0].time, 10);
  EXPECT_EQ(h[0].recent()[1].time, 15);
}

TEST(BuildHistories, PartitionMatchesScan) {
  Rng rng(9);
  std::uniform_int_distribution<UserIdx> user(0, 19);
  std::uniform_int_distribution<ItemIdx> item(0, 49);
  std::uniform_int_distribution<Timestamp> time(0, 999);
  std::vector<IndexedEvent> train;
  for (int n = 0; n < 1000; ++n) train.push_back({user(rng), item(rng), time(rng)});
  const Timestamp cutoff = 600;
  const auto hist = build_histories(train, cutoff, 20);
  for (UserIdx u = 0; u < 20; ++u) {
    std::vector<std::pair<Timestamp, ItemIdx>> past, recent;
    for (const auto& e : train) {
      if (e.user != u) continue;
      (e.time < cutoff ? past : recent).push_back({e.time, e.item});
    }
    std::stable_sort(past.begin(), past.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::stable_sort(recent.begin(), recent.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    ASSERT_EQ(hist[u].past().size(), past.size());
    ASSERT_EQ(hist[u].recent().size(), recent.size());
    EXPECT_EQ(hist[u].past().size() + hist[u].recent().size(), hist[u].events().size());
    for (std::size_t k = 0; k < past.size(); ++k) {
      EXPECT_EQ(hist[u].past()[k].time, past[k].first);
      EXPECT_EQ(hist[u].past()[k].item, past[k].second);
    }
    for (std::size_t k = 0; k < recent.size(); ++k) {
      EXPECT_EQ(hist[u].recent()[k].time, recent[k].first);
      EXPECT_EQ(hist[u].recent()[k].item, recent[k].second);
    }
  }
}

}  // namespace
}  // namespace peris
