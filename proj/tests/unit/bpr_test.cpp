#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "peris/bpr.hpp"
#include "tiny_instance.hpp"

namespace peris {
namespace {

BprConfig tiny_bpr(std::size_t epochs = 50) {
  BprConfig c;
  c.k = 4;
  c.lr = 0.05;
  c.batch = 4;
  c.epochs = epochs;
  c.seed = 2;
  c.patience = 0;
  return c;
}

TEST(BprScore, DotPlusBias) {
  BprState s = BprState::zeros(1, 2, 2);
  s.user_emb.row(0) << 1.0, 2.0;
  s.item_emb.row(1) << 0.5, -1.0;
  s.item_bias(1) = 0.25;
  EXPECT_DOUBLE_EQ(bpr_score(s, 0, 1), 0.5 - 2.0 + 0.25);
  EXPECT_THROW(bpr_score(s, 1, 0), InputError);
  EXPECT_THROW(bpr_score(s, 0, 2), InputError);
}

TEST(BprLoss, MatchesFormula) {
  Rng rng(1);
  const BprState s = BprState::initialize(2, 3, 4, rng);
  const double x = bpr_score(s, 1, 0) - bpr_score(s, 1, 2);
  EXPECT_NEAR(bpr_loss(s, 1, 0, 2), -std::log(oracle::sigmoid(x)), 1e-14);
}

TEST(BprTrain, SeparableCase) {
  const std::vector<IndexedEvent> events = {{0, 0, 10}, {0, 0, 20}};
  const BprTrainData data(events, 1, 2);
  const auto result = bpr_train(data, tiny_bpr());
  EXPECT_GT(bpr_score(result.state, 0, 0), bpr_score(result.state, 0, 1));
}

TEST(BprTrain, GradientMatchesFiniteDifferences) {
  const auto events = testing::tiny_events(5, 8, 6, 50, 30, 3);
  const BprTrainData data(events, 5, 8);
  Rng rng(4);
  const BprState s = BprState::initialize(5, 8, 4, rng);
  const auto report = check_bpr_gradient(s, data, 1e-6, 40, 5);
  EXPECT_GT(report.checked, 40u);
  EXPECT_LT(report.max_rel_error, 1e-4);
}

TEST(BprTrain, LossDecreases) {
  const auto events = testing::tiny_events(5, 8, 6, 50, 30, 6);
  const BprTrainData data(events, 5, 8);
  const auto result = bpr_train(data, tiny_bpr(50));
  ASSERT_EQ(result.history.size(), 50u);
  EXPECT_LT(result.history.back().losses.final, result.history.front().losses.final);
}

TEST(BprTrain, TimestampBlind) {
  auto events = testing::tiny_events(6, 10, 8, 60, 30, 7);
  const auto a = bpr_train(BprTrainData(events, 6, 10), tiny_bpr(10));
  Rng rng(8);
  std::uniform_int_distribution<Timestamp> t(0, days(900));
  for (auto& e : events) e.time = t(rng) + days(5000);
  const auto b = bpr_train(BprTrainData(events, 6, 10), tiny_bpr(10));
  EXPECT_TRUE(a.state == b.state);
}

TEST(BprTrain, ThreadCountDoesNotMatter) {
  const auto events = testing::tiny_events(6, 10, 8, 60, 30, 9);
  const BprTrainData data(events, 6, 10);
  auto cfg = tiny_bpr(5);
  const auto a = bpr_train(data, cfg);
  cfg.threads = 3;
  EXPECT_TRUE(bpr_train(data, cfg).state == a.state);
}

TEST(BprConfig, ValidationAndJson) {
  BprConfig c = tiny_bpr();
  nlohmann::json j = c;
  EXPECT_EQ(j.get<BprConfig>().epochs, c.epochs);
  j["extra"] = true;
  EXPECT_THROW(j.get<BprConfig>(), InputError);
  c.k = 0;
  EXPECT_THROW(c.validate(), InputError);
}

}  // namespace
}  // namespace peris
