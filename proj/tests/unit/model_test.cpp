#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "peris/lstm.hpp"
#include "peris/model.hpp"

namespace peris {
namespace {

Vector random_vector(std::size_t k, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Vector v(static_cast<Eigen::Index>(k));
  for (auto& x : v) x = d(rng);
  return v;
}

std::vector<std::vector<double>> rows_of(const Matrix& m) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[r].push_back(m(r, c));
  }
  return out;
}

TEST(Similarity, Examples) {
  Vector a(3), b(3);
  a << 1, 2, 3;
  EXPECT_DOUBLE_EQ(similarity(a, a, 0.0), 1.0);
  EXPECT_NEAR(similarity(a, -a, 0.0), 0.0, 1e-15);
  a << 1, 0, 0;
  b << 0, 2, 0;
  EXPECT_DOUBLE_EQ(similarity(a, b, 0.3), 0.8);
  EXPECT_THROW(similarity(a, Vector::Zero(3), 0.0), InputError);
}

TEST(Similarity, RangeAndGradient) {
  Rng rng(1);
  for (int c = 0; c < 50; ++c) {
    const Vector a = random_vector(5, rng), b = random_vector(5, rng);
    const double s = similarity(a, b, 0.3);
    EXPECT_GE(s, 0.3);
    EXPECT_LE(s, 1.3);
    Vector da = Vector::Zero(5), db = Vector::Zero(5);
    similarity_backward(a, b, 1.0, da, db);
    for (Eigen::Index j = 0; j < 5; ++j) {
      const double eps = 1e-6;
      Vector ap = a, am = a, bp = b, bm = b;
      ap(j) += eps;
      am(j) -= eps;
      bp(j) += eps;
      bm(j) -= eps;
      EXPECT_NEAR(da(j), (similarity(ap, b, 0.3) - similarity(am, b, 0.3)) / (2 * eps), 1e-8);
      EXPECT_NEAR(db(j), (similarity(a, bp, 0.3) - similarity(a, bm, 0.3)) / (2 * eps), 1e-8);
    }
  }
}

TEST(Lstm, ZeroInputsAndBiasesGiveZeroState) {
  Rng rng(2);
  ModelState s = ModelState::initialize(2, 2, 6, rng);
  const std::vector<double> bins(5, 0.0);
  const Vector h = encode(s, bins, Vector::Zero(6));
  EXPECT_EQ(h, Vector::Zero(6));
}

TEST(Lstm, MatchesHandRolledRecurrence) {
  Rng rng(3);
  for (std::size_t steps : {1u, 5u}) {
    const std::size_t k = 4;
    LstmParams p = LstmParams::random(k, rng);
    p.bias = random_vector(4 * k, rng, 0.5);
    Eigen::MatrixXd inputs(k, static_cast<Eigen::Index>(steps));
    for (auto& x : inputs.reshaped()) x = std::normal_distribution<double>(0, 1)(rng);
    const Vector got = lstm_forward(p, inputs);
    const auto w_in = rows_of(p.w_input), w_hid = rows_of(p.w_hidden);
    const std::vector<double> b(p.bias.begin(), p.bias.end());
    std::vector<double> h(k, 0.0), c(k, 0.0);
    for (std::size_t n = 0; n < steps; ++n) {
      std::vector<double> x(k);
      for (std::size_t j = 0; j < k; ++j) x[j] = inputs(j, n);
      oracle::lstm_cell(w_in, w_hid, b, x, h, c);
    }
    for (std::size_t j = 0; j < k; ++j) EXPECT_NEAR(got(j), h[j], 1e-14);
  }
}

TEST(Lstm, EncodeFeedsScaledBinsPlusExtra) {
  Rng rng(4);
  const std::size_t k = 5;
  ModelState s = ModelState::initialize(3, 3, k, rng);
  s.lstm.bias = random_vector(4 * k, rng, 0.3);
  const std::vector<double> bins = {0, 2, 1};
  const Vector extra = random_vector(k, rng);
  const auto w_in = rows_of(s.lstm.w_input), w_hid = rows_of(s.lstm.w_hidden);
  const std::vector<double> b(s.lstm.bias.begin(), s.lstm.bias.end());
  std::vector<double> h(k, 0.0), c(k, 0.0);
  for (double count : bins) {
    std::vector<double> x(k);
    for (std::size_t j = 0; j < k; ++j) x[j] = count * s.input_proj(j) + extra(j);
    oracle::lstm_cell(w_in, w_hid, b, x, h, c);
  }
  const Vector got = encode(s, bins, extra);
  for (std::size_t j = 0; j < k; ++j) EXPECT_NEAR(got(j), h[j], 1e-14);
}

TEST(Lstm, BackwardMatchesFiniteDifferences) {
  Rng rng(5);
  const std::size_t k = 3, steps = 4;
  LstmParams p = LstmParams::random(k, rng);
  p.bias = random_vector(4 * k, rng, 0.5);
  Eigen::MatrixXd inputs(k, steps);
  for (auto& x : inputs.reshaped()) x = std::normal_distribution<double>(0, 1)(rng);
  const Vector weights = random_vector(k, rng);
  auto loss = [&](const LstmParams& q, const Eigen::MatrixXd& in) {
    return weights.dot(lstm_forward(q, in));
  };
  LstmTrace trace;
  lstm_forward(p, inputs, &trace);
  LstmParams grad = LstmParams::zeros(k);
  const Eigen::MatrixXd d_inputs = lstm_backward(p, trace, weights, grad);
  const double eps = 1e-6;
  auto check = [&](double& x, double analytic) {
    const double saved = x;
    x = saved + eps;
    const double up = loss(p, inputs);
    x = saved - eps;
    const double down = loss(p, inputs);
    x = saved;
    EXPECT_NEAR(analytic, (up - down) / (2 * eps), 1e-8);
  };
  for (Eigen::Index r = 0; r < p.w_input.rows(); ++r) {
    for (Eigen::Index c = 0; c < p.w_input.cols(); ++c) {
      check(p.w_input(r, c), grad.w_input(r, c));
      check(p.w_hidden(r, c), grad.w_hidden(r, c));
    }
    check(p.bias(r), grad.bias(r));
  }
  for (Eigen::Index r = 0; r < inputs.rows(); ++r) {
    for (Eigen::Index c = 0; c < inputs.cols(); ++c) check(inputs(r, c), d_inputs(r, c));
  }
}

TEST(PisScore, Examples) {
  Vector c(2), h(2);
  c << 0.3, -0.2;
  EXPECT_DOUBLE_EQ(pis_score(c, c), 1.0);
  h << 1.3, -0.2;
  EXPECT_DOUBLE_EQ(pis_score(h, c), 0.0);
  Rng rng(6);
  for (int n = 0; n < 20; ++n) {
    const Vector a = random_vector(7, rng), b = random_vector(7, rng);
    double sq = 0.0;
    for (int j = 0; j < 7; ++j) sq += (b(j) - a(j)) * (b(j) - a(j));
    EXPECT_NEAR(pis_score(a, b), 1.0 - std::sqrt(sq), 1e-14);
  }
}

ModelState small_state(std::size_t users, std::size_t items, std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  return ModelState::initialize(users, items, k, rng);
}

TEST(IntrinsicFeature, NoOtherItemsReturnsOwnBins) {
  const ModelState s = small_state(1, 3, 4, 7);
  const std::vector<double> own = {1, 0, 2};
  const std::vector<ItemSequence> items = {{0, 3, own}};
  EXPECT_EQ(intrinsic_feature(s, 0.3, 0, own, items), own);
}

TEST(IntrinsicFeature, HalfWeightedOtherItem) {
  ModelState s = ModelState::zeros(1, 2, 2);
  s.item_emb.row(0) << 1, 0;
  s.item_emb.row(1) << 0, 1;
  const std::vector<double> own = {1, 1};
  const std::vector<ItemSequence> items = {{0, 2, own}, {1, 2, {2, 0}}};
  EXPECT_EQ(intrinsic_feature(s, 0.0, 0, own, items), (std::vector<double>{2.0, 1.0}));
}

TEST(IntrinsicFeature, MatchesWeightedSumAndRejectsLengthMismatch) {
  const ModelState s = small_state(1, 6, 5, 8);
  Rng rng(9);
  std::uniform_int_distribution<int> count(0, 3);
  std::vector<ItemSequence> items;
  for (ItemIdx i = 0; i < 6; i += 2) {
    std::vector<double> v(4);
    for (auto& x : v) x = count(rng);
    items.push_back({i, 1, v});
  }
  const std::vector<double> own = {1, 0, 0, 1};
  const auto got = intrinsic_feature(s, 0.5, 1, own, items);
  for (std::size_t n = 0; n < 4; ++n) {
    double expect = own[n];
    for (const auto& it : items) {
      const Vector a = s.item_emb.row(1), b = s.item_emb.row(it.item);
      const double cos = a.dot(b) / (a.norm() * b.norm());
      expect += ((cos + 1) / 2 + 0.5) * it.values[n];
    }
    EXPECT_NEAR(got[n], expect, 1e-12);
  }
  std::vector<ItemSequence> bad = items;
  bad[0].values.push_back(0);
  EXPECT_THROW(intrinsic_feature(s, 0.5, 1, own, bad), InputError);
}

TEST(ExtrinsicFeature, Examples) {
  ModelState s = ModelState::zeros(3, 1, 2);
  s.user_emb.row(0) << 1, 0;
  s.user_emb.row(1) << 2, 0;
  s.user_emb.row(2) << 0, 1;
  EXPECT_EQ(extrinsic_feature(s, 0.0, 0, {}, 2), (std::vector<double>{0, 0}));
  const std::vector<double> b = {3, 1};
  const std::vector<NeighborBins> one = {{1, b}};
  EXPECT_EQ(extrinsic_feature(s, 0.0, 0, one, 2), b);
  const std::vector<double> c = {2, 4};
  const std::vector<NeighborBins> two = {{1, b}, {2, c}};
  const auto got = extrinsic_feature(s, 0.0, 0, two, 2);
  EXPECT_DOUBLE_EQ(got[0], 3 + 0.5 * 2);
  EXPECT_DOUBLE_EQ(got[1], 1 + 0.5 * 4);
}

TEST(PredictPreference, Examples) {
  ModelState s = ModelState::zeros(1, 1, 2);
  s.user_emb.row(0) << 0.5, 0;
  s.item_emb.row(0) << 0, 0.5;
  s.proto_pref << 0.5, 0.5;
  EXPECT_DOUBLE_EQ(predict_preference(s, 0, 0), 0.0);
  s.proto_pref << 0.5, 2.5;
  EXPECT_DOUBLE_EQ(predict_preference(s, 0, 0), -2.0);
}

TEST(RecommendationScore, Composition) {
  EXPECT_EQ(recommendation_score(0.7, 0.2, -1.3, 0.0, 0.3), -1.3);
  EXPECT_EQ(recommendation_score(0.7, 0.2, -1.3, 1.0, 1.0), 0.7);
  EXPECT_DOUBLE_EQ(recommendation_score(1.0, 0.0, -1.0, 0.5, 0.3), -0.35);
}

TEST(ModelState, ProjectionBoundsRowNorms) {
  ModelState s = small_state(5, 5, 4, 10);
  s.user_emb *= 10.0;
  s.item_emb(2, 1) = 0.0;
  s.project_embeddings();
  for (Eigen::Index r = 0; r < 5; ++r) {
    EXPECT_LE(s.user_emb.row(r).norm(), 1.0 + 1e-15);
    EXPECT_LE(s.item_emb.row(r).norm(), 1.0 + 1e-15);
  }
  EXPECT_TRUE(s.all_finite());
}

TEST(ModelState, InitializationRanges) {
  const ModelState s = small_state(4, 4, 9, 11);
  const double bound = 1.0 / 3.0;
  EXPECT_TRUE(s.lstm.bias.isZero());
  EXPECT_LE(s.lstm.w_input.cwiseAbs().maxCoeff(), bound);
  EXPECT_LE(s.lstm.w_hidden.cwiseAbs().maxCoeff(), bound);
  EXPECT_EQ(small_state(4, 4, 9, 11), s);
}

class ScorerFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    histories_ = {ConsumptionHistory(0, {{0, 5}, {1, 25}, {2, 35}}, 1000),
                  ConsumptionHistory(1, {{0, 15}, {2, 30}}, 1000),
                  ConsumptionHistory(2, {{3, 2}}, 1000)};
    bins_ = std::make_shared<BinnedHistories>(histories_, HistoryPart::kAll, BinGrid{0, 10, 4}, 5,
                                              false);
    state_ = small_state(3, 5, 4, 12);
    state_.lstm.bias.setConstant(0.1);
  }

  PerisScorer scorer(double lambda, double mu, Ablation ab = {}) const {
    HyperParams hp;
    hp.k = 4;
    hp.lambda = lambda;
    hp.mu = mu;
    hp.ablation = ab;
    return PerisScorer(state_, hp, bins_);
  }

  std::vector<ConsumptionHistory> histories_;
  std::shared_ptr<BinnedHistories> bins_;
  ModelState state_;
};

TEST_F(ScorerFixture, HeadsFollowTheirDefinitions) {
  const auto s = scorer(0.5, 0.3);
  const auto own = bins_->find(0, 1)->values;
  const auto seq = intrinsic_feature(state_, 0.3, 1, own, bins_->items_of(0));
  const Vector e = state_.user_emb.row(0).transpose() + state_.item_emb.row(1).transpose();
  EXPECT_EQ(s.predict_intrinsic(0, 1), pis_score(encode(state_, seq, e), state_.proto_pis));

  const std::vector<NeighborBins> nb = {{1, bins_->find(1, 2)->values}};
  const auto ext = extrinsic_feature(state_, 0.3, 0, nb, 4);
  EXPECT_EQ(s.predict_extrinsic(0, 2), pis_score(encode(state_, ext, Vector::Zero(4)), state_.proto_pis));

  const double expect = recommendation_score(s.predict_intrinsic(0, 2), s.predict_extrinsic(0, 2),
                                             s.predict_preference(0, 2), 0.5, 0.3);
  EXPECT_EQ(s.score(0, 2), expect);
  EXPECT_THROW(s.score(0, 9), InputError);
  EXPECT_THROW(s.score(7, 0), InputError);
}

TEST_F(ScorerFixture, DegenerateCoefficients) {
  for (ItemIdx i = 0; i < 5; ++i) {
    EXPECT_EQ(scorer(0.0, 0.3).score(1, i), predict_preference(state_, 1, i));
    EXPECT_EQ(scorer(1.0, 1.0).score(1, i), scorer(1.0, 1.0).predict_intrinsic(1, i));
    EXPECT_EQ(scorer(0.5, 0.3, {true, true, false}).score(1, i), predict_preference(state_, 1, i));
  }
}

TEST_F(ScorerFixture, PlainPisUsesOwnBinsOnly) {
  const auto s = scorer(0.5, 0.3, {false, false, true});
  const auto own = bins_->find(0, 1)->values;
  EXPECT_EQ(s.predict_intrinsic(0, 1), pis_score(encode(state_, own, Vector::Zero(4)), state_.proto_pis));
  const std::vector<double> zeros(4, 0.0);
  EXPECT_EQ(s.predict_intrinsic(0, 4), pis_score(encode(state_, zeros, Vector::Zero(4)), state_.proto_pis));
  EXPECT_EQ(s.score(0, 1), recommendation_score(s.predict_intrinsic(0, 1), 0.0,
                                                predict_preference(state_, 0, 1), 0.5, 1.0));
}

TEST_F(ScorerFixture, ScoresAreDeterministic) {
  const auto a = scorer(0.3, 0.5), b = scorer(0.3, 0.5);
  std::vector<ItemIdx> items = {0, 1, 2, 3, 4};
  std::vector<double> x(5), y(5);
  a.score(2, items, x);
  b.score(2, items, y);
  EXPECT_EQ(x, y);
}

}  // namespace
}  // namespace peris
