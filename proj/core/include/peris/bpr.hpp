#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "peris/corpus.hpp"
#include "peris/gradcheck.hpp"
#include "peris/model.hpp"
#include "peris/random.hpp"
#include "peris/scorer.hpp"
#include "peris/training.hpp"

namespace peris {

struct BprConfig {
  std::size_t k = 16;
  double lr = 0.01;
  std::size_t batch = 256;
  std::size_t epochs = 50;
  std::uint64_t seed = 1;
  std::size_t patience = 10;
  std::size_t threads = 1;

  void validate() const;
};

void to_json(nlohmann::json& j, const BprConfig& c);
void from_json(const nlohmann::json& j, BprConfig& c);

struct BprState {
  Matrix user_emb;  // |U| x k
  Matrix item_emb;  // |I| x k
  Vector item_bias;

  std::size_t dim() const { return static_cast<std::size_t>(user_emb.cols()); }
  std::size_t n_users() const { return static_cast<std::size_t>(user_emb.rows()); }
  std::size_t n_items() const { return static_cast<std::size_t>(item_emb.rows()); }

  static BprState initialize(std::size_t n_users, std::size_t n_items, std::size_t k, Rng& rng);
  static BprState zeros(std::size_t n_users, std::size_t n_items, std::size_t k);
  bool all_finite() const;

  friend bool operator==(const BprState& a, const BprState& b);
};

std::vector<TensorView> tensors(BprState& state);
std::vector<ConstTensorView> tensors(const BprState& state);

// dot(u_u, v_i) + b_i
double bpr_score(const BprState& state, UserIdx user, ItemIdx item);

// -log sigmoid(s(u, pos) - s(u, neg)); with `grad` set, adds `weight` times
// its gradient.
double bpr_loss(const BprState& state, UserIdx user, ItemIdx pos, ItemIdx neg, double weight = 1.0,
                BprState* grad = nullptr);

// Distinct (user, item) training pairs; timestamps are discarded.
class BprTrainData {
 public:
  BprTrainData(std::span<const IndexedEvent> train, std::size_t n_users, std::size_t n_items);

  std::size_t n_users() const { return user_items_.size(); }
  std::size_t n_items() const { return n_items_; }
  std::span<const TrainPair> pairs() const { return pairs_; }
  std::span<const ItemIdx> user_items(UserIdx user) const { return user_items_.at(user); }

 private:
  std::size_t n_items_ = 0;
  std::vector<std::vector<ItemIdx>> user_items_;
  std::vector<TrainPair> pairs_;
};

using BprValidator = std::function<ValidationScore(const BprState&)>;

struct BprResult {
  BprState state;
  std::vector<EpochLog> history;  // loss reported in losses.pref and losses.final
  std::size_t best_epoch = 0;
};

BprResult bpr_train(const BprTrainData& data, const BprConfig& config,
                    const BprValidator& validator = {}, const EpochCallback& on_epoch = {});

GradCheckReport check_bpr_gradient(const BprState& state, const BprTrainData& data, double eps,
                                   std::size_t coords_per_group, std::uint64_t seed);

class BprScorer final : public Scorer {
 public:
  explicit BprScorer(BprState state) : state_(std::move(state)) {}

  std::size_t n_users() const override { return state_.n_users(); }
  std::size_t n_items() const override { return state_.n_items(); }
  void score(UserIdx user, std::span<const ItemIdx> items, std::span<double> out) const override;
  using Scorer::score;

  const BprState& state() const { return state_; }

 private:
  BprState state_;
};

}  // namespace peris
