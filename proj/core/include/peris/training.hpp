#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "peris/binning.hpp"
#include "peris/corpus.hpp"
#include "peris/gradcheck.hpp"
#include "peris/model.hpp"
#include "peris/objective.hpp"
#include "peris/random.hpp"

namespace peris {

struct TrainPair {
  UserIdx user = 0;
  ItemIdx item = 0;
  std::uint8_t label = 0;  // 1 iff the item was consumed in the recent period
};

// Everything the PIS task derives from the training interactions: the
// past/recent division at the cutoff, both bin grids, dense bin features and
// the (user, item) candidate pairs with their labels.
class TrainingData {
 public:
  TrainingData(const IndexedSplit& split, const HyperParams& hp);
  // `train_end` is the last instant of the training period; the cutoff is
  // train_end - recent_days.
  TrainingData(std::span<const IndexedEvent> train, std::size_t n_users, std::size_t n_items,
               Timestamp train_end, const HyperParams& hp);

  std::size_t n_users() const { return histories_.size(); }
  std::size_t n_items() const { return n_items_; }
  Timestamp cutoff() const { return cutoff_; }
  const BinGrid& train_grid() const { return train_grid_; }
  const BinGrid& full_grid() const { return full_grid_; }
  const HyperParams& hyper() const { return hp_; }

  std::span<const ConsumptionHistory> histories() const { return histories_; }
  // Past-part features on the training grid.
  const BinnedHistories& features() const { return *past_bins_; }
  // All training interactions on the expanded grid, used for scoring.
  std::shared_ptr<const BinnedHistories> inference_bins() const { return full_bins_; }
  // Inference features with every timestamp moved by `shift` seconds.
  std::shared_ptr<const BinnedHistories> shifted_inference_bins(Timestamp shift) const;

  std::span<const TrainPair> pairs() const { return pairs_; }
  // Distinct training items of a user, ascending.
  std::span<const ItemIdx> user_items(UserIdx user) const { return user_items_.at(user); }
  bool recent_label(UserIdx user, ItemIdx item) const;

 private:
  HyperParams hp_;
  std::size_t n_items_ = 0;
  Timestamp cutoff_ = 0;
  BinGrid train_grid_;
  BinGrid full_grid_;
  std::vector<ConsumptionHistory> histories_;
  std::shared_ptr<const BinnedHistories> past_bins_;
  std::shared_ptr<const BinnedHistories> full_bins_;
  std::vector<std::vector<ItemIdx>> user_items_;
  std::vector<std::vector<ItemIdx>> recent_items_;
  std::vector<TrainPair> pairs_;
};

// Extrinsic feature sequences and labels for every training pair, computed
// from the user embeddings at one point in time.
struct ExtrinsicTargets {
  std::size_t length = 0;
  std::vector<double> seqs;
  std::vector<std::uint8_t> labels;

  std::span<const double> seq(std::size_t pair) const {
    return std::span(seqs).subspan(pair * length, length);
  }
};

ExtrinsicTargets compute_extrinsic_targets(const ModelState& state, const TrainingData& data,
                                           std::size_t threads = 1);

// `n` distinct items drawn uniformly from the items the user did not consume.
std::vector<ItemIdx> sample_negatives(std::span<const ItemIdx> consumed, std::size_t n_items,
                                      std::size_t n, Rng& rng);

struct LossBreakdown {
  double intrinsic = 0.0;
  double extrinsic = 0.0;
  double pref = 0.0;
  double final = 0.0;
};

struct TrainConfig {
  HyperParams hyper;
  std::size_t epochs = 50;
  std::uint64_t seed = 1;
  std::size_t patience = 10;
  std::size_t threads = 1;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct ValidationScore {
  double hr10 = 0.0;
  double ndcg10 = 0.0;
};

struct EpochLog {
  std::size_t epoch = 0;
  bool warmup = false;
  LossBreakdown losses;
  std::optional<ValidationScore> valid;
  double wall_ms = 0.0;
};

nlohmann::json to_json_line(const EpochLog& log);

using Validator = std::function<ValidationScore(const ModelState&)>;
using EpochCallback = std::function<void(const EpochLog&)>;

struct TrainResult {
  ModelState state;  // best validation epoch, or the last epoch without a validator
  std::vector<EpochLog> history;
  std::size_t best_epoch = 0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Warm-up epochs minimize the preference loss only; later epochs minimize
// lambda*(mu*L_I + (1-mu)*L_E) + (1-lambda)*L_P. Each step runs the forward
// and backward passes over a mini-batch of (user, positive) pairs, applies
// Adam and projects the embeddings onto the unit ball.
TrainResult train(const TrainingData& data, const TrainConfig& config,
                  const Validator& validator = {}, const EpochCallback& on_epoch = {});

// Loss weights for one phase of training.
LossWeights phase_weights(const HyperParams& hp, bool warmup);

// L_F and its components over every training pair, with negatives drawn from
// `seed` and extrinsic targets taken from `state`.
LossBreakdown full_objective(const ModelState& state, const TrainingData& data,
                             std::uint64_t seed);

// Compares the analytic gradient of L_F (post-warm-up weights, averaged over
// `pairs`) with central differences.
GradCheckReport check_model_gradient(const ModelState& state, const TrainingData& data,
                                     std::span<const std::size_t> pairs, double eps,
                                     std::size_t coords_per_group, std::uint64_t seed);

}  // namespace peris
