#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "peris/binning.hpp"
#include "peris/lstm.hpp"
#include "peris/random.hpp"
#include "peris/scorer.hpp"
#include "peris/types.hpp"

namespace peris {

// Which parts of the model take part in training and scoring. Disabling a
// part zeroes its coefficient; disabling both supplementation schemes while
// keeping the PIS task leaves the plain frequency-bin classifier.
struct Ablation {
  bool intrinsic = true;
  bool extrinsic = true;
  bool pis = true;

  friend bool operator==(const Ablation&, const Ablation&) = default;
};

struct HyperParams {
  std::size_t k = 16;
  double lambda = 0.5;
  double mu = 0.3;
  double tau = 0.3;
  double margin = 0.5;
  double gamma = 0.1;
  std::int64_t bin_width_days = 28;
  std::int64_t recent_days = 112;
  std::size_t warmup_epochs = 5;
  double lr = 0.001;
  std::size_t batch = 256;
  std::size_t neighbor_cap = 20;
  std::size_t neg_per_pos = 1;
  bool recent_half = true;
  Ablation ablation;

  void validate() const;

  // Coefficients after ablation.
  double effective_lambda() const;
  double effective_mu() const;
  bool plain_pis() const { return ablation.pis && !ablation.intrinsic && !ablation.extrinsic; }

  friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

void to_json(nlohmann::json& j, const Ablation& a);
void from_json(const nlohmann::json& j, Ablation& a);
void to_json(nlohmann::json& j, const HyperParams& hp);
void from_json(const nlohmann::json& j, HyperParams& hp);

struct ModelState {
  Matrix user_emb;  // |U| x k
  Matrix item_emb;  // |I| x k
  LstmParams lstm;
  Vector input_proj;  // maps a scalar bin value into the LSTM input space
  Vector proto_pis;   // positive-class prototype for the PIS heads
  Vector proto_pref;  // preference prototype

  std::size_t dim() const { return static_cast<std::size_t>(user_emb.cols()); }
  std::size_t n_users() const { return static_cast<std::size_t>(user_emb.rows()); }
  std::size_t n_items() const { return static_cast<std::size_t>(item_emb.rows()); }

  static ModelState initialize(std::size_t n_users, std::size_t n_items, std::size_t k, Rng& rng);
  static ModelState zeros(std::size_t n_users, std::size_t n_items, std::size_t k);
  void set_zero();

  // Clips every embedding row onto the unit ball.
  void project_embeddings();
  bool all_finite() const;

  friend bool operator==(const ModelState& a, const ModelState& b);
};

enum class ParamGroup : std::size_t {
  kUserEmb,
  kItemEmb,
  kLstmInput,
  kLstmHidden,
  kLstmBias,
  kInputProj,
  kProtoPis,
  kProtoPref,
};
inline constexpr std::size_t kParamGroupCount = 8;

struct TensorView {
  std::string_view name;
  std::span<double> values;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

struct ConstTensorView {
  std::string_view name;
  std::span<const double> values;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

// Parameter tensors in ParamGroup order.
std::vector<TensorView> tensors(ModelState& state);
std::vector<ConstTensorView> tensors(const ModelState& state);

using VecRef = Eigen::Ref<const Vector>;

// (cos(a, b) + 1) / 2 + tau; throws on a zero vector.
double similarity(const VecRef& a, const VecRef& b, double tau);
// Adds upstream * d similarity / d a (resp. b) into d_a and d_b.
void similarity_backward(const VecRef& a, const VecRef& b, double upstream, Eigen::Ref<Vector> d_a,
                         Eigen::Ref<Vector> d_b);

// 1 - ||proto - h||
double pis_score(const VecRef& hidden, const VecRef& proto);

// Runs the LSTM over a bin sequence; step n receives bins[n] * input_proj + extra.
Vector encode(const ModelState& state, std::span<const double> bins, const VecRef& extra);

// Joint user-item representation u_u + v_i.
Vector joint_embedding(const ModelState& state, UserIdx user, ItemIdx item);

// -||P - e_{u,i}||
double predict_preference(const ModelState& state, UserIdx user, ItemIdx item);

// own + sum over the user's other items j of sim(v_item, v_j) * bins_j.
// `own` may be empty (item not consumed in the feature period).
std::vector<double> intrinsic_feature(const ModelState& state, double tau, ItemIdx item,
                                      std::span<const double> own,
                                      std::span<const ItemSequence> user_items);

struct NeighborBins {
  UserIdx user = 0;
  std::span<const double> bins;
};

// sum over neighbors u' of sim(u_user, u_u') * bins_u'.
std::vector<double> extrinsic_feature(const ModelState& state, double tau, UserIdx user,
                                      std::span<const NeighborBins> neighbors, std::size_t length);

// lambda * (mu * intrinsic + (1 - mu) * extrinsic) + (1 - lambda) * preference
double recommendation_score(double intrinsic, double extrinsic, double preference, double lambda,
                            double mu);

// Forward pass of a prototype head plus what its backward pass needs.
struct HeadPass {
  std::vector<double> seq;
  LstmTrace trace;
  Vector hidden;
  double score = 0.0;
};

double run_head(const ModelState& state, std::span<const double> seq, const VecRef& extra,
                HeadPass* pass = nullptr);

// Propagates d_score into the LSTM, input projection and PIS prototype
// gradients; writes dScore/dSeq and dScore/dExtra scaled by d_score.
void backprop_head(const ModelState& state, const HeadPass& pass, double d_score,
                   ModelState& grad, std::vector<double>& d_seq, Vector& d_extra);

// Scores candidates with the three heads over inference-time bin features.
class PerisScorer final : public Scorer {
 public:
  PerisScorer(ModelState state, HyperParams hp, std::shared_ptr<const BinnedHistories> bins);

  std::size_t n_users() const override { return state_.n_users(); }
  std::size_t n_items() const override { return state_.n_items(); }
  void score(UserIdx user, std::span<const ItemIdx> items, std::span<double> out) const override;
  using Scorer::score;

  double predict_intrinsic(UserIdx user, ItemIdx item) const;
  double predict_extrinsic(UserIdx user, ItemIdx item) const;
  double predict_preference(UserIdx user, ItemIdx item) const;
  // mu * intrinsic + (1 - mu) * extrinsic
  double pis_component(UserIdx user, ItemIdx item) const;

  const ModelState& state() const { return state_; }
  const HyperParams& hyper() const { return hp_; }

 private:
  void check_ids(UserIdx user, ItemIdx item) const;

  ModelState state_;
  HyperParams hp_;
  std::shared_ptr<const BinnedHistories> bins_;
};

}  // namespace peris
