#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "peris/binning.hpp"
#include "peris/model.hpp"

namespace peris {

// Squared error, scaled by gamma on negative labels.
double loss_pis(double pred, double label, double gamma);

// [d(P, e_{u,pos}) - d(P, e_{u,neg}) + margin]_+
double loss_preference(const ModelState& state, UserIdx user, ItemIdx pos, ItemIdx neg,
                       double margin);

struct LossTerms {
  double intrinsic = 0.0;
  double extrinsic = 0.0;
  double pref = 0.0;

  LossTerms& operator+=(const LossTerms& o) {
    intrinsic += o.intrinsic;
    extrinsic += o.extrinsic;
    pref += o.pref;
    return *this;
  }
};

// Multipliers applied to each loss term when accumulating gradients.
struct LossWeights {
  double intrinsic = 0.0;
  double extrinsic = 0.0;
  double pref = 0.0;
};

// One (user, positive item) training pair with its sampled negatives and
// the extrinsic target precomputed for the current epoch.
struct TrainingExample {
  UserIdx user = 0;
  ItemIdx item = 0;
  std::uint8_t label = 0;
  std::uint8_t ext_label = 0;
  std::span<const double> ext_seq;
  std::span<const ItemIdx> negatives;
};

// Evaluates all three loss terms for one example. With `grad` set, adds the
// gradient of w.intrinsic*L_I + w.extrinsic*L_E + w.pref*L_P into it; terms
// with zero weight are not backpropagated. `hinge_args`, when set, receives
// the pre-clamp hinge argument of every (pos, neg) pair.
LossTerms example_objective(const ModelState& state, const HyperParams& hp,
                            const BinnedHistories& features, const TrainingExample& example,
                            const LossWeights& weights, ModelState* grad,
                            std::vector<double>* hinge_args = nullptr);

}  // namespace peris
