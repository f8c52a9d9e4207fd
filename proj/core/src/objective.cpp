#include "peris/objective.hpp"

#include <algorithm>

namespace peris {

double loss_pis(double pred, double label, double gamma) {
  const double err = label - pred;
  return (label > 0.5 ? 1.0 : gamma) * err * err;
}

double loss_preference(const ModelState& state, UserIdx user, ItemIdx pos, ItemIdx neg,
                       double margin) {
  const double d_pos = (state.proto_pref - joint_embedding(state, user, pos)).norm();
  const double d_neg = (state.proto_pref - joint_embedding(state, user, neg)).norm();
  return std::max(d_pos - d_neg + margin, 0.0);
}

namespace {

double loss_pis_grad(double pred, double label, double gamma) {
  return -2.0 * (label > 0.5 ? 1.0 : gamma) * (label - pred);
}

double intrinsic_term(const ModelState& state, const HyperParams& hp,
                      const BinnedHistories& features, const TrainingExample& ex, double weight,
                      ModelState* grad) {
  const ItemSequence* own = features.find(ex.user, ex.item);
  const Eigen::Index k = state.input_proj.size();
  std::vector<double> seq;
  Vector extra;
  if (hp.plain_pis()) {
    seq = own ? own->values : std::vector<double>(features.seq_len(), 0.0);
    extra = Vector::Zero(k);
  } else {
    std::span<const double> own_values;
    if (own) own_values = own->values;
    seq = intrinsic_feature(state, hp.tau, ex.item, own_values, features.items_of(ex.user));
    if (seq.empty()) seq.assign(features.seq_len(), 0.0);
    extra = joint_embedding(state, ex.user, ex.item);
  }
  const bool backprop = grad && weight != 0.0;
  HeadPass pass;
  const double pred = run_head(state, seq, extra, backprop ? &pass : nullptr);
  const double loss = loss_pis(pred, ex.label, hp.gamma);
  if (!backprop) return loss;

  std::vector<double> d_seq;
  Vector d_extra;
  backprop_head(state, pass, weight * loss_pis_grad(pred, ex.label, hp.gamma), *grad, d_seq,
                d_extra);
  if (hp.plain_pis()) return loss;

  grad->user_emb.row(ex.user) += d_extra.transpose();
  grad->item_emb.row(ex.item) += d_extra.transpose();
  // Similarity weights alpha_{i,j} depend on the item embeddings.
  const auto v_i = state.item_emb.row(ex.item).transpose();
  for (const auto& other : features.items_of(ex.user)) {
    if (other.item == ex.item) continue;
    double d_alpha = 0.0;
    for (std::size_t n = 0; n < d_seq.size(); ++n) d_alpha += d_seq[n] * other.values[n];
    if (d_alpha == 0.0) continue;
    similarity_backward(v_i, state.item_emb.row(other.item).transpose(), d_alpha,
                        grad->item_emb.row(ex.item).transpose(),
                        grad->item_emb.row(other.item).transpose());
  }
  return loss;
}

double extrinsic_term(const ModelState& state, const HyperParams& hp,
                      const TrainingExample& ex, double weight, ModelState* grad) {
  const bool backprop = grad && weight != 0.0;
  HeadPass pass;
  const double pred =
      run_head(state, ex.ext_seq, Vector::Zero(state.input_proj.size()), backprop ? &pass : nullptr);
  const double loss = loss_pis(pred, ex.ext_label, hp.gamma);
  if (backprop) {
    std::vector<double> d_seq;
    Vector d_extra;
    backprop_head(state, pass, weight * loss_pis_grad(pred, ex.ext_label, hp.gamma), *grad, d_seq,
                  d_extra);
  }
  return loss;
}

double preference_term(const ModelState& state, const HyperParams& hp, const TrainingExample& ex,
                       double weight, ModelState* grad, std::vector<double>* hinge_args) {
  const Vector diff_pos = state.proto_pref - joint_embedding(state, ex.user, ex.item);
  const double d_pos = diff_pos.norm();
  double total = 0.0;
  for (const ItemIdx neg : ex.negatives) {
    const Vector diff_neg = state.proto_pref - joint_embedding(state, ex.user, neg);
    const double d_neg = diff_neg.norm();
    const double arg = d_pos - d_neg + hp.margin;
    if (hinge_args) hinge_args->push_back(arg);
    if (arg <= 0.0) continue;
    total += arg;
    if (!grad || weight == 0.0 || d_pos == 0.0 || d_neg == 0.0) continue;
    // d||P - e|| / dP = (P - e) / d, and the negative of that w.r.t. e.
    const Vector g_pos = (weight / d_pos) * diff_pos;
    const Vector g_neg = (weight / d_neg) * diff_neg;
    grad->proto_pref += g_pos - g_neg;
    grad->user_emb.row(ex.user) += (g_neg - g_pos).transpose();
    grad->item_emb.row(ex.item) -= g_pos.transpose();
    grad->item_emb.row(neg) += g_neg.transpose();
  }
  return total;
}

}  // namespace

LossTerms example_objective(const ModelState& state, const HyperParams& hp,
                            const BinnedHistories& features, const TrainingExample& example,
                            const LossWeights& weights, ModelState* grad,
                            std::vector<double>* hinge_args) {
  LossTerms terms;
  terms.intrinsic = intrinsic_term(state, hp, features, example, weights.intrinsic, grad);
  terms.extrinsic = extrinsic_term(state, hp, example, weights.extrinsic, grad);
  terms.pref = preference_term(state, hp, example, weights.pref, grad, hinge_args);
  return terms;
}

}  // namespace peris
