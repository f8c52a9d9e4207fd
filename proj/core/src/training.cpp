#include "peris/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>

#include "peris/adam.hpp"
#include "peris/parallel.hpp"

namespace peris {

TrainingData::TrainingData(const IndexedSplit& split, const HyperParams& hp)
    : TrainingData(split.train, split.n_users(), split.n_items(), split.train_end_time, hp) {}

TrainingData::TrainingData(std::span<const IndexedEvent> train, std::size_t n_users,
                           std::size_t n_items, Timestamp train_end, const HyperParams& hp)
    : hp_(hp), n_items_(n_items) {
  hp_.validate();
  if (train.empty()) throw InputError("no training interactions");
  cutoff_ = train_end - days(hp_.recent_days);

  std::vector<Timestamp> all_times, past_times;
  for (const auto& e : train) {
    if (e.user >= n_users || e.item >= n_items) throw InputError("event index out of range");
    all_times.push_back(e.time);
    if (e.time < cutoff_) past_times.push_back(e.time);
  }
  if (past_times.empty()) throw InputError("no training interactions before the recent-period cutoff");
  if (cutoff_ > *std::max_element(all_times.begin(), all_times.end())) {
    throw InputError("recent period holds no training interactions");
  }

  const Timestamp width = days(hp_.bin_width_days);
  train_grid_ = build_grid(past_times, width);
  full_grid_ = build_grid(all_times, width);

  histories_ = build_histories(train, cutoff_, n_users);
  past_bins_ = std::make_shared<const BinnedHistories>(histories_, HistoryPart::kPast, train_grid_,
                                                       n_items, hp_.recent_half);
  full_bins_ = std::make_shared<const BinnedHistories>(histories_, HistoryPart::kAll, full_grid_,
                                                       n_items, hp_.recent_half);

  user_items_.resize(n_users);
  recent_items_.resize(n_users);
  for (std::size_t u = 0; u < n_users; ++u) {
    std::set<ItemIdx> all, recent;
    for (const auto& e : histories_[u].events()) all.insert(e.item);
    for (const auto& e : histories_[u].recent()) recent.insert(e.item);
    user_items_[u].assign(all.begin(), all.end());
    recent_items_[u].assign(recent.begin(), recent.end());
    for (const ItemIdx i : user_items_[u]) {
      pairs_.push_back({static_cast<UserIdx>(u), i,
                        static_cast<std::uint8_t>(recent.contains(i) ? 1 : 0)});
    }
  }
}

std::shared_ptr<const BinnedHistories> TrainingData::shifted_inference_bins(Timestamp shift) const {
  if (shift == 0) return full_bins_;
  return std::make_shared<const BinnedHistories>(histories_, HistoryPart::kAll, full_grid_,
                                                 n_items_, hp_.recent_half, shift);
}

bool TrainingData::recent_label(UserIdx user, ItemIdx item) const {
  const auto& r = recent_items_.at(user);
  return std::binary_search(r.begin(), r.end(), item);
}

ExtrinsicTargets compute_extrinsic_targets(const ModelState& state, const TrainingData& data,
                                           std::size_t threads) {
  const auto& hp = data.hyper();
  const auto& features = data.features();
  ExtrinsicTargets out;
  out.length = features.seq_len();
  const auto pairs = data.pairs();
  out.seqs.assign(pairs.size() * out.length, 0.0);
  out.labels.assign(pairs.size(), 0);
  parallel_for(pairs.size(), threads, [&](std::size_t p) {
    const auto& pair = pairs[p];
    const auto u = state.user_emb.row(pair.user).transpose();
    double weighted_labels = 0.0;
    double* seq = out.seqs.data() + p * out.length;
    for (const auto& nb : features.neighbors(pair.user, pair.item, hp.neighbor_cap)) {
      const double beta = similarity(u, state.user_emb.row(nb.user).transpose(), hp.tau);
      for (std::size_t n = 0; n < out.length; ++n) seq[n] += beta * nb.sequence->values[n];
      if (data.recent_label(nb.user, pair.item)) weighted_labels += beta;
    }
    out.labels[p] = weighted_labels >= 1.0 ? 1 : 0;
  });
  return out;
}

std::vector<ItemIdx> sample_negatives(std::span<const ItemIdx> consumed, std::size_t n_items,
                                      std::size_t n, Rng& rng) {
  if (consumed.size() >= n_items) throw InputError("user consumed every item; no negatives exist");
  const std::size_t available = n_items - consumed.size();
  if (n > available) throw InputError("not enough unconsumed items to sample negatives");
  auto is_consumed = [&](ItemIdx i) { return std::binary_search(consumed.begin(), consumed.end(), i); };

  std::vector<ItemIdx> out;
  out.reserve(n);
  if (available * 4 < n_items) {
    std::vector<ItemIdx> pool;
    pool.reserve(available);
    for (std::size_t i = 0; i < n_items; ++i) {
      if (!is_consumed(static_cast<ItemIdx>(i))) pool.push_back(static_cast<ItemIdx>(i));
    }
    for (std::size_t s = 0; s < n; ++s) {
      std::uniform_int_distribution<std::size_t> pick(s, pool.size() - 1);
      std::swap(pool[s], pool[pick(rng)]);
      out.push_back(pool[s]);
    }
    return out;
  }
  std::uniform_int_distribution<ItemIdx> pick(0, static_cast<ItemIdx>(n_items - 1));
  while (out.size() < n) {
    const ItemIdx i = pick(rng);
    if (is_consumed(i) || std::find(out.begin(), out.end(), i) != out.end()) continue;
    out.push_back(i);
  }
  return out;
}

void TrainConfig::validate() const {
  hyper.validate();
  if (epochs < 1) throw InputError("epochs must be >= 1");
  if (epochs < hyper.warmup_epochs) throw InputError("epochs must be >= warmup_epochs");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"hyper", c.hyper},
       {"epochs", c.epochs},
       {"seed", c.seed},
       {"patience", c.patience},
       {"threads", c.threads}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  if (!j.is_object()) throw InputError("train config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    static const std::set<std::string> known{"hyper", "epochs", "seed", "patience", "threads"};
    if (!known.contains(key)) throw InputError("unknown train config field '" + key + "'");
  }
  const TrainConfig d;
  c.hyper = j.value("hyper", d.hyper);
  c.epochs = j.value("epochs", d.epochs);
  c.seed = j.value("seed", d.seed);
  c.patience = j.value("patience", d.patience);
  c.threads = j.value("threads", d.threads);
}

nlohmann::json to_json_line(const EpochLog& log) {
  nlohmann::json j = {{"epoch", log.epoch},          {"l_I", log.losses.intrinsic},
                      {"l_E", log.losses.extrinsic}, {"l_P", log.losses.pref},
                      {"l_F", log.losses.final},     {"valid_hr10", nullptr},
                      {"valid_ndcg10", nullptr},     {"wall_ms", log.wall_ms}};
  if (log.valid) {
    j["valid_hr10"] = log.valid->hr10;
    j["valid_ndcg10"] = log.valid->ndcg10;
  }
  return j;
}

LossWeights phase_weights(const HyperParams& hp, bool warmup) {
  if (warmup) return {0.0, 0.0, 1.0};
  const double lambda = hp.effective_lambda();
  const double mu = hp.effective_mu();
  return {lambda * mu, lambda * (1.0 - mu), 1.0 - lambda};
}

namespace {

constexpr std::size_t kChunk = 32;

void accumulate(ModelState& into, const ModelState& from) {
  auto dst = tensors(into);
  const auto src = tensors(from);
  for (std::size_t g = 0; g < dst.size(); ++g) {
    for (std::size_t i = 0; i < dst[g].values.size(); ++i) dst[g].values[i] += src[g].values[i];
  }
}

LossBreakdown combine(const LossTerms& sums, double n_users, const HyperParams& hp, bool warmup) {
  LossBreakdown out;
  out.intrinsic = sums.intrinsic / n_users;
  out.extrinsic = sums.extrinsic / n_users;
  out.pref = sums.pref / n_users;
  if (warmup) {
    out.final = out.pref;
  } else {
    const double lambda = hp.effective_lambda();
    const double mu = hp.effective_mu();
    out.final = lambda * (mu * out.intrinsic + (1.0 - mu) * out.extrinsic) + (1.0 - lambda) * out.pref;
  }
  return out;
}

bool finite(const LossTerms& t) {
  return std::isfinite(t.intrinsic) && std::isfinite(t.extrinsic) && std::isfinite(t.pref);
}

}  // namespace

TrainResult train(const TrainingData& data, const TrainConfig& config, const Validator& validator,
                  const EpochCallback& on_epoch) {
  config.validate();
  const HyperParams& hp = data.hyper();
  if (!(hp == config.hyper)) throw InputError("training data was built with different hyperparameters");

  Rng init_rng(derive_seed(config.seed, 1));
  ModelState state = ModelState::initialize(data.n_users(), data.n_items(), hp.k, init_rng);
  Rng rng(derive_seed(config.seed, 2));

  std::vector<std::size_t> sizes;
  for (const auto& t : tensors(state)) sizes.push_back(t.values.size());
  Adam adam(AdamOptions{.lr = hp.lr}, sizes);

  const auto pairs = data.pairs();
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t p = 0; p < order.size(); ++p) order[p] = p;

  const std::size_t max_chunks = (hp.batch + kChunk - 1) / kChunk;
  std::vector<ModelState> chunk_grads(
      max_chunks, ModelState::zeros(data.n_users(), data.n_items(), hp.k));
  std::vector<LossTerms> chunk_terms(max_chunks);
  ModelState grad = ModelState::zeros(data.n_users(), data.n_items(), hp.k);

  TrainResult result{state, {}, 0};
  double best_ndcg = -std::numeric_limits<double>::infinity();
  std::size_t stale = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const bool warmup = epoch <= hp.warmup_epochs;
    const LossWeights weights = phase_weights(hp, warmup);
    const bool pis_active = weights.intrinsic != 0.0 || weights.extrinsic != 0.0;
    const bool emb_active = weights.pref != 0.0 || (weights.intrinsic != 0.0 && !hp.plain_pis());

    const ExtrinsicTargets ext = compute_extrinsic_targets(state, data, config.threads);
    std::shuffle(order.begin(), order.end(), rng);
    LossTerms sums;

    for (std::size_t start = 0; start < order.size(); start += hp.batch) {
      const std::size_t size = std::min(hp.batch, order.size() - start);
      std::vector<std::vector<ItemIdx>> negatives(size);
      std::vector<TrainingExample> examples(size);
      for (std::size_t b = 0; b < size; ++b) {
        const std::size_t p = order[start + b];
        const auto& pair = pairs[p];
        negatives[b] = sample_negatives(data.user_items(pair.user), data.n_items(), hp.neg_per_pos, rng);
        examples[b] = {pair.user, pair.item, pair.label, ext.labels[p], ext.seq(p), negatives[b]};
      }
      const double scale = 1.0 / static_cast<double>(size);
      const LossWeights batch_weights{weights.intrinsic * scale, weights.extrinsic * scale,
                                      weights.pref * scale};
      const std::size_t n_chunks = (size + kChunk - 1) / kChunk;
      parallel_for(n_chunks, config.threads, [&](std::size_t c) {
        chunk_grads[c].set_zero();
        chunk_terms[c] = {};
        const std::size_t hi = std::min(size, (c + 1) * kChunk);
        for (std::size_t b = c * kChunk; b < hi; ++b) {
          chunk_terms[c] += example_objective(state, hp, data.features(), examples[b],
                                              batch_weights, &chunk_grads[c]);
        }
      });
      grad.set_zero();
      for (std::size_t c = 0; c < n_chunks; ++c) {
        accumulate(grad, chunk_grads[c]);
        sums += chunk_terms[c];
      }
      if (!finite(sums)) {
        throw TrainingDiverged("non-finite loss in epoch " + std::to_string(epoch) +
                               " (l_I=" + std::to_string(sums.intrinsic) +
                               ", l_E=" + std::to_string(sums.extrinsic) +
                               ", l_P=" + std::to_string(sums.pref) + ")");
      }

      auto params = tensors(state);
      const auto grads = tensors(std::as_const(grad));
      auto apply = [&](ParamGroup g) {
        const auto idx = static_cast<std::size_t>(g);
        adam.step(idx, params[idx].values, grads[idx].values);
      };
      if (emb_active) {
        apply(ParamGroup::kUserEmb);
        apply(ParamGroup::kItemEmb);
      }
      if (pis_active) {
        apply(ParamGroup::kLstmInput);
        apply(ParamGroup::kLstmHidden);
        apply(ParamGroup::kLstmBias);
        apply(ParamGroup::kInputProj);
        apply(ParamGroup::kProtoPis);
      }
      if (weights.pref != 0.0) apply(ParamGroup::kProtoPref);
      state.project_embeddings();
      if (!state.all_finite()) {
        throw TrainingDiverged("non-finite parameters after an update in epoch " + std::to_string(epoch));
      }
    }

    EpochLog log;
    log.epoch = epoch;
    log.warmup = warmup;
    log.losses = combine(sums, static_cast<double>(data.n_users()), hp, warmup);
    if (validator) {
      log.valid = validator(state);
      if (log.valid->ndcg10 > best_ndcg) {
        best_ndcg = log.valid->ndcg10;
        result.state = state;
        result.best_epoch = epoch;
        stale = 0;
      } else if (!warmup) {
        ++stale;
      }
    } else {
      result.state = state;
      result.best_epoch = epoch;
    }
    log.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    result.history.push_back(log);
    if (on_epoch) on_epoch(log);
    if (validator && !warmup && config.patience > 0 && stale >= config.patience) break;
  }
  return result;
}

LossBreakdown full_objective(const ModelState& state, const TrainingData& data, std::uint64_t seed) {
  const auto& hp = data.hyper();
  const ExtrinsicTargets ext = compute_extrinsic_targets(state, data);
  Rng rng(seed);
  LossTerms sums;
  const auto pairs = data.pairs();
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& pair = pairs[p];
    const auto negatives = sample_negatives(data.user_items(pair.user), data.n_items(), hp.neg_per_pos, rng);
    const TrainingExample ex{pair.user, pair.item, pair.label, ext.labels[p], ext.seq(p), negatives};
    sums += example_objective(state, hp, data.features(), ex, {}, nullptr);
  }
  return combine(sums, static_cast<double>(data.n_users()), hp, false);
}

GradCheckReport check_model_gradient(const ModelState& state, const TrainingData& data,
                                     std::span<const std::size_t> pair_ids, double eps,
                                     std::size_t coords_per_group, std::uint64_t seed) {
  const auto& hp = data.hyper();
  if (pair_ids.empty()) throw InputError("gradient check needs at least one pair");
  const ExtrinsicTargets ext = compute_extrinsic_targets(state, data);
  Rng rng(seed);
  const auto pairs = data.pairs();
  std::vector<std::vector<ItemIdx>> negatives;
  for (const std::size_t p : pair_ids) {
    if (p >= pairs.size()) throw InputError("gradient check pair index out of range");
    negatives.push_back(sample_negatives(data.user_items(pairs[p].user), data.n_items(), hp.neg_per_pos, rng));
  }
  const LossWeights base = phase_weights(hp, false);
  const double scale = 1.0 / static_cast<double>(pair_ids.size());
  const LossWeights weights{base.intrinsic * scale, base.extrinsic * scale, base.pref * scale};

  ModelState work = state;
  auto example = [&](std::size_t n) {
    const std::size_t p = pair_ids[n];
    return TrainingExample{pairs[p].user, pairs[p].item, pairs[p].label, ext.labels[p], ext.seq(p), negatives[n]};
  };

  ModelState grad = ModelState::zeros(data.n_users(), data.n_items(), hp.k);
  for (std::size_t n = 0; n < pair_ids.size(); ++n) {
    example_objective(work, hp, data.features(), example(n), weights, &grad);
  }

  auto objective = [&]() {
    ObjectiveSample sample;
    std::vector<double> hinge;
    for (std::size_t n = 0; n < pair_ids.size(); ++n) {
      const LossTerms t = example_objective(work, hp, data.features(), example(n), {}, nullptr, &hinge);
      sample.value += weights.intrinsic * t.intrinsic + weights.extrinsic * t.extrinsic + weights.pref * t.pref;
    }
    for (const double h : hinge) sample.branch.push_back(h > 0.0 ? 1 : 0);
    return sample;
  };

  std::vector<GradientProbe> probes;
  auto values = tensors(work);
  const auto analytic = tensors(std::as_const(grad));
  for (std::size_t g = 0; g < values.size(); ++g) {
    probes.push_back({std::string(values[g].name), values[g].values, analytic[g].values});
  }
  Rng coord_rng(derive_seed(seed, 7));
  return gradient_check(probes, objective, eps, coords_per_group, coord_rng);
}

}  // namespace peris
