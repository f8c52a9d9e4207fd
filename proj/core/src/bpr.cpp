#include "peris/bpr.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>

#include "peris/adam.hpp"

namespace peris {

void BprConfig::validate() const {
  if (k == 0) throw InputError("k must be >= 1");
  if (!(lr > 0.0)) throw InputError("lr must be > 0");
  if (batch == 0) throw InputError("batch must be >= 1");
  if (epochs == 0) throw InputError("epochs must be >= 1");
}

void to_json(nlohmann::json& j, const BprConfig& c) {
  j = {{"k", c.k},           {"lr", c.lr},     {"batch", c.batch},     {"epochs", c.epochs},
       {"seed", c.seed},     {"patience", c.patience}, {"threads", c.threads}};
}

void from_json(const nlohmann::json& j, BprConfig& c) {
  if (!j.is_object()) throw InputError("bpr config must be a JSON object");
  static const std::set<std::string> known{"k", "lr", "batch", "epochs", "seed", "patience", "threads"};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw InputError("unknown bpr config field '" + key + "'");
  }
  const BprConfig d;
  c.k = j.value("k", d.k);
  c.lr = j.value("lr", d.lr);
  c.batch = j.value("batch", d.batch);
  c.epochs = j.value("epochs", d.epochs);
  c.seed = j.value("seed", d.seed);
  c.patience = j.value("patience", d.patience);
  c.threads = j.value("threads", d.threads);
}

BprState BprState::initialize(std::size_t n_users, std::size_t n_items, std::size_t k, Rng& rng) {
  BprState s = zeros(n_users, n_items, k);
  std::normal_distribution<double> dist(0.0, 0.1);
  for (auto& v : tensors(s)[0].values) v = dist(rng);
  for (auto& v : tensors(s)[1].values) v = dist(rng);
  return s;
}

BprState BprState::zeros(std::size_t n_users, std::size_t n_items, std::size_t k) {
  const auto kk = static_cast<Eigen::Index>(k);
  return {Matrix::Zero(static_cast<Eigen::Index>(n_users), kk),
          Matrix::Zero(static_cast<Eigen::Index>(n_items), kk),
          Vector::Zero(static_cast<Eigen::Index>(n_items))};
}

bool BprState::all_finite() const {
  return user_emb.allFinite() && item_emb.allFinite() && item_bias.allFinite();
}

bool operator==(const BprState& a, const BprState& b) {
  return a.user_emb.rows() == b.user_emb.rows() && a.user_emb.cols() == b.user_emb.cols() &&
         a.item_emb.rows() == b.item_emb.rows() && a.item_bias.size() == b.item_bias.size() &&
         a.user_emb == b.user_emb && a.item_emb == b.item_emb && a.item_bias == b.item_bias;
}

namespace {

template <typename View, typename State>
std::vector<View> tensor_list(State& s) {
  auto mat = [](std::string_view name, auto& m) {
    return View{name, {m.data(), static_cast<std::size_t>(m.size())},
                static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())};
  };
  return {mat("user_emb", s.user_emb), mat("item_emb", s.item_emb), mat("item_bias", s.item_bias)};
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

std::vector<TensorView> tensors(BprState& state) { return tensor_list<TensorView>(state); }
std::vector<ConstTensorView> tensors(const BprState& state) {
  return tensor_list<ConstTensorView>(state);
}

double bpr_score(const BprState& state, UserIdx user, ItemIdx item) {
  if (user >= state.n_users() || item >= state.n_items()) throw InputError("unknown user or item index");
  return state.user_emb.row(user).dot(state.item_emb.row(item)) + state.item_bias(item);
}

double bpr_loss(const BprState& state, UserIdx user, ItemIdx pos, ItemIdx neg, double weight,
                BprState* grad) {
  const double x = bpr_score(state, user, pos) - bpr_score(state, user, neg);
  if (grad) {
    const double d = -sigmoid(-x) * weight;  // d softplus(-x) / dx
    grad->user_emb.row(user) += d * (state.item_emb.row(pos) - state.item_emb.row(neg));
    grad->item_emb.row(pos) += d * state.user_emb.row(user);
    grad->item_emb.row(neg) -= d * state.user_emb.row(user);
    grad->item_bias(pos) += d;
    grad->item_bias(neg) -= d;
  }
  return softplus(-x);
}

BprTrainData::BprTrainData(std::span<const IndexedEvent> train, std::size_t n_users,
                           std::size_t n_items)
    : n_items_(n_items), user_items_(n_users) {
  std::vector<std::set<ItemIdx>> items(n_users);
  for (const auto& e : train) {
    if (e.user >= n_users || e.item >= n_items) throw InputError("event index out of range");
    items[e.user].insert(e.item);
  }
  if (train.empty()) throw InputError("no training interactions");
  for (std::size_t u = 0; u < n_users; ++u) {
    user_items_[u].assign(items[u].begin(), items[u].end());
    for (const ItemIdx i : user_items_[u]) pairs_.push_back({static_cast<UserIdx>(u), i, 1});
  }
}

BprResult bpr_train(const BprTrainData& data, const BprConfig& config,
                    const BprValidator& validator, const EpochCallback& on_epoch) {
  config.validate();
  Rng init_rng(derive_seed(config.seed, 1));
  BprState state = BprState::initialize(data.n_users(), data.n_items(), config.k, init_rng);
  Rng rng(derive_seed(config.seed, 2));
  std::vector<std::size_t> sizes;
  for (const auto& t : tensors(state)) sizes.push_back(t.values.size());
  Adam adam(AdamOptions{.lr = config.lr}, sizes);
  BprState grad = BprState::zeros(data.n_users(), data.n_items(), config.k);

  const auto pairs = data.pairs();
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t p = 0; p < order.size(); ++p) order[p] = p;

  BprResult result{state, {}, 0};
  double best = -std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch) {
      const std::size_t size = std::min(config.batch, order.size() - start);
      const double weight = 1.0 / static_cast<double>(size);
      for (auto& t : tensors(grad)) std::fill(t.values.begin(), t.values.end(), 0.0);
      for (std::size_t b = 0; b < size; ++b) {
        const auto& pair = pairs[order[start + b]];
        const ItemIdx neg = sample_negatives(data.user_items(pair.user), data.n_items(), 1, rng)[0];
        total += bpr_loss(state, pair.user, pair.item, neg, weight, &grad);
      }
      if (!std::isfinite(total)) {
        throw TrainingDiverged("non-finite BPR loss in epoch " + std::to_string(epoch));
      }
      auto params = tensors(state);
      const auto grads = tensors(std::as_const(grad));
      for (std::size_t g = 0; g < params.size(); ++g) adam.step(g, params[g].values, grads[g].values);
      if (!state.all_finite()) {
        throw TrainingDiverged("non-finite BPR parameters in epoch " + std::to_string(epoch));
      }
    }
    EpochLog log;
    log.epoch = epoch;
    log.losses.pref = total / static_cast<double>(data.n_users());
    log.losses.final = log.losses.pref;
    if (validator) {
      log.valid = validator(state);
      if (log.valid->ndcg10 > best) {
        best = log.valid->ndcg10;
        result.state = state;
        result.best_epoch = epoch;
        stale = 0;
      } else {
        ++stale;
      }
    } else {
      result.state = state;
      result.best_epoch = epoch;
    }
    log.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    result.history.push_back(log);
    if (on_epoch) on_epoch(log);
    if (validator && config.patience > 0 && stale >= config.patience) break;
  }
  return result;
}

GradCheckReport check_bpr_gradient(const BprState& state, const BprTrainData& data, double eps,
                                   std::size_t coords_per_group, std::uint64_t seed) {
  Rng rng(seed);
  const auto pairs = data.pairs();
  std::vector<ItemIdx> negatives;
  for (const auto& p : pairs) {
    negatives.push_back(sample_negatives(data.user_items(p.user), data.n_items(), 1, rng)[0]);
  }
  const double weight = 1.0 / static_cast<double>(pairs.size());
  BprState work = state;
  BprState grad = BprState::zeros(state.n_users(), state.n_items(), state.dim());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    bpr_loss(work, pairs[p].user, pairs[p].item, negatives[p], weight, &grad);
  }
  auto objective = [&]() {
    ObjectiveSample s;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      s.value += weight * bpr_loss(work, pairs[p].user, pairs[p].item, negatives[p]);
    }
    return s;
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

void BprScorer::score(UserIdx user, std::span<const ItemIdx> items, std::span<double> out) const {
  if (items.size() != out.size()) throw InputError("score output size mismatch");
  for (std::size_t n = 0; n < items.size(); ++n) out[n] = bpr_score(state_, user, items[n]);
}

}  // namespace peris
