#include "peris/model.hpp"

#include <cmath>
#include <set>

namespace peris {

void HyperParams::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw InputError(std::string("invalid hyperparameter: ") + what);
  };
  require(k >= 1, "k >= 1");
  require(lambda >= 0.0 && lambda <= 1.0, "lambda in [0, 1]");
  require(mu >= 0.0 && mu <= 1.0, "mu in [0, 1]");
  require(tau >= 0.0, "tau >= 0");
  require(margin > 0.0, "margin > 0");
  require(gamma > 0.0 && gamma <= 1.0, "gamma in (0, 1]");
  require(bin_width_days > 0, "bin_width_days > 0");
  require(recent_days > 0, "recent_days > 0");
  require(lr > 0.0, "lr > 0");
  require(batch >= 1, "batch >= 1");
  require(neighbor_cap >= 1, "neighbor_cap >= 1");
  require(neg_per_pos >= 1, "neg_per_pos >= 1");
}

double HyperParams::effective_lambda() const { return ablation.pis ? lambda : 0.0; }

double HyperParams::effective_mu() const {
  if (ablation.intrinsic && ablation.extrinsic) return mu;
  return ablation.intrinsic || !ablation.extrinsic ? 1.0 : 0.0;
}

namespace {

void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& known,
                         const char* what) {
  if (!j.is_object()) throw InputError(std::string(what) + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw InputError(std::string("unknown ") + what + " field '" + key + "'");
  }
}

}  // namespace

void to_json(nlohmann::json& j, const Ablation& a) {
  j = {{"intrinsic", a.intrinsic}, {"extrinsic", a.extrinsic}, {"pis", a.pis}};
}

void from_json(const nlohmann::json& j, Ablation& a) {
  reject_unknown_keys(j, {"intrinsic", "extrinsic", "pis"}, "ablation");
  const Ablation d;
  a.intrinsic = j.value("intrinsic", d.intrinsic);
  a.extrinsic = j.value("extrinsic", d.extrinsic);
  a.pis = j.value("pis", d.pis);
}

void to_json(nlohmann::json& j, const HyperParams& hp) {
  j = {{"k", hp.k},
       {"lambda", hp.lambda},
       {"mu", hp.mu},
       {"tau", hp.tau},
       {"margin", hp.margin},
       {"gamma", hp.gamma},
       {"bin_width_days", hp.bin_width_days},
       {"recent_days", hp.recent_days},
       {"warmup_epochs", hp.warmup_epochs},
       {"lr", hp.lr},
       {"batch", hp.batch},
       {"neighbor_cap", hp.neighbor_cap},
       {"neg_per_pos", hp.neg_per_pos},
       {"recent_half", hp.recent_half},
       {"ablation", hp.ablation}};
}

void from_json(const nlohmann::json& j, HyperParams& hp) {
  reject_unknown_keys(j,
                      {"k", "lambda", "mu", "tau", "margin", "gamma", "bin_width_days",
                       "recent_days", "warmup_epochs", "lr", "batch", "neighbor_cap",
                       "neg_per_pos", "recent_half", "ablation"},
                      "hyperparameter");
  const HyperParams d;
  hp.k = j.value("k", d.k);
  hp.lambda = j.value("lambda", d.lambda);
  hp.mu = j.value("mu", d.mu);
  hp.tau = j.value("tau", d.tau);
  hp.margin = j.value("margin", d.margin);
  hp.gamma = j.value("gamma", d.gamma);
  hp.bin_width_days = j.value("bin_width_days", d.bin_width_days);
  hp.recent_days = j.value("recent_days", d.recent_days);
  hp.warmup_epochs = j.value("warmup_epochs", d.warmup_epochs);
  hp.lr = j.value("lr", d.lr);
  hp.batch = j.value("batch", d.batch);
  hp.neighbor_cap = j.value("neighbor_cap", d.neighbor_cap);
  hp.neg_per_pos = j.value("neg_per_pos", d.neg_per_pos);
  hp.recent_half = j.value("recent_half", d.recent_half);
  hp.ablation = j.value("ablation", d.ablation);
}

namespace {

void xavier_uniform(Matrix& m, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
}

Vector xavier_vector(std::size_t k, Rng& rng) {
  Matrix m(1, static_cast<Eigen::Index>(k));
  xavier_uniform(m, rng);
  return m.row(0).transpose();
}

}  // namespace

ModelState ModelState::zeros(std::size_t n_users, std::size_t n_items, std::size_t k) {
  const auto kk = static_cast<Eigen::Index>(k);
  return {Matrix::Zero(static_cast<Eigen::Index>(n_users), kk),
          Matrix::Zero(static_cast<Eigen::Index>(n_items), kk),
          LstmParams::zeros(k),
          Vector::Zero(kk),
          Vector::Zero(kk),
          Vector::Zero(kk)};
}

ModelState ModelState::initialize(std::size_t n_users, std::size_t n_items, std::size_t k,
                                  Rng& rng) {
  ModelState s = zeros(n_users, n_items, k);
  xavier_uniform(s.user_emb, rng);
  xavier_uniform(s.item_emb, rng);
  s.lstm = LstmParams::random(k, rng);
  const double bound = 1.0 / std::sqrt(static_cast<double>(k));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < s.input_proj.size(); ++i) s.input_proj[i] = dist(rng);
  s.proto_pis = xavier_vector(k, rng);
  s.proto_pref = xavier_vector(k, rng);
  s.project_embeddings();
  return s;
}

void ModelState::set_zero() {
  for (auto& t : tensors(*this)) std::fill(t.values.begin(), t.values.end(), 0.0);
}

void ModelState::project_embeddings() {
  auto project = [](Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      const double norm = m.row(r).norm();
      if (norm > 1.0) m.row(r) /= norm;
    }
  };
  project(user_emb);
  project(item_emb);
}

bool ModelState::all_finite() const {
  for (const auto& t : tensors(*this)) {
    for (const double v : t.values) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

bool operator==(const ModelState& a, const ModelState& b) {
  const auto ta = tensors(a);
  const auto tb = tensors(b);
  for (std::size_t g = 0; g < ta.size(); ++g) {
    if (ta[g].rows != tb[g].rows || ta[g].cols != tb[g].cols) return false;
    if (!std::equal(ta[g].values.begin(), ta[g].values.end(), tb[g].values.begin())) return false;
  }
  return true;
}

namespace {

template <typename View, typename State>
std::vector<View> tensor_list(State& s) {
  auto mat = [](std::string_view name, auto& m) {
    return View{name, {m.data(), static_cast<std::size_t>(m.size())},
                static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())};
  };
  return {mat("user_emb", s.user_emb),        mat("item_emb", s.item_emb),
          mat("lstm.w_input", s.lstm.w_input), mat("lstm.w_hidden", s.lstm.w_hidden),
          mat("lstm.bias", s.lstm.bias),       mat("input_proj", s.input_proj),
          mat("proto_pis", s.proto_pis),       mat("proto_pref", s.proto_pref)};
}

}  // namespace

std::vector<TensorView> tensors(ModelState& state) { return tensor_list<TensorView>(state); }

std::vector<ConstTensorView> tensors(const ModelState& state) {
  return tensor_list<ConstTensorView>(state);
}

double similarity(const VecRef& a, const VecRef& b, double tau) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw InputError("cosine similarity of a zero vector");
  return (a.dot(b) / (na * nb) + 1.0) / 2.0 + tau;
}

void similarity_backward(const VecRef& a, const VecRef& b, double upstream, Eigen::Ref<Vector> d_a,
                         Eigen::Ref<Vector> d_b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw InputError("cosine similarity of a zero vector");
  const double cos = a.dot(b) / (na * nb);
  const double scale = 0.5 * upstream;
  d_a += scale * (b / (na * nb) - cos * a / (na * na));
  d_b += scale * (a / (na * nb) - cos * b / (nb * nb));
}

double pis_score(const VecRef& hidden, const VecRef& proto) { return 1.0 - (proto - hidden).norm(); }

namespace {

Eigen::MatrixXd step_inputs(const ModelState& state, std::span<const double> bins,
                            const VecRef& extra) {
  Eigen::MatrixXd inputs(state.input_proj.size(), static_cast<Eigen::Index>(bins.size()));
  for (std::size_t n = 0; n < bins.size(); ++n) {
    inputs.col(static_cast<Eigen::Index>(n)) = bins[n] * state.input_proj + extra;
  }
  return inputs;
}

}  // namespace

Vector encode(const ModelState& state, std::span<const double> bins, const VecRef& extra) {
  if (bins.empty()) throw InputError("cannot encode an empty bin sequence");
  return lstm_forward(state.lstm, step_inputs(state, bins, extra));
}

Vector joint_embedding(const ModelState& state, UserIdx user, ItemIdx item) {
  return state.user_emb.row(user).transpose() + state.item_emb.row(item).transpose();
}

double predict_preference(const ModelState& state, UserIdx user, ItemIdx item) {
  if (user >= state.n_users() || item >= state.n_items()) throw InputError("unknown user or item index");
  return -(state.proto_pref - joint_embedding(state, user, item)).norm();
}

std::vector<double> intrinsic_feature(const ModelState& state, double tau, ItemIdx item,
                                      std::span<const double> own,
                                      std::span<const ItemSequence> user_items) {
  std::size_t length = own.size();
  for (const auto& other : user_items) {
    if (other.item == item) continue;
    if (length == 0) length = other.values.size();
    if (other.values.size() != length) throw InputError("intrinsic feature: bin lengths differ");
  }
  std::vector<double> out(length, 0.0);
  if (!own.empty()) std::copy(own.begin(), own.end(), out.begin());
  const auto v_i = state.item_emb.row(item).transpose();
  for (const auto& other : user_items) {
    if (other.item == item) continue;
    const double alpha = similarity(v_i, state.item_emb.row(other.item).transpose(), tau);
    for (std::size_t n = 0; n < length; ++n) out[n] += alpha * other.values[n];
  }
  return out;
}

std::vector<double> extrinsic_feature(const ModelState& state, double tau, UserIdx user,
                                      std::span<const NeighborBins> neighbors,
                                      std::size_t length) {
  std::vector<double> out(length, 0.0);
  const auto u = state.user_emb.row(user).transpose();
  for (const auto& nb : neighbors) {
    if (nb.bins.size() != length) throw InputError("extrinsic feature: bin lengths differ");
    const double beta = similarity(u, state.user_emb.row(nb.user).transpose(), tau);
    for (std::size_t n = 0; n < length; ++n) out[n] += beta * nb.bins[n];
  }
  return out;
}

double recommendation_score(double intrinsic, double extrinsic, double preference, double lambda,
                            double mu) {
  return lambda * (mu * intrinsic + (1.0 - mu) * extrinsic) + (1.0 - lambda) * preference;
}

double run_head(const ModelState& state, std::span<const double> seq, const VecRef& extra,
                HeadPass* pass) {
  if (seq.empty()) throw InputError("cannot encode an empty bin sequence");
  const auto inputs = step_inputs(state, seq, extra);
  if (!pass) return pis_score(lstm_forward(state.lstm, inputs), state.proto_pis);
  pass->seq.assign(seq.begin(), seq.end());
  pass->hidden = lstm_forward(state.lstm, inputs, &pass->trace);
  pass->score = pis_score(pass->hidden, state.proto_pis);
  return pass->score;
}

void backprop_head(const ModelState& state, const HeadPass& pass, double d_score,
                   ModelState& grad, std::vector<double>& d_seq, Vector& d_extra) {
  const Vector diff = state.proto_pis - pass.hidden;
  const double dist = diff.norm();
  const Eigen::Index k = state.input_proj.size();
  d_seq.assign(pass.seq.size(), 0.0);
  d_extra = Vector::Zero(k);
  if (dist == 0.0 || d_score == 0.0) return;
  // score = 1 - ||C - h||
  const Vector d_hidden = (d_score / dist) * diff;
  grad.proto_pis -= d_hidden;
  const Eigen::MatrixXd d_inputs = lstm_backward(state.lstm, pass.trace, d_hidden, grad.lstm);
  for (std::size_t n = 0; n < pass.seq.size(); ++n) {
    const auto col = d_inputs.col(static_cast<Eigen::Index>(n));
    grad.input_proj += pass.seq[n] * col;
    d_extra += col;
    d_seq[n] = state.input_proj.dot(col);
  }
}

PerisScorer::PerisScorer(ModelState state, HyperParams hp,
                         std::shared_ptr<const BinnedHistories> bins)
    : state_(std::move(state)), hp_(hp), bins_(std::move(bins)) {
  if (!bins_) throw InputError("PerisScorer needs bin features");
  if (bins_->n_users() != state_.n_users() || bins_->n_items() != state_.n_items()) {
    throw InputError("bin features and model disagree on vocabulary size");
  }
}

void PerisScorer::check_ids(UserIdx user, ItemIdx item) const {
  if (user >= state_.n_users() || item >= state_.n_items()) {
    throw InputError("unknown user or item index");
  }
}

double PerisScorer::predict_intrinsic(UserIdx user, ItemIdx item) const {
  check_ids(user, item);
  const ItemSequence* own = bins_->find(user, item);
  std::span<const double> own_values;
  if (own) own_values = own->values;
  if (hp_.plain_pis()) {
    std::vector<double> seq(bins_->seq_len(), 0.0);
    if (own) seq = own->values;
    return run_head(state_, seq, Vector::Zero(state_.input_proj.size()));
  }
  auto seq = intrinsic_feature(state_, hp_.tau, item, own_values, bins_->items_of(user));
  if (seq.empty()) seq.assign(bins_->seq_len(), 0.0);
  return run_head(state_, seq, joint_embedding(state_, user, item));
}

double PerisScorer::predict_extrinsic(UserIdx user, ItemIdx item) const {
  check_ids(user, item);
  std::vector<NeighborBins> neighbors;
  for (const auto& ref : bins_->neighbors(user, item, hp_.neighbor_cap)) {
    neighbors.push_back({ref.user, ref.sequence->values});
  }
  const auto seq = extrinsic_feature(state_, hp_.tau, user, neighbors, bins_->seq_len());
  return run_head(state_, seq, Vector::Zero(state_.input_proj.size()));
}

double PerisScorer::predict_preference(UserIdx user, ItemIdx item) const {
  return peris::predict_preference(state_, user, item);
}

double PerisScorer::pis_component(UserIdx user, ItemIdx item) const {
  const double mu = hp_.effective_mu();
  const double in = mu != 0.0 ? predict_intrinsic(user, item) : 0.0;
  const double ex = mu != 1.0 ? predict_extrinsic(user, item) : 0.0;
  return mu * in + (1.0 - mu) * ex;
}

void PerisScorer::score(UserIdx user, std::span<const ItemIdx> items, std::span<double> out) const {
  if (items.size() != out.size()) throw InputError("score: output size mismatch");
  const double lambda = hp_.effective_lambda();
  const double mu = hp_.effective_mu();
  for (std::size_t n = 0; n < items.size(); ++n) {
    const ItemIdx item = items[n];
    check_ids(user, item);
    const double in = (lambda != 0.0 && mu != 0.0) ? predict_intrinsic(user, item) : 0.0;
    const double ex = (lambda != 0.0 && mu != 1.0) ? predict_extrinsic(user, item) : 0.0;
    const double pref = lambda != 1.0 ? predict_preference(user, item) : 0.0;
    out[n] = recommendation_score(in, ex, pref, lambda, mu);
  }
}

}  // namespace peris
