#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "peris/binning.hpp"
#include "peris/evaluation.hpp"
#include "peris/lstm.hpp"
#include "peris/model.hpp"
#include "peris/synth.hpp"
#include "peris/training.hpp"

namespace {

using namespace peris;

void BM_LstmForward(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  const auto steps = static_cast<Eigen::Index>(state.range(1));
  Rng rng(1);
  const LstmParams params = LstmParams::random(k, rng);
  const Eigen::MatrixXd inputs = Eigen::MatrixXd::Random(static_cast<Eigen::Index>(k), steps);
  for (auto _ : state) benchmark::DoNotOptimize(lstm_forward(params, inputs));
}
BENCHMARK(BM_LstmForward)->Args({16, 4})->Args({16, 8})->Args({32, 8});

void BM_LstmBackward(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const LstmParams params = LstmParams::random(k, rng);
  const Eigen::MatrixXd inputs = Eigen::MatrixXd::Random(static_cast<Eigen::Index>(k), 8);
  LstmTrace trace;
  lstm_forward(params, inputs, &trace);
  const Vector d = Vector::Ones(static_cast<Eigen::Index>(k));
  LstmParams grad = LstmParams::zeros(k);
  for (auto _ : state) benchmark::DoNotOptimize(lstm_backward(params, trace, d, grad));
}
BENCHMARK(BM_LstmBackward)->Arg(16)->Arg(32);

void BM_BinCounts(benchmark::State& state) {
  Rng rng(2);
  std::uniform_int_distribution<Timestamp> t(0, days(720));
  std::vector<Timestamp> times(static_cast<std::size_t>(state.range(0)));
  for (auto& x : times) x = t(rng);
  const BinGrid grid = build_grid(0, days(720), days(28));
  for (auto _ : state) benchmark::DoNotOptimize(bin_counts(times, grid));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BinCounts)->Arg(16)->Arg(1024);

struct Fixture {
  IndexedSplit split;
  HyperParams hp;
  std::unique_ptr<TrainingData> data;
  ModelState model;

  Fixture() {
    SynthSpec spec;
    const auto out = generate(spec);
    split = IndexedSplit::from(chronological_split(filter_users(out.interactions, 5), days(30), days(30)));
    hp.recent_days = 60;
    data = std::make_unique<TrainingData>(split, hp);
    Rng rng(3);
    model = ModelState::initialize(split.n_users(), split.n_items(), hp.k, rng);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_PerisScore(benchmark::State& state) {
  const auto& f = fixture();
  const PerisScorer scorer(f.model, f.hp, f.data->inference_bins());
  std::vector<ItemIdx> items(kNegativesPerPair + 1);
  for (std::size_t n = 0; n < items.size(); ++n) items[n] = static_cast<ItemIdx>(n % f.split.n_items());
  std::vector<double> out(items.size());
  UserIdx user = 0;
  for (auto _ : state) {
    scorer.score(user, items, out);
    benchmark::DoNotOptimize(out.data());
    user = static_cast<UserIdx>((user + 1) % f.split.n_users());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(items.size()));
}
BENCHMARK(BM_PerisScore);

void BM_ExtrinsicTargets(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(compute_extrinsic_targets(f.model, *f.data));
}
BENCHMARK(BM_ExtrinsicTargets)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
