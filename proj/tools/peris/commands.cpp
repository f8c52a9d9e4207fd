#include "peris/commands.hpp"

#include <fstream>
#include <set>

#include <spdlog/spdlog.h>

#include "peris/checkpoint.hpp"
#include "peris/corpus.hpp"
#include "peris/evaluation.hpp"
#include "peris/manifest.hpp"
#include "peris/render.hpp"
#include "peris/split_io.hpp"

namespace peris::app {

namespace fs = std::filesystem;

namespace {

void check_keys(const nlohmann::json& j, const std::set<std::string>& known, const std::string& what) {
  if (!j.is_object()) throw InputError(what + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw InputError("unknown " + what + " field '" + key + "'");
  }
}

nlohmann::json prepare_to_json(const PrepareConfig& c) {
  return {{"min_items", c.min_items},
          {"test_window_days", c.test_window_days},
          {"valid_window_days", c.valid_window_days}};
}

PrepareConfig prepare_from_json(const nlohmann::json& j) {
  check_keys(j, {"min_items", "test_window_days", "valid_window_days"}, "prepare config");
  const PrepareConfig d;
  return {j.value("min_items", d.min_items), j.value("test_window_days", d.test_window_days),
          j.value("valid_window_days", d.valid_window_days)};
}

nlohmann::json eval_to_json(const EvalConfig& c) {
  return {{"seeds", c.seeds}, {"cutoffs", c.cutoffs}, {"shift", c.shift}, {"shift_offsets", c.shift_offsets}};
}

EvalConfig eval_from_json(const nlohmann::json& j) {
  check_keys(j, {"seeds", "cutoffs", "shift", "shift_offsets"}, "evaluate config");
  const EvalConfig d;
  EvalConfig c{j.value("seeds", d.seeds), j.value("cutoffs", d.cutoffs), j.value("shift", d.shift),
               j.value("shift_offsets", d.shift_offsets)};
  if (c.seeds.empty()) throw InputError("evaluate.seeds must not be empty");
  if (std::find(c.cutoffs.begin(), c.cutoffs.end(), std::size_t{10}) == c.cutoffs.end()) {
    throw InputError("evaluate.cutoffs must include 10");
  }
  return c;
}

fs::path require_out(const GlobalOptions& g) {
  if (g.out.empty()) throw UsageError("--out is required");
  fs::create_directories(g.out);
  return g.out;
}

ExperimentConfig load_config(const GlobalOptions& g) {
  return g.config.empty() ? ExperimentConfig{} : ExperimentConfig::load(g.config);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw InputError("cannot write " + path.string());
}

SplitPart parse_part(const std::string& part) {
  if (part == "test") return SplitPart::kTest;
  if (part == "valid") return SplitPart::kValid;
  throw UsageError("--part must be 'test' or 'valid'");
}

}  // namespace

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("config " + path + " is not valid JSON: " + e.what());
  }
  check_keys(j, {"synth", "prepare", "train", "bpr", "evaluate"}, "config");
  ExperimentConfig c;
  try {
    if (j.contains("synth")) c.synth = j["synth"].get<SynthSpec>();
    if (j.contains("prepare")) c.prepare = prepare_from_json(j["prepare"]);
    if (j.contains("train")) c.train = j["train"].get<TrainConfig>();
    if (j.contains("bpr")) c.bpr = j["bpr"].get<BprConfig>();
    if (j.contains("evaluate")) c.evaluate = eval_from_json(j["evaluate"]);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("config " + path + ": " + e.what());
  }
  return c;
}

nlohmann::json ExperimentConfig::to_json() const {
  return {{"synth", synth}, {"prepare", prepare_to_json(prepare)}, {"train", train}, {"bpr", bpr},
          {"evaluate", eval_to_json(evaluate)}};
}

void apply_ablation(const AblationFlags& flags, HyperParams& hp) {
  if (!flags.baseline.empty() && flags.baseline != "bpr") {
    throw UsageError("unknown baseline '" + flags.baseline + "' (only 'bpr' is available)");
  }
  if (!flags.baseline.empty() && flags.any_ablation()) {
    throw UsageError("--baseline=bpr cannot be combined with PERIS ablation flags");
  }
  if (flags.no_intrinsic) hp.ablation.intrinsic = false;
  if (flags.no_extrinsic) hp.ablation.extrinsic = false;
  if (flags.no_pis || flags.pref_only) hp.ablation.pis = false;
}

std::string ablation_label(const Ablation& a) {
  if (!a.pis) return "pref-only";
  if (a.intrinsic && a.extrinsic) return "PERIS";
  if (!a.intrinsic && !a.extrinsic) return "plain-PIS";
  return a.intrinsic ? "PERIS w/o extrinsic" : "PERIS w/o intrinsic";
}

void cmd_synth(const GlobalOptions& g) {
  const fs::path out = require_out(g);
  ExperimentConfig cfg = load_config(g);
  if (g.seed) cfg.synth.seed = *g.seed;
  RunManifest manifest("synth", g.argv);
  manifest.set_config({{"synth", cfg.synth}});
  manifest.set_seed(cfg.synth.seed);

  const SynthOutput data = generate(cfg.synth);
  write_tsv_file(out / "interactions.tsv", data.interactions);
  write_text(out / "ground_truth.json", peris::to_json(data.truth).dump(2) + "\n");
  manifest.add_output(out / "interactions.tsv");
  manifest.add_output(out / "ground_truth.json");
  manifest.write(out);
  spdlog::info("synth: {} interactions for {} users over {} items", data.interactions.size(),
               cfg.synth.n_users, cfg.synth.n_items);
}

void cmd_prepare(const GlobalOptions& g, const std::string& data) {
  const fs::path out = require_out(g);
  const ExperimentConfig cfg = load_config(g);
  RunManifest manifest("prepare", g.argv);
  manifest.set_config({{"prepare", prepare_to_json(cfg.prepare)}});
  manifest.add_input(data);

  const InteractionSet raw = ingest_file(data);
  const InteractionSet filtered = filter_users(raw, cfg.prepare.min_items);
  const DatasetSplit split = chronological_split(filtered, days(cfg.prepare.test_window_days),
                                                 days(cfg.prepare.valid_window_days));
  write_split(out, split);
  for (const char* f : {kTrainFile, kValidFile, kTestFile, kSplitFile}) manifest.add_output(out / f);
  manifest.write(out);
  spdlog::info("prepare: kept {} of {} interactions; train {}, valid {}, test {}", filtered.size(),
               raw.size(), split.train.size(), split.valid.size(), split.test.size());
}

namespace {

void add_split_inputs(RunManifest& manifest, const fs::path& dir) {
  for (const char* f : {kTrainFile, kValidFile, kTestFile, kSplitFile}) manifest.add_input(dir / f);
}

class JsonlLog {
 public:
  explicit JsonlLog(const fs::path& path) : out_(path, std::ios::trunc) {
    if (!out_) throw InputError("cannot write " + path.string());
  }
  void operator()(const EpochLog& log) {
    out_ << to_json_line(log).dump() << '\n';
    out_.flush();
    if (log.valid) {
      spdlog::info("epoch {}{}: l_F={:.5f} valid HR@10={:.4f} nDCG@10={:.4f} ({:.0f} ms)", log.epoch,
                   log.warmup ? " (warm-up)" : "", log.losses.final, log.valid->hr10, log.valid->ndcg10,
                   log.wall_ms);
    } else {
      spdlog::info("epoch {}{}: l_F={:.5f} ({:.0f} ms)", log.epoch, log.warmup ? " (warm-up)" : "",
                   log.losses.final, log.wall_ms);
    }
  }

 private:
  std::ofstream out_;
};

constexpr std::array<std::size_t, 1> kValidationCutoffs{10};

}  // namespace

void cmd_train(const GlobalOptions& g, const std::string& split_dir, const AblationFlags& flags,
               std::optional<std::size_t> epochs) {
  ExperimentConfig cfg = load_config(g);
  TrainConfig tc = cfg.train;
  apply_ablation(flags, tc.hyper);
  const fs::path out = require_out(g);
  const bool bpr = flags.baseline == "bpr";

  RunManifest manifest("train", g.argv);
  add_split_inputs(manifest, split_dir);
  const DatasetSplit split = read_split(split_dir);
  const IndexedSplit idx = IndexedSplit::from(split);
  const EvalContext valid = EvalContext::build(idx, SplitPart::kValid);
  const bool validate = !valid.pairs().empty();
  if (!validate) spdlog::warn("validation split is empty; keeping the last epoch");

  JsonlLog log(out / "train_log.jsonl");
  Checkpoint ckpt;
  ckpt.users = idx.users.ids();
  ckpt.items = idx.items.ids();

  if (bpr) {
    BprConfig bc = cfg.bpr;
    if (g.seed) bc.seed = *g.seed;
    if (g.threads) bc.threads = *g.threads;
    if (epochs) bc.epochs = *epochs;
    manifest.set_config({{"bpr", bc}});
    manifest.set_seed(bc.seed);
    const BprTrainData data(idx.train, idx.n_users(), idx.n_items());
    BprValidator validator;
    if (validate) {
      validator = [&](const BprState& s) {
        const BprScorer scorer(s);
        const auto r = evaluate(scorer, valid, kValidationCutoffs, bc.seed, bc.threads);
        return ValidationScore{r.hr_at(10), r.ndcg_at(10)};
      };
    }
    spdlog::info("train: BPR on {} users, {} items, {} pairs", data.n_users(), data.n_items(), data.pairs().size());
    BprResult result = bpr_train(data, bc, validator, std::ref(log));
    spdlog::info("train: best epoch {}", result.best_epoch);
    ckpt.hyperparams = {{"bpr", bc}, {"best_epoch", result.best_epoch}};
    ckpt.state = std::move(result.state);
  } else {
    if (g.seed) tc.seed = *g.seed;
    if (g.threads) tc.threads = *g.threads;
    if (epochs) tc.epochs = *epochs;
    manifest.set_config({{"train", tc}});
    manifest.set_seed(tc.seed);
    const TrainingData data(idx, tc.hyper);
    Validator validator;
    if (validate) {
      validator = [&](const ModelState& s) {
        const PerisScorer scorer(s, tc.hyper, data.inference_bins());
        const auto r = evaluate(scorer, valid, kValidationCutoffs, tc.seed, tc.threads);
        return ValidationScore{r.hr_at(10), r.ndcg_at(10)};
      };
    }
    spdlog::info("train: {} on {} users, {} items, {} pairs, {} bins", ablation_label(tc.hyper.ablation),
                 data.n_users(), data.n_items(), data.pairs().size(), data.features().seq_len());
    TrainResult result = train(data, tc, validator, std::ref(log));
    spdlog::info("train: best epoch {}", result.best_epoch);
    ckpt.hyperparams = {{"train", tc}, {"best_epoch", result.best_epoch}};
    ckpt.state = std::move(result.state);
  }
  save_checkpoint_file(out / "checkpoint.bin", ckpt);
  manifest.add_output(out / "checkpoint.bin");
  manifest.add_output(out / "train_log.jsonl");
  manifest.write(out);
}

void cmd_evaluate(const GlobalOptions& g, const std::string& checkpoint, const std::string& split_dir,
                  const std::vector<std::uint64_t>& seeds_arg, const std::string& part_name, bool csv,
                  bool no_shift, const std::string& label_arg) {
  const ExperimentConfig cfg = load_config(g);
  const SplitPart part = parse_part(part_name);
  const fs::path out = require_out(g);
  RunManifest manifest("evaluate", g.argv);
  manifest.add_input(checkpoint);
  add_split_inputs(manifest, split_dir);

  const Checkpoint ckpt = load_checkpoint_file(checkpoint);
  const IndexedSplit idx = IndexedSplit::from(read_split(split_dir));
  if (ckpt.users != idx.users.ids() || ckpt.items != idx.items.ids()) {
    throw InputError("checkpoint vocabularies do not match the split in " + split_dir);
  }
  const EvalContext ctx = EvalContext::build(idx, part);
  if (ctx.pairs().empty()) throw InputError("the " + part_name + " split has no pairs to evaluate");

  std::vector<std::uint64_t> seeds = seeds_arg;
  if (seeds.empty()) seeds = g.seed ? std::vector<std::uint64_t>{*g.seed} : cfg.evaluate.seeds;
  const std::size_t threads = g.threads.value_or(cfg.train.threads);
  manifest.set_config({{"evaluate", eval_to_json(cfg.evaluate)}});
  manifest.set_seed(seeds.front());

  std::unique_ptr<Scorer> scorer;
  ScorerFactory factory;
  std::optional<TrainingData> data;
  nlohmann::json report = {{"model_type", ckpt.model_type()},
                           {"part", part_name},
                           {"checkpoint_sha256", sha256_file(checkpoint)}};
  std::string label;
  if (const auto* bpr = std::get_if<BprState>(&ckpt.state)) {
    scorer = std::make_unique<BprScorer>(*bpr);
    factory = [bpr](Timestamp) { return std::make_unique<BprScorer>(*bpr); };
    label = "BPR";
  } else {
    const auto& state = std::get<ModelState>(ckpt.state);
    const auto tc = ckpt.hyperparams.at("train").get<TrainConfig>();
    data.emplace(idx, tc.hyper);
    scorer = std::make_unique<PerisScorer>(state, tc.hyper, data->inference_bins());
    factory = [&state, &data, hp = tc.hyper](Timestamp shift) {
      return std::make_unique<PerisScorer>(state, hp, data->shifted_inference_bins(shift));
    };
    label = ablation_label(tc.hyper.ablation);
    report["ablation"] = tc.hyper.ablation;
  }
  report["label"] = label_arg.empty() ? label : label_arg;

  std::vector<RankingReport> runs;
  nlohmann::json runs_json = nlohmann::json::array();
  for (const auto seed : seeds) {
    runs.push_back(evaluate(*scorer, ctx, cfg.evaluate.cutoffs, seed, threads));
    runs_json.push_back({{"seed", seed}, {"metrics", to_json(runs.back())}});
    spdlog::info("evaluate: seed {} HR@10={:.4f} nDCG@10={:.4f}", seed, runs.back().hr_at(10),
                 runs.back().ndcg_at(10));
  }
  report["runs"] = runs_json;
  report["aggregate"] = to_json(aggregate(runs));
  report["cohorts"] = to_json(elapsed_cohorts(runs.front(), ctx));
  if (cfg.evaluate.shift && !no_shift) {
    const auto curve = shift_sensitivity(factory, ctx, cfg.evaluate.shift_offsets, threads);
    report["shift"] = to_json(curve);
  }

  write_text(out / "report.json", report.dump(2) + "\n");
  manifest.add_output(out / "report.json");
  if (csv) {
    write_text(out / "records.csv", records_csv(runs.front(), idx));
    manifest.add_output(out / "records.csv");
  }
  manifest.write(out);
}

void cmd_analyze(const GlobalOptions& g, const std::vector<std::string>& report_paths) {
  if (report_paths.empty()) throw UsageError("analyze needs at least one report");
  const fs::path out = require_out(g);
  RunManifest manifest("analyze", g.argv);
  std::vector<nlohmann::json> reports;
  for (const auto& path : report_paths) {
    manifest.add_input(path);
    std::ifstream in(path);
    if (!in) throw InputError("cannot open report " + path);
    try {
      reports.push_back(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw InputError("report " + path + " is not valid JSON: " + e.what());
    }
  }
  const Analysis analysis = analyze_reports(reports);
  write_text(out / "analysis.md", analysis.markdown);
  manifest.add_output(out / "analysis.md");
  write_text(out / "cohorts.svg", analysis.cohort_svg);
  manifest.add_output(out / "cohorts.svg");
  if (analysis.shift_svg) {
    write_text(out / "shift.svg", *analysis.shift_svg);
    manifest.add_output(out / "shift.svg");
  }
  manifest.write(out);
}

}  // namespace peris::app
