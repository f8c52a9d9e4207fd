#include "peris/app.hpp"

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "peris/bpr.hpp"
#include "peris/commands.hpp"

namespace peris::app {

namespace {

void setup_logging() {
  auto logger = spdlog::get("peris");
  if (!logger) logger = spdlog::stderr_color_mt("peris");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
  const char* level = std::getenv("PERIS_LOG");
  spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::info);
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::size_t pos = 0;
  while (pos <= text.size() && !text.empty()) {
    const std::size_t comma = text.find(',', pos);
    const std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    std::size_t used = 0;
    std::uint64_t v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (item.empty() || used != item.size()) throw UsageError("--seeds expects comma-separated integers");
    out.push_back(v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

int run(int argc, const char* const* argv) {
  setup_logging();
  CLI::App cli{"peris: train, evaluate and analyze PERIS recommenders", "peris"};
  cli.require_subcommand(1);
  cli.set_version_flag("--version", std::string(PERIS_VERSION));

  GlobalOptions g;
  for (int n = 0; n < argc; ++n) g.argv.emplace_back(argv[n]);
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  cli.add_option("--config", g.config, "JSON config file")->check(CLI::ExistingFile);
  auto* seed_opt = cli.add_option("--seed", seed, "random seed");
  cli.add_option("--out", g.out, "output directory");
  auto* threads_opt = cli.add_option("--threads", threads, "worker threads (0 = all cores)");

  auto* synth = cli.add_subcommand("synth", "generate a synthetic corpus with planted drift");
  synth->fallthrough();

  std::string data;
  auto* prepare = cli.add_subcommand("prepare", "filter and split an interaction TSV");
  prepare->fallthrough();
  prepare->add_option("data", data, "user<TAB>item<TAB>timestamp file")->required()->check(CLI::ExistingFile);

  std::string split_dir;
  AblationFlags flags;
  std::size_t epochs = 0;
  auto* train = cli.add_subcommand("train", "train PERIS or the BPR baseline");
  train->fallthrough();
  train->add_option("--split", split_dir, "directory written by prepare")->required()->check(CLI::ExistingDirectory);
  train->add_flag("--no-intrinsic", flags.no_intrinsic, "drop the intrinsic scheme (mu = 0)");
  train->add_flag("--no-extrinsic", flags.no_extrinsic, "drop the extrinsic scheme (mu = 1)");
  train->add_flag("--no-pis", flags.no_pis, "drop the PIS task (lambda = 0)");
  train->add_flag("--pref-only", flags.pref_only, "preference learning only (lambda = 0)");
  train->add_option("--baseline", flags.baseline, "train a baseline instead of PERIS (bpr)");
  auto* epochs_opt = train->add_option("--epochs", epochs, "override the epoch count");

  std::string checkpoint, part = "test", seeds_text, label;
  bool csv = false, no_shift = false;
  auto* eval = cli.add_subcommand("evaluate", "rank held-out items and run the behavioral analyses");
  eval->fallthrough();
  eval->add_option("--checkpoint", checkpoint, "checkpoint written by train")->required()->check(CLI::ExistingFile);
  eval->add_option("--split", split_dir, "directory written by prepare")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--part", part, "test or valid");
  eval->add_option("--seeds", seeds_text, "comma-separated negative-sampling seeds");
  eval->add_option("--label", label, "model name used in reports");
  eval->add_flag("--csv", csv, "also write per-pair ranks to records.csv");
  eval->add_flag("--no-shift", no_shift, "skip the shift-sensitivity analysis");

  std::vector<std::string> reports;
  auto* analyze = cli.add_subcommand("analyze", "render reports as Markdown tables and SVG charts");
  analyze->fallthrough();
  analyze->add_option("reports", reports, "report.json files")->required()->check(CLI::ExistingFile);

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e, std::cout, std::cerr);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (*seed_opt) g.seed = seed;
  if (*threads_opt) g.threads = threads;

  try {
    if (*synth) {
      cmd_synth(g);
    } else if (*prepare) {
      cmd_prepare(g, data);
    } else if (*train) {
      cmd_train(g, split_dir, flags, *epochs_opt ? std::optional<std::size_t>(epochs) : std::nullopt);
    } else if (*eval) {
      cmd_evaluate(g, checkpoint, split_dir, parse_seed_list(seeds_text), part, csv, no_shift, label);
    } else if (*analyze) {
      cmd_analyze(g, reports);
    }
  } catch (const InputError& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace peris::app
