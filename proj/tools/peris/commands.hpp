#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "peris/bpr.hpp"
#include "peris/synth.hpp"
#include "peris/training.hpp"

namespace peris::app {

struct PrepareConfig {
  std::size_t min_items = 5;
  std::int64_t test_window_days = 30;
  std::int64_t valid_window_days = 30;
};

struct EvalConfig {
  std::vector<std::uint64_t> seeds{1};
  std::vector<std::size_t> cutoffs{5, 10, 20};
  bool shift = true;
  std::vector<int> shift_offsets{-6, -5, -4, -3, -2, -1, 0, 1, 2, 3, 4, 5, 6};
};

// Contents of a --config file. Every section is optional and falls back to
// its defaults.
struct ExperimentConfig {
  SynthSpec synth;
  PrepareConfig prepare;
  TrainConfig train;
  BprConfig bpr;
  EvalConfig evaluate;

  static ExperimentConfig load(const std::string& path);
  nlohmann::json to_json() const;
};

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> threads;
  std::vector<std::string> argv;
};

struct AblationFlags {
  bool no_intrinsic = false;
  bool no_extrinsic = false;
  bool no_pis = false;
  bool pref_only = false;
  std::string baseline;  // empty or "bpr"

  bool any_ablation() const { return no_intrinsic || no_extrinsic || no_pis || pref_only; }
};

class UsageError : public InputError {
 public:
  using InputError::InputError;
};

// Applies the flags to `hp`; throws UsageError on contradictory flags.
void apply_ablation(const AblationFlags& flags, HyperParams& hp);

// Short human label for an ablation setting.
std::string ablation_label(const Ablation& a);

void cmd_synth(const GlobalOptions& g);
void cmd_prepare(const GlobalOptions& g, const std::string& data);
void cmd_train(const GlobalOptions& g, const std::string& split_dir, const AblationFlags& flags,
               std::optional<std::size_t> epochs);
void cmd_evaluate(const GlobalOptions& g, const std::string& checkpoint, const std::string& split_dir,
                  const std::vector<std::uint64_t>& seeds, const std::string& part, bool csv,
                  bool no_shift, const std::string& label);
void cmd_analyze(const GlobalOptions& g, const std::vector<std::string>& reports);

}  // namespace peris::app
