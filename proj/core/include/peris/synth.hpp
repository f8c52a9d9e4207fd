#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "peris/corpus.hpp"
#include "peris/types.hpp"

namespace peris {

struct SynthSpec {
  std::size_t n_users = 300;
  std::size_t n_items = 600;
  std::size_t n_categories = 12;
  double drifting_fraction = 0.5;
  std::size_t interactions_per_user = 25;
  std::int64_t span_days = 360;
  // Drift times fall uniformly in [drift_min_day, drift_max_day] after the start.
  std::int64_t drift_min_day = 150;
  std::int64_t drift_max_day = 270;
  // Drifting users move from the other categories into the first
  // `emerging_categories` ones; 0 lets them move between any two.
  std::size_t emerging_categories = 0;
  double noise = 0.05;        // chance an event comes from a random category
  double repeat_prob = 0.1;   // chance an event revisits an item already consumed in its category
  std::size_t min_items = 5;  // the corpus filter the output has to pass
  Timestamp start_time = 1577836800;
  std::uint64_t seed = 1;

  void validate() const;
};

void to_json(nlohmann::json& j, const SynthSpec& s);
void from_json(const nlohmann::json& j, SynthSpec& s);

enum class Cohort { kSustained, kDrifting };

struct SynthUser {
  std::string id;
  Cohort cohort = Cohort::kSustained;
  std::size_t initial_category = 0;
  std::size_t final_category = 0;
  std::optional<Timestamp> drift_time;  // drifting users only

  // Category the user draws from at time t.
  std::size_t category_at(Timestamp t) const;
  // Categories the user draws from at some instant of [from, to].
  std::vector<std::size_t> categories_during(Timestamp from, Timestamp to) const;
};

struct GroundTruth {
  std::vector<SynthUser> users;
  std::vector<std::string> item_ids;
  std::vector<std::size_t> item_category;

  const SynthUser& user(const std::string& id) const;
  std::size_t category_of(const std::string& item) const;
};

nlohmann::json to_json(const GroundTruth& truth);
GroundTruth ground_truth_from_json(const nlohmann::json& j);

struct SynthOutput {
  InteractionSet interactions;
  GroundTruth truth;
};

// Sustained users draw from one category over the whole span; drifting users
// switch to another category at their drift time. Each user's consumption
// times are a Poisson process over the span conditioned on its event count.
SynthOutput generate(const SynthSpec& spec);

// Fraction of recent-period (user, item) pairs, i.e. positives of the PIS
// labels at `cutoff`, whose item category the user was drawing from during
// [cutoff, train_end].
double label_alignment(std::span<const Interaction> train, const GroundTruth& truth,
                       Timestamp cutoff, Timestamp train_end);

}  // namespace peris
