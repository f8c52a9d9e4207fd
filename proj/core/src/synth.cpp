#include "peris/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>

#include "peris/random.hpp"

namespace peris {

void SynthSpec::validate() const {
  if (n_users == 0) throw InputError("n_users must be >= 1");
  if (n_categories < 2) throw InputError("n_categories must be >= 2");
  if (n_items < n_categories) throw InputError("n_items must be >= n_categories");
  if (drifting_fraction < 0.0 || drifting_fraction > 1.0) throw InputError("drifting_fraction must be in [0, 1]");
  if (span_days < 1) throw InputError("span_days must be >= 1");
  if (drift_min_day < 0 || drift_min_day > drift_max_day || drift_max_day > span_days) {
    throw InputError("drift window must satisfy 0 <= drift_min_day <= drift_max_day <= span_days");
  }
  if (noise < 0.0 || noise > 1.0) throw InputError("noise must be in [0, 1]");
  if (repeat_prob < 0.0 || repeat_prob >= 1.0) throw InputError("repeat_prob must be in [0, 1)");
  if (emerging_categories >= n_categories) throw InputError("emerging_categories must be below n_categories");
  if (min_items == 0) throw InputError("min_items must be >= 1");
  if (interactions_per_user < min_items) {
    throw InputError("infeasible spec: interactions_per_user (" + std::to_string(interactions_per_user) +
                     ") is below min_items (" + std::to_string(min_items) + ")");
  }
  if (n_items / n_categories < min_items) {
    throw InputError("infeasible spec: categories hold fewer items than min_items");
  }
}

void to_json(nlohmann::json& j, const SynthSpec& s) {
  j = {{"n_users", s.n_users},
       {"n_items", s.n_items},
       {"n_categories", s.n_categories},
       {"drifting_fraction", s.drifting_fraction},
       {"interactions_per_user", s.interactions_per_user},
       {"span_days", s.span_days},
       {"drift_min_day", s.drift_min_day},
       {"drift_max_day", s.drift_max_day},
       {"emerging_categories", s.emerging_categories},
       {"noise", s.noise},
       {"repeat_prob", s.repeat_prob},
       {"min_items", s.min_items},
       {"start_time", s.start_time},
       {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, SynthSpec& s) {
  if (!j.is_object()) throw InputError("synth spec must be a JSON object");
  const nlohmann::json defaults = SynthSpec{};
  for (const auto& [key, _] : j.items()) {
    if (!defaults.contains(key)) throw InputError("unknown synth spec field '" + key + "'");
  }
  const SynthSpec d;
  s.n_users = j.value("n_users", d.n_users);
  s.n_items = j.value("n_items", d.n_items);
  s.n_categories = j.value("n_categories", d.n_categories);
  s.drifting_fraction = j.value("drifting_fraction", d.drifting_fraction);
  s.interactions_per_user = j.value("interactions_per_user", d.interactions_per_user);
  s.span_days = j.value("span_days", d.span_days);
  s.drift_min_day = j.value("drift_min_day", d.drift_min_day);
  s.drift_max_day = j.value("drift_max_day", d.drift_max_day);
  s.emerging_categories = j.value("emerging_categories", d.emerging_categories);
  s.noise = j.value("noise", d.noise);
  s.repeat_prob = j.value("repeat_prob", d.repeat_prob);
  s.min_items = j.value("min_items", d.min_items);
  s.start_time = j.value("start_time", d.start_time);
  s.seed = j.value("seed", d.seed);
}

std::size_t SynthUser::category_at(Timestamp t) const {
  if (drift_time && t >= *drift_time) return final_category;
  return initial_category;
}

std::vector<std::size_t> SynthUser::categories_during(Timestamp from, Timestamp to) const {
  std::set<std::size_t> out{category_at(from), category_at(to)};
  return {out.begin(), out.end()};
}

const SynthUser& GroundTruth::user(const std::string& id) const {
  const auto it = std::lower_bound(users.begin(), users.end(), id,
                                   [](const SynthUser& u, const std::string& x) { return u.id < x; });
  if (it == users.end() || it->id != id) throw InputError("unknown synthetic user '" + id + "'");
  return *it;
}

std::size_t GroundTruth::category_of(const std::string& item) const {
  const auto it = std::lower_bound(item_ids.begin(), item_ids.end(), item);
  if (it == item_ids.end() || *it != item) throw InputError("unknown synthetic item '" + item + "'");
  return item_category[static_cast<std::size_t>(it - item_ids.begin())];
}

nlohmann::json to_json(const GroundTruth& truth) {
  nlohmann::json users = nlohmann::json::array();
  for (const auto& u : truth.users) {
    users.push_back({{"id", u.id},
                     {"cohort", u.cohort == Cohort::kDrifting ? "drifting" : "sustained"},
                     {"initial_category", u.initial_category},
                     {"final_category", u.final_category},
                     {"drift_time", u.drift_time ? nlohmann::json(*u.drift_time) : nlohmann::json(nullptr)}});
  }
  nlohmann::json items = nlohmann::json::array();
  for (std::size_t i = 0; i < truth.item_ids.size(); ++i) {
    items.push_back({{"id", truth.item_ids[i]}, {"category", truth.item_category[i]}});
  }
  return {{"users", users}, {"items", items}};
}

GroundTruth ground_truth_from_json(const nlohmann::json& j) {
  GroundTruth truth;
  try {
    for (const auto& u : j.at("users")) {
      SynthUser user;
      user.id = u.at("id").get<std::string>();
      user.cohort = u.at("cohort").get<std::string>() == "drifting" ? Cohort::kDrifting : Cohort::kSustained;
      user.initial_category = u.at("initial_category").get<std::size_t>();
      user.final_category = u.at("final_category").get<std::size_t>();
      if (!u.at("drift_time").is_null()) user.drift_time = u.at("drift_time").get<Timestamp>();
      truth.users.push_back(user);
    }
    for (const auto& i : j.at("items")) {
      truth.item_ids.push_back(i.at("id").get<std::string>());
      truth.item_category.push_back(i.at("category").get<std::size_t>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed ground truth: ") + e.what());
  }
  return truth;
}

namespace {

std::string padded_id(char prefix, std::size_t n, std::size_t total) {
  const int width = static_cast<int>(std::to_string(total).size());
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%c%0*zu", prefix, width, n);
  return buf;
}

}  // namespace

SynthOutput generate(const SynthSpec& spec) {
  spec.validate();
  SynthOutput out;
  auto& truth = out.truth;
  std::vector<std::vector<std::size_t>> by_category(spec.n_categories);
  for (std::size_t i = 0; i < spec.n_items; ++i) {
    truth.item_ids.push_back(padded_id('i', i, spec.n_items));
    truth.item_category.push_back(i % spec.n_categories);
    by_category[i % spec.n_categories].push_back(i);
  }

  const auto n_drifting = static_cast<std::size_t>(spec.drifting_fraction * static_cast<double>(spec.n_users) + 0.5);
  const Timestamp span = days(spec.span_days);
  for (std::size_t u = 0; u < spec.n_users; ++u) {
    Rng rng(derive_seed(spec.seed, u));
    SynthUser user;
    user.id = padded_id('u', u, spec.n_users);
    // Spread the drifting cohort evenly across the user index range.
    const bool drifting = (u + 1) * n_drifting / spec.n_users > u * n_drifting / spec.n_users;
    std::uniform_int_distribution<std::size_t> pick_cat(0, spec.n_categories - 1);
    const std::size_t emerging = spec.emerging_categories;
    if (drifting) {
      user.cohort = Cohort::kDrifting;
      if (emerging > 0) {
        std::uniform_int_distribution<std::size_t> from(emerging, spec.n_categories - 1);
        std::uniform_int_distribution<std::size_t> to(0, emerging - 1);
        user.initial_category = from(rng);
        user.final_category = to(rng);
      } else {
        std::uniform_int_distribution<std::size_t> other(1, spec.n_categories - 1);
        user.initial_category = pick_cat(rng);
        user.final_category = (user.initial_category + other(rng)) % spec.n_categories;
      }
      std::uniform_int_distribution<Timestamp> when(days(spec.drift_min_day), days(spec.drift_max_day));
      user.drift_time = spec.start_time + when(rng);
    } else {
      user.initial_category = pick_cat(rng);
      user.final_category = user.initial_category;
    }

    std::uniform_int_distribution<Timestamp> at(0, span - 1);
    std::vector<Timestamp> times(spec.interactions_per_user);
    for (auto& t : times) t = spec.start_time + at(rng);
    std::sort(times.begin(), times.end());

    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::vector<std::vector<std::size_t>> consumed(spec.n_categories);
    for (const Timestamp t : times) {
      std::size_t cat = user.category_at(t);
      const bool noisy = coin(rng) < spec.noise;
      if (noisy) cat = pick_cat(rng);
      auto& seen = consumed[cat];
      std::size_t item;
      if (!noisy && !seen.empty() && coin(rng) < spec.repeat_prob) {
        std::uniform_int_distribution<std::size_t> pick(0, seen.size() - 1);
        item = seen[pick(rng)];
      } else {
        const auto& pool = by_category[cat];
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        item = pool[pick(rng)];
        seen.push_back(item);
      }
      out.interactions.push_back({user.id, truth.item_ids[item], t});
    }
    truth.users.push_back(std::move(user));
  }
  return out;
}

double label_alignment(std::span<const Interaction> train, const GroundTruth& truth,
                       Timestamp cutoff, Timestamp train_end) {
  std::set<std::pair<std::string, std::string>> positives;
  for (const auto& e : train) {
    if (e.time >= cutoff && e.time <= train_end) positives.insert({e.user, e.item});
  }
  if (positives.empty()) throw InputError("no recent-period consumptions to align");
  std::size_t aligned = 0;
  for (const auto& [user, item] : positives) {
    const auto active = truth.user(user).categories_during(cutoff, train_end);
    if (std::find(active.begin(), active.end(), truth.category_of(item)) != active.end()) ++aligned;
  }
  return static_cast<double>(aligned) / static_cast<double>(positives.size());
}

}  // namespace peris
