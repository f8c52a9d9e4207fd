#include "peris/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "peris/parallel.hpp"
#include "peris/random.hpp"
#include "peris/training.hpp"

namespace peris {

std::size_t rank_of(double test_score, std::span<const double> negative_scores) {
  std::size_t above = 0;
  for (const double s : negative_scores) {
    if (!(s < test_score)) ++above;  // ties and NaNs count against the test item
  }
  return above + 1;
}

std::size_t rank_one(const Scorer& scorer, UserIdx user, ItemIdx test_item,
                     std::span<const ItemIdx> negatives) {
  std::vector<ItemIdx> items;
  items.reserve(negatives.size() + 1);
  items.push_back(test_item);
  items.insert(items.end(), negatives.begin(), negatives.end());
  std::vector<double> scores(items.size());
  scorer.score(user, items, scores);
  return rank_of(scores[0], std::span(scores).subspan(1));
}

double hr_at_k(std::size_t rank, std::size_t k) {
  if (rank == 0) throw InputError("rank must be >= 1");
  return rank <= k ? 1.0 : 0.0;
}

double ndcg_at_k(std::size_t rank, std::size_t k) {
  if (rank == 0) throw InputError("rank must be >= 1");
  return rank <= k ? 1.0 / std::log2(static_cast<double>(rank) + 1.0) : 0.0;
}

EvalContext EvalContext::build(const IndexedSplit& split, SplitPart part) {
  EvalContext ctx;
  ctx.n_items_ = split.n_items();
  const std::size_t n_users = split.n_users();
  std::vector<std::set<ItemIdx>> excluded(n_users), train(n_users);
  ctx.last_train_.assign(n_users, std::nullopt);
  for (const auto& e : split.train) {
    train[e.user].insert(e.item);
    excluded[e.user].insert(e.item);
    auto& last = ctx.last_train_[e.user];
    if (!last || *last < e.time) last = e.time;
  }
  for (const auto* events : {&split.valid, &split.test}) {
    for (const auto& e : *events) excluded[e.user].insert(e.item);
  }
  const auto& evaluated = part == SplitPart::kValid ? split.valid : split.test;
  std::map<std::pair<UserIdx, ItemIdx>, Timestamp> first_seen;
  for (const auto& e : evaluated) {
    auto [it, inserted] = first_seen.try_emplace({e.user, e.item}, e.time);
    if (!inserted) it->second = std::min(it->second, e.time);
  }
  for (const auto& [key, time] : first_seen) {
    ctx.pairs_.push_back({key.first, key.second, time});
    if (ctx.users_.empty() || ctx.users_.back() != key.first) ctx.users_.push_back(key.first);
  }
  ctx.excluded_.resize(n_users);
  ctx.train_items_.resize(n_users);
  for (std::size_t u = 0; u < n_users; ++u) {
    ctx.excluded_[u].assign(excluded[u].begin(), excluded[u].end());
    ctx.train_items_[u].assign(train[u].begin(), train[u].end());
  }
  return ctx;
}

std::optional<Timestamp> EvalContext::last_train_time(UserIdx user) const {
  return last_train_.at(user);
}

std::vector<ItemIdx> eval_negatives(std::span<const ItemIdx> excluded, std::size_t n_items,
                                    std::uint64_t seed, std::size_t pair_index) {
  if (n_items < excluded.size() + kNegativesPerPair) {
    throw InputError("fewer than 100 eligible negative items for a user");
  }
  Rng rng(derive_seed(seed, pair_index));
  return sample_negatives(excluded, n_items, kNegativesPerPair, rng);
}

namespace {

std::size_t cutoff_index(const std::vector<std::size_t>& cutoffs, std::size_t k) {
  const auto it = std::find(cutoffs.begin(), cutoffs.end(), k);
  if (it == cutoffs.end()) throw InputError("report has no cutoff " + std::to_string(k));
  return static_cast<std::size_t>(it - cutoffs.begin());
}

}  // namespace

double RankingReport::hr_at(std::size_t k) const { return hr.at(cutoff_index(cutoffs, k)); }
double RankingReport::ndcg_at(std::size_t k) const { return ndcg.at(cutoff_index(cutoffs, k)); }

RankingReport evaluate(const Scorer& scorer, const EvalContext& ctx,
                       std::span<const std::size_t> cutoffs, std::uint64_t seed,
                       std::size_t threads) {
  if (ctx.pairs().empty()) throw InputError("no pairs to evaluate");
  if (cutoffs.empty()) throw InputError("at least one cutoff is required");
  RankingReport report;
  report.cutoffs.assign(cutoffs.begin(), cutoffs.end());
  const auto pairs = ctx.pairs();
  report.records.resize(pairs.size());
  parallel_for(pairs.size(), threads, [&](std::size_t p) {
    const auto& pair = pairs[p];
    const auto negatives = eval_negatives(ctx.excluded(pair.user), ctx.n_items(), seed, p);
    report.records[p] = {pair.user, pair.item, pair.time, rank_one(scorer, pair.user, pair.item, negatives)};
  });
  for (const std::size_t k : report.cutoffs) {
    double hr = 0.0, ndcg = 0.0;
    for (const auto& r : report.records) {
      hr += hr_at_k(r.rank, k);
      ndcg += ndcg_at_k(r.rank, k);
    }
    report.hr.push_back(hr / static_cast<double>(pairs.size()));
    report.ndcg.push_back(ndcg / static_cast<double>(pairs.size()));
  }
  return report;
}

RankingReport evaluate(const Scorer& scorer, const EvalContext& ctx, std::uint64_t seed,
                       std::size_t threads) {
  static constexpr std::array<std::size_t, 3> kDefault{5, 10, 20};
  return evaluate(scorer, ctx, kDefault, seed, threads);
}

namespace {

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd out;
  for (const double x : xs) out.mean += x;
  out.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (const double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return out;
}

}  // namespace

AggregateReport aggregate(std::span<const RankingReport> reports) {
  if (reports.empty()) throw InputError("no reports to aggregate");
  AggregateReport out;
  out.cutoffs = reports.front().cutoffs;
  out.runs = reports.size();
  for (const auto& r : reports) {
    if (r.cutoffs != out.cutoffs) throw InputError("reports use different cutoffs");
  }
  for (std::size_t c = 0; c < out.cutoffs.size(); ++c) {
    std::vector<double> hr, ndcg;
    for (const auto& r : reports) {
      hr.push_back(r.hr[c]);
      ndcg.push_back(r.ndcg[c]);
    }
    out.hr.push_back(mean_std(hr));
    out.ndcg.push_back(mean_std(ndcg));
  }
  std::vector<double> combined;
  for (const auto& r : reports) combined.push_back(r.combined());
  out.combined = mean_std(combined);
  return out;
}

std::int64_t nearest_rank_percentile(std::span<const std::int64_t> sorted, double p) {
  if (sorted.empty()) throw InputError("percentile of an empty sample");
  if (p <= 0.0 || p > 100.0) throw InputError("percentile must be in (0, 100]");
  const auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

std::size_t cohort_of(std::int64_t value, const std::array<std::int64_t, 3>& thresholds) {
  for (std::size_t b = 0; b < thresholds.size(); ++b) {
    if (value <= thresholds[b]) return b;
  }
  return thresholds.size();
}

CohortAssignment assign_cohorts(std::span<const std::int64_t> values) {
  std::vector<std::int64_t> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  CohortAssignment out;
  for (std::size_t q = 0; q < kCohortPercentiles.size(); ++q) {
    out.thresholds[q] = nearest_rank_percentile(sorted, kCohortPercentiles[q]);
  }
  out.bucket.reserve(values.size());
  for (const auto v : values) out.bucket.push_back(cohort_of(v, out.thresholds));
  return out;
}

CohortTable elapsed_cohorts(const RankingReport& report, const EvalContext& ctx) {
  std::map<UserIdx, Timestamp> first_eval;
  for (const auto& r : report.records) {
    auto [it, inserted] = first_eval.try_emplace(r.user, r.time);
    if (!inserted) it->second = std::min(it->second, r.time);
  }
  if (first_eval.empty()) throw InputError("report has no records");
  std::vector<UserIdx> users;
  std::vector<std::int64_t> elapsed;
  for (const auto& [user, time] : first_eval) {
    const auto last = ctx.last_train_time(user);
    if (!last) throw InputError("evaluated user has no training consumption");
    const Timestamp gap = time - *last;
    users.push_back(user);
    elapsed.push_back(gap >= 0 ? gap / kSecondsPerDay : -((-gap + kSecondsPerDay - 1) / kSecondsPerDay));
  }
  const CohortAssignment assignment = assign_cohorts(elapsed);
  std::map<UserIdx, std::size_t> bucket_of;
  CohortTable table;
  table.thresholds = assignment.thresholds;
  for (std::size_t n = 0; n < users.size(); ++n) {
    bucket_of[users[n]] = assignment.bucket[n];
    ++table.buckets[assignment.bucket[n]].users;
  }
  for (const auto& r : report.records) {
    auto& b = table.buckets[bucket_of.at(r.user)];
    ++b.pairs;
    b.score += (hr_at_k(r.rank, 10) + ndcg_at_k(r.rank, 10)) / 2.0;
  }
  for (auto& b : table.buckets) {
    if (b.pairs > 0) b.score /= static_cast<double>(b.pairs);
  }
  return table;
}

TopLists top_k_lists(const Scorer& scorer, const EvalContext& ctx, std::size_t k,
                     std::size_t threads) {
  const auto users = ctx.users();
  TopLists lists(users.size());
  parallel_for(users.size(), threads, [&](std::size_t n_user) {
    const UserIdx u = users[n_user];
    const auto seen = ctx.train_items(u);
    std::vector<ItemIdx> items;
    for (std::size_t i = 0; i < ctx.n_items(); ++i) {
      if (!std::binary_search(seen.begin(), seen.end(), static_cast<ItemIdx>(i))) {
        items.push_back(static_cast<ItemIdx>(i));
      }
    }
    std::vector<double> scores(items.size());
    scorer.score(u, items, scores);
    std::vector<std::size_t> order(items.size());
    for (std::size_t n = 0; n < order.size(); ++n) order[n] = n;
    const std::size_t take = std::min(k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        if (scores[a] != scores[b]) return scores[a] > scores[b];
                        return items[a] < items[b];
                      });
    for (std::size_t n = 0; n < take; ++n) lists[n_user].push_back(items[order[n]]);
  });
  return lists;
}

double overlap_ratio(const TopLists& a, const TopLists& b) {
  if (a.size() != b.size()) throw InputError("overlap needs lists for the same users");
  if (a.empty()) throw InputError("overlap of empty list sets");
  double total = 0.0;
  for (std::size_t u = 0; u < a.size(); ++u) {
    if (a[u].size() != kTopK || b[u].size() != kTopK) {
      throw InputError("every recommendation list must hold exactly 10 items");
    }
    std::vector<ItemIdx> x = a[u], y = b[u];
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    std::vector<ItemIdx> common;
    std::set_intersection(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(common));
    total += static_cast<double>(common.size()) / static_cast<double>(kTopK);
  }
  return total / static_cast<double>(a.size());
}

std::vector<int> default_shift_offsets() {
  std::vector<int> out;
  for (int m = -6; m <= 6; ++m) out.push_back(m);
  return out;
}

std::vector<ShiftPoint> shift_sensitivity(const ScorerFactory& factory, const EvalContext& ctx,
                                          std::span<const int> offsets, std::size_t threads) {
  const auto base_scorer = factory(0);
  const TopLists base = top_k_lists(*base_scorer, ctx, kTopK, threads);
  std::vector<ShiftPoint> curve;
  for (const int offset : offsets) {
    if (offset == 0) {
      curve.push_back({0, overlap_ratio(base, base)});
      continue;
    }
    const auto scorer = factory(days(kDaysPerMonth * offset));
    curve.push_back({offset, overlap_ratio(base, top_k_lists(*scorer, ctx, kTopK, threads))});
  }
  return curve;
}

nlohmann::json to_json(const RankingReport& report) {
  nlohmann::json hr = nlohmann::json::object(), ndcg = nlohmann::json::object();
  for (std::size_t c = 0; c < report.cutoffs.size(); ++c) {
    hr[std::to_string(report.cutoffs[c])] = report.hr[c];
    ndcg[std::to_string(report.cutoffs[c])] = report.ndcg[c];
  }
  return {{"pairs", report.records.size()}, {"hr", hr}, {"ndcg", ndcg}, {"combined", report.combined()}};
}

namespace {

nlohmann::json to_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

}  // namespace

nlohmann::json to_json(const AggregateReport& report) {
  nlohmann::json hr = nlohmann::json::object(), ndcg = nlohmann::json::object();
  for (std::size_t c = 0; c < report.cutoffs.size(); ++c) {
    hr[std::to_string(report.cutoffs[c])] = to_json(report.hr[c]);
    ndcg[std::to_string(report.cutoffs[c])] = to_json(report.ndcg[c]);
  }
  return {{"runs", report.runs}, {"hr", hr}, {"ndcg", ndcg}, {"combined", to_json(report.combined)}};
}

nlohmann::json to_json(const CohortTable& table) {
  nlohmann::json buckets = nlohmann::json::array();
  for (const auto& b : table.buckets) {
    buckets.push_back({{"users", b.users}, {"pairs", b.pairs}, {"score", b.score}});
  }
  return {{"thresholds_days", table.thresholds}, {"buckets", buckets}};
}

nlohmann::json to_json(std::span<const ShiftPoint> curve) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : curve) out.push_back({{"offset_months", p.offset}, {"overlap", p.overlap}});
  return out;
}

std::string records_csv(const RankingReport& report, const IndexedSplit& split) {
  std::ostringstream out;
  out << "user,item,time,rank\n";
  for (const auto& r : report.records) {
    out << split.users.id(r.user) << ',' << split.items.id(r.item) << ',' << r.time << ',' << r.rank << '\n';
  }
  return out.str();
}

}  // namespace peris
