#include "peris/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <string_view>
#include <unordered_set>

namespace peris {

ParseError::ParseError(std::size_t line, const std::string& what)
    : InputError("line " + std::to_string(line) + ": " + what), line_(line) {}

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

}  // namespace

InteractionSet ingest(std::istream& in) {
  InteractionSet out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_tabs(line);
    if (fields.size() != 3) {
      throw ParseError(line_no, "expected 3 tab-separated fields, got " +
                                    std::to_string(fields.size()));
    }
    if (fields[0].empty() || fields[1].empty()) {
      throw ParseError(line_no, "empty user or item id");
    }
    Timestamp t = 0;
    const auto ts = fields[2];
    const auto [ptr, ec] = std::from_chars(ts.data(), ts.data() + ts.size(), t);
    if (ec != std::errc() || ptr != ts.data() + ts.size()) {
      throw ParseError(line_no, "timestamp is not an integer: '" + std::string(ts) + "'");
    }
    if (t < 0) throw ParseError(line_no, "negative timestamp");
    out.push_back({std::string(fields[0]), std::string(fields[1]), t});
  }
  return out;
}

InteractionSet ingest_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  return ingest(in);
}

void write_tsv(std::ostream& out, const InteractionSet& data) {
  for (const auto& r : data) out << r.user << '\t' << r.item << '\t' << r.time << '\n';
}

void write_tsv_file(const std::filesystem::path& path, const InteractionSet& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_tsv(out, data);
}

InteractionSet filter_users(const InteractionSet& data, std::size_t min_items) {
  if (min_items == 0) throw InputError("min_items must be >= 1");
  std::unordered_map<std::string_view, std::unordered_set<std::string_view>> items_by_user;
  for (const auto& r : data) items_by_user[r.user].insert(r.item);
  InteractionSet out;
  for (const auto& r : data) {
    if (items_by_user[r.user].size() >= min_items) out.push_back(r);
  }
  return out;
}

nlohmann::json DatasetSplit::manifest() const {
  auto count_distinct = [](const InteractionSet& s, bool users) {
    std::set<std::string_view> ids;
    for (const auto& r : s) ids.insert(users ? r.user : r.item);
    return ids.size();
  };
  return {
      {"train_end_time", train_end_time},
      {"valid_end_time", valid_end_time},
      {"counts", {{"train", train.size()}, {"valid", valid.size()}, {"test", test.size()}}},
      {"train_users", count_distinct(train, true)},
      {"train_items", count_distinct(train, false)},
  };
}

DatasetSplit chronological_split(const InteractionSet& data, Timestamp test_window,
                                 Timestamp valid_window) {
  if (test_window <= 0 || valid_window <= 0) throw InputError("split windows must be positive");
  if (data.empty()) throw InputError("cannot split an empty interaction set");

  Timestamp max_time = data.front().time;
  for (const auto& r : data) max_time = std::max(max_time, r.time);

  DatasetSplit split;
  split.valid_end_time = max_time - test_window;
  split.train_end_time = split.valid_end_time - valid_window;

  InteractionSet valid, test;
  for (const auto& r : data) {
    if (r.time <= split.train_end_time) {
      split.train.push_back(r);
    } else if (r.time <= split.valid_end_time) {
      valid.push_back(r);
    } else {
      test.push_back(r);
    }
  }
  if (split.train.empty()) throw InputError("empty training split");

  std::unordered_set<std::string_view> users, items;
  for (const auto& r : split.train) {
    users.insert(r.user);
    items.insert(r.item);
  }
  auto warm = [&](const Interaction& r) { return users.contains(r.user) && items.contains(r.item); };
  std::copy_if(valid.begin(), valid.end(), std::back_inserter(split.valid), warm);
  std::copy_if(test.begin(), test.end(), std::back_inserter(split.test), warm);
  return split;
}

Vocabulary::Vocabulary(std::vector<std::string> ids) : ids_(std::move(ids)) {
  std::sort(ids_.begin(), ids_.end());
  ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
  index_.reserve(ids_.size());
  for (std::uint32_t i = 0; i < ids_.size(); ++i) index_.emplace(ids_[i], i);
}

std::optional<std::uint32_t> Vocabulary::find(const std::string& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint32_t Vocabulary::at(const std::string& id) const {
  const auto found = find(id);
  if (!found) throw InputError("unknown id '" + id + "'");
  return *found;
}

namespace {

std::vector<IndexedEvent> index_events(const InteractionSet& data, const Vocabulary& users,
                                       const Vocabulary& items) {
  std::vector<IndexedEvent> out;
  out.reserve(data.size());
  for (const auto& r : data) out.push_back({users.at(r.user), items.at(r.item), r.time});
  std::stable_sort(out.begin(), out.end(),
                   [](const IndexedEvent& a, const IndexedEvent& b) { return a.time < b.time; });
  return out;
}

}  // namespace

IndexedSplit IndexedSplit::from(const DatasetSplit& split) {
  IndexedSplit out;
  std::vector<std::string> users, items;
  for (const auto& r : split.train) {
    users.push_back(r.user);
    items.push_back(r.item);
  }
  out.users = Vocabulary(std::move(users));
  out.items = Vocabulary(std::move(items));
  out.train = index_events(split.train, out.users, out.items);
  out.valid = index_events(split.valid, out.users, out.items);
  out.test = index_events(split.test, out.users, out.items);
  out.train_end_time = split.train_end_time;
  out.valid_end_time = split.valid_end_time;
  return out;
}

ConsumptionHistory::ConsumptionHistory(UserIdx user, std::vector<HistoryEvent> events,
                                       Timestamp cutoff)
    : user_(user), cutoff_(cutoff), events_(std::move(events)) {
  std::stable_sort(events_.begin(), events_.end(),
                   [](const HistoryEvent& a, const HistoryEvent& b) { return a.time < b.time; });
  split_ = static_cast<std::size_t>(
      std::partition_point(events_.begin(), events_.end(),
                           [&](const HistoryEvent& e) { return e.time < cutoff_; }) -
      events_.begin());
}

std::vector<ConsumptionHistory> build_histories(std::span<const IndexedEvent> train,
                                                Timestamp cutoff, std::size_t n_users) {
  std::vector<std::vector<HistoryEvent>> events(n_users);
  for (const auto& e : train) {
    if (e.user >= n_users) throw InputError("user index out of range");
    events[e.user].push_back({e.item, e.time});
  }
  std::vector<ConsumptionHistory> out;
  out.reserve(n_users);
  for (std::size_t u = 0; u < n_users; ++u) {
    out.emplace_back(static_cast<UserIdx>(u), std::move(events[u]), cutoff);
  }
  return out;
}

}  // namespace peris
