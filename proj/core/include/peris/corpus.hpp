#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "peris/types.hpp"

namespace peris {

struct Interaction {
  std::string user;
  std::string item;
  Timestamp time = 0;

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

using InteractionSet = std::vector<Interaction>;

class ParseError : public InputError {
 public:
  ParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Reads `user<TAB>item<TAB>timestamp` records, one per line, no header.
InteractionSet ingest(std::istream& in);
InteractionSet ingest_file(const std::filesystem::path& path);

void write_tsv(std::ostream& out, const InteractionSet& data);
void write_tsv_file(const std::filesystem::path& path, const InteractionSet& data);

// Keeps users with at least `min_items` distinct items.
InteractionSet filter_users(const InteractionSet& data, std::size_t min_items);

struct DatasetSplit {
  InteractionSet train;
  InteractionSet valid;
  InteractionSet test;
  // Inclusive upper bounds: train has t <= train_end_time, valid has
  // train_end_time < t <= valid_end_time, test has t > valid_end_time.
  Timestamp train_end_time = 0;
  Timestamp valid_end_time = 0;

  nlohmann::json manifest() const;
};

// Splits on interaction time. Valid/test interactions whose user or item does
// not occur in train are dropped.
DatasetSplit chronological_split(const InteractionSet& data, Timestamp test_window,
                                 Timestamp valid_window);

class Vocabulary {
 public:
  Vocabulary() = default;
  // Ids are stored in lexicographic order so indices do not depend on input order.
  explicit Vocabulary(std::vector<std::string> ids);

  std::size_t size() const { return ids_.size(); }
  const std::string& id(std::uint32_t index) const { return ids_.at(index); }
  const std::vector<std::string>& ids() const { return ids_; }
  std::optional<std::uint32_t> find(const std::string& id) const;
  std::uint32_t at(const std::string& id) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.ids_ == b.ids_; }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

struct IndexedEvent {
  UserIdx user = 0;
  ItemIdx item = 0;
  Timestamp time = 0;
};

struct IndexedSplit {
  Vocabulary users;
  Vocabulary items;
  std::vector<IndexedEvent> train;  // each sorted stably by time
  std::vector<IndexedEvent> valid;
  std::vector<IndexedEvent> test;
  Timestamp train_end_time = 0;
  Timestamp valid_end_time = 0;

  static IndexedSplit from(const DatasetSplit& split);
  std::size_t n_users() const { return users.size(); }
  std::size_t n_items() const { return items.size(); }
};

struct HistoryEvent {
  ItemIdx item = 0;
  Timestamp time = 0;
};

class ConsumptionHistory {
 public:
  ConsumptionHistory() = default;
  ConsumptionHistory(UserIdx user, std::vector<HistoryEvent> events, Timestamp cutoff);

  UserIdx user() const { return user_; }
  Timestamp cutoff() const { return cutoff_; }
  std::span<const HistoryEvent> events() const { return events_; }
  // t < cutoff
  std::span<const HistoryEvent> past() const { return std::span(events_).first(split_); }
  // t >= cutoff
  std::span<const HistoryEvent> recent() const { return std::span(events_).subspan(split_); }

 private:
  UserIdx user_ = 0;
  Timestamp cutoff_ = 0;
  std::vector<HistoryEvent> events_;
  std::size_t split_ = 0;
};

// One history per user index; events ordered by time, ties in input order.
std::vector<ConsumptionHistory> build_histories(std::span<const IndexedEvent> train,
                                                Timestamp cutoff, std::size_t n_users);

}  // namespace peris
