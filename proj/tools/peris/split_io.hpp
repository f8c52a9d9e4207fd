#pragma once

#include <filesystem>

#include "peris/corpus.hpp"

namespace peris::app {

inline constexpr const char* kTrainFile = "train.tsv";
inline constexpr const char* kValidFile = "valid.tsv";
inline constexpr const char* kTestFile = "test.tsv";
inline constexpr const char* kSplitFile = "split.json";

void write_split(const std::filesystem::path& dir, const DatasetSplit& split);
DatasetSplit read_split(const std::filesystem::path& dir);

}  // namespace peris::app
