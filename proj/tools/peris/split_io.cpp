#include "peris/split_io.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

namespace peris::app {

void write_split(const std::filesystem::path& dir, const DatasetSplit& split) {
  std::filesystem::create_directories(dir);
  write_tsv_file(dir / kTrainFile, split.train);
  write_tsv_file(dir / kValidFile, split.valid);
  write_tsv_file(dir / kTestFile, split.test);
  std::ofstream meta(dir / kSplitFile);
  meta << split.manifest().dump(2) << '\n';
  if (!meta) throw InputError("cannot write " + (dir / kSplitFile).string());
}

DatasetSplit read_split(const std::filesystem::path& dir) {
  std::ifstream meta_in(dir / kSplitFile);
  if (!meta_in) throw InputError("missing " + (dir / kSplitFile).string() + "; run prepare first");
  DatasetSplit split;
  try {
    const auto meta = nlohmann::json::parse(meta_in);
    split.train_end_time = meta.at("train_end_time").get<Timestamp>();
    split.valid_end_time = meta.at("valid_end_time").get<Timestamp>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed " + (dir / kSplitFile).string() + ": " + e.what());
  }
  split.train = ingest_file(dir / kTrainFile);
  split.valid = ingest_file(dir / kValidFile);
  split.test = ingest_file(dir / kTestFile);
  return split;
}

}  // namespace peris::app
