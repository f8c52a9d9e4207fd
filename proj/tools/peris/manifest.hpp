#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace peris::app {

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

// Record of one CLI invocation, written next to its outputs as manifest.json.
class RunManifest {
 public:
  RunManifest(std::string command, std::vector<std::string> args);

  void set_config(nlohmann::json config) { config_ = std::move(config); }
  void set_seed(std::uint64_t seed) { seed_ = seed; }
  void add_input(const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path);

  nlohmann::json to_json() const;
  void write(const std::filesystem::path& dir) const;

 private:
  std::string command_;
  std::vector<std::string> args_;
  nlohmann::json config_ = nlohmann::json::object();
  std::uint64_t seed_ = 0;
  std::vector<std::pair<std::string, std::string>> inputs_;
  std::vector<std::string> outputs_;
  std::chrono::steady_clock::time_point started_;
};

}  // namespace peris::app
