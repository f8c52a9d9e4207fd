#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "peris/bpr.hpp"
#include "peris/model.hpp"
#include "peris/types.hpp"

namespace peris {

// Binary layout: "PERISCKP", u32 format version, u64 header length, a JSON
// header, then every tensor as raw little-endian doubles in header order.
inline constexpr char kCheckpointMagic[8] = {'P', 'E', 'R', 'I', 'S', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public InputError {
 public:
  using InputError::InputError;
};

struct Checkpoint {
  std::vector<std::string> users;
  std::vector<std::string> items;
  nlohmann::json hyperparams = nlohmann::json::object();
  std::variant<ModelState, BprState> state;

  const char* model_type() const;
};

void save_checkpoint(std::ostream& out, const Checkpoint& ckpt);
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint load_checkpoint(std::istream& in);

void save_checkpoint_file(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint_file(const std::filesystem::path& path);

}  // namespace peris
