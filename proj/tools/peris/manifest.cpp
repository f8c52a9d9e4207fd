#include "peris/manifest.hpp"

#include <array>
#include <fstream>
#include <memory>

#include <openssl/evp.h>

#include "peris/checkpoint.hpp"
#include "peris/types.hpp"

#ifndef PERIS_VERSION
#define PERIS_VERSION "unknown"
#endif

namespace peris::app {

namespace {

std::string to_hex(const unsigned char* data, unsigned len) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  for (unsigned n = 0; n < len; ++n) {
    out += kDigits[data[n] >> 4];
    out += kDigits[data[n] & 0xf];
  }
  return out;
}

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
      throw std::runtime_error("sha256 init failed");
    }
  }
  void update(const char* data, std::size_t n) {
    if (EVP_DigestUpdate(ctx_.get(), data, n) != 1) throw std::runtime_error("sha256 update failed");
  }
  std::string hex() {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    if (EVP_DigestFinal_ex(ctx_.get(), digest, &len) != 1) throw std::runtime_error("sha256 final failed");
    return to_hex(digest, len);
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  Sha256 h;
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

RunManifest::RunManifest(std::string command, std::vector<std::string> args)
    : command_(std::move(command)), args_(std::move(args)), started_(std::chrono::steady_clock::now()) {}

void RunManifest::add_input(const std::filesystem::path& path) {
  inputs_.emplace_back(path.string(), sha256_file(path));
}

void RunManifest::add_output(const std::filesystem::path& path) { outputs_.push_back(path.string()); }

nlohmann::json RunManifest::to_json() const {
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& [path, hash] : inputs_) inputs.push_back({{"path", path}, {"sha256", hash}});
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
  return {{"command", command_},
          {"args", args_},
          {"config", config_},
          {"seed", seed_},
          {"inputs", inputs},
          {"outputs", outputs_},
          {"wall_time_s", wall},
          {"versions", {{"peris", PERIS_VERSION}, {"checkpoint_format", kCheckpointVersion}}}};
}

void RunManifest::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "manifest.json");
  out << to_json().dump(2) << '\n';
  if (!out) throw InputError("cannot write " + (dir / "manifest.json").string());
}

}  // namespace peris::app
