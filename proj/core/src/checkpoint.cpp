#include "peris/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace peris {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

const char* Checkpoint::model_type() const {
  return std::holds_alternative<ModelState>(state) ? "peris" : "bpr";
}

namespace {

template <typename T>
void write_le(std::ostream& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.write(buf, sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  char buf[sizeof(T)];
  if (!in.read(buf, sizeof(T))) throw CheckpointError("truncated checkpoint");
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

std::vector<ConstTensorView> views(const Checkpoint& ckpt) {
  return std::visit([](const auto& s) { return tensors(s); }, ckpt.state);
}

}  // namespace

void save_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  const auto ts = views(ckpt);
  const std::size_t k = std::visit([](const auto& s) { return s.dim(); }, ckpt.state);
  const std::size_t n_users = std::visit([](const auto& s) { return s.n_users(); }, ckpt.state);
  const std::size_t n_items = std::visit([](const auto& s) { return s.n_items(); }, ckpt.state);
  if (ckpt.users.size() != n_users || ckpt.items.size() != n_items) {
    throw CheckpointError("vocabulary size does not match the model");
  }
  nlohmann::json tensors_json = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& t : ts) {
    tensors_json.push_back({{"name", t.name}, {"shape", {t.rows, t.cols}}, {"offset", offset}});
    offset += t.values.size() * sizeof(double);
  }
  const nlohmann::json header = {{"schema_version", kCheckpointVersion},
                                 {"model_type", ckpt.model_type()},
                                 {"k", k},
                                 {"n_users", n_users},
                                 {"n_items", n_items},
                                 {"users", ckpt.users},
                                 {"items", ckpt.items},
                                 {"hyperparams", ckpt.hyperparams},
                                 {"tensors", tensors_json}};
  const std::string text = header.dump();
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  write_le<std::uint32_t>(out, kCheckpointVersion);
  write_le<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : ts) {
    out.write(reinterpret_cast<const char*>(t.values.data()),
              static_cast<std::streamsize>(t.values.size() * sizeof(double)));
  }
  if (!out) throw CheckpointError("failed to write checkpoint");
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::ostringstream out(std::ios::binary);
  save_checkpoint(out, ckpt);
  return out.str();
}

Checkpoint load_checkpoint(std::istream& in) {
  char magic[sizeof(kCheckpointMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw CheckpointError("not a checkpoint file");
  }
  const auto version = read_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = read_le<std::uint64_t>(in);
  if (header_len > (std::uint64_t{1} << 32)) throw CheckpointError("implausible header length");
  std::string text(header_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(header_len))) {
    throw CheckpointError("truncated checkpoint header");
  }

  Checkpoint ckpt;
  try {
    const auto header = nlohmann::json::parse(text);
    const auto type = header.at("model_type").get<std::string>();
    const auto k = header.at("k").get<std::size_t>();
    const auto n_users = header.at("n_users").get<std::size_t>();
    const auto n_items = header.at("n_items").get<std::size_t>();
    ckpt.users = header.at("users").get<std::vector<std::string>>();
    ckpt.items = header.at("items").get<std::vector<std::string>>();
    ckpt.hyperparams = header.at("hyperparams");
    if (ckpt.users.size() != n_users || ckpt.items.size() != n_items) {
      throw CheckpointError("vocabulary size does not match the header");
    }
    if (type == "peris") {
      ckpt.state = ModelState::zeros(n_users, n_items, k);
    } else if (type == "bpr") {
      ckpt.state = BprState::zeros(n_users, n_items, k);
    } else {
      throw CheckpointError("unknown model_type '" + type + "'");
    }
    auto ts = std::visit([](auto& s) { return tensors(s); }, ckpt.state);
    const auto& listed = header.at("tensors");
    if (listed.size() != ts.size()) throw CheckpointError("unexpected tensor count");
    std::uint64_t offset = 0;
    for (std::size_t g = 0; g < ts.size(); ++g) {
      const auto& entry = listed[g];
      const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
      if (entry.at("name").get<std::string>() != ts[g].name || shape.size() != 2 ||
          shape[0] != ts[g].rows || shape[1] != ts[g].cols ||
          entry.at("offset").get<std::uint64_t>() != offset) {
        throw CheckpointError("tensor '" + std::string(ts[g].name) + "' does not match the expected layout");
      }
      const auto bytes = static_cast<std::streamsize>(ts[g].values.size() * sizeof(double));
      if (!in.read(reinterpret_cast<char*>(ts[g].values.data()), bytes)) {
        throw CheckpointError("truncated tensor data");
      }
      offset += static_cast<std::uint64_t>(bytes);
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  }
  if (in.peek() != std::char_traits<char>::eof()) throw CheckpointError("trailing bytes after tensor data");
  return ckpt;
}

void save_checkpoint_file(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  save_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  return load_checkpoint(in);
}

}  // namespace peris
