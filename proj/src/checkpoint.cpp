#include <bit>
#include <cstring>

#include <json.hpp>

#include "cnlm/error.hpp"
#include "cnlm/io.hpp"
#include "cnlm/lm.hpp"

// Layout (little-endian):
//   "CNLM" | u32 version | u64 header length | JSON header |
//   float64 parameter data in header order | u64 FNV-1a of everything before it
namespace cnlm {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

constexpr char kMagic[4] = {'C', 'N', 'L', 'M'};

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get(std::string_view bytes, std::size_t& pos) {
  if (pos + sizeof(T) > bytes.size()) throw DataError("checkpoint truncated");
  T v;
  std::memcpy(&v, bytes.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json header;
  header["config"] = ckpt.config.to_map();
  header["vocab"] = {{"symbols", ckpt.vocab.symbols()}, {"threshold", ckpt.vocab.threshold()}};
  header["trained_chars"] = ckpt.trained_chars;
  header["updates"] = ckpt.updates;
  header["learning_rate"] = ckpt.learning_rate;
  header["dev_bpc_history"] = ckpt.dev_bpc_history;
  header["rng_state"] = ckpt.rng_state;
  auto& params = header["params"] = nlohmann::json::array();
  for (const auto& p : ckpt.params.params()) params.push_back({{"name", p.name}, {"shape", p.value.shape}});
  const std::string text = header.dump();

  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out += text;
  for (const auto& p : ckpt.params.params()) {
    out.append(reinterpret_cast<const char*>(p.value.data.data()), p.value.data.size() * sizeof(double));
  }
  put<std::uint64_t>(out, io::fnv1a64(out));
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  if (bytes.size() < 4 + 4 + 8 + 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw DataError("not a checkpoint file");
  }
  const auto body = bytes.substr(0, bytes.size() - 8);
  std::size_t tail = body.size();
  if (get<std::uint64_t>(bytes, tail) != io::fnv1a64(body)) {
    throw DataError("checkpoint checksum mismatch (file corrupted)");
  }
  std::size_t pos = 4;
  const auto version = get<std::uint32_t>(body, pos);
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  const auto header_len = get<std::uint64_t>(body, pos);
  if (header_len > body.size() - pos) throw DataError("checkpoint truncated");
  Checkpoint ckpt;
  try {
    const auto header = nlohmann::json::parse(body.substr(pos, header_len));
    pos += header_len;
    ckpt.config = LMConfig::from_map(header.at("config").get<std::map<std::string, std::string>>());
    ckpt.vocab = Vocabulary(header.at("vocab").at("symbols").get<std::vector<std::string>>(),
                            header.at("vocab").at("threshold").get<std::uint64_t>());
    ckpt.trained_chars = header.at("trained_chars").get<std::uint64_t>();
    ckpt.updates = header.at("updates").get<std::uint64_t>();
    ckpt.learning_rate = header.at("learning_rate").get<double>();
    ckpt.dev_bpc_history = header.at("dev_bpc_history").get<std::vector<double>>();
    ckpt.rng_state = header.at("rng_state").get<std::string>();
    for (const auto& p : header.at("params")) {
      auto& param = ckpt.params.add(p.at("name").get<std::string>(),
                                    p.at("shape").get<std::vector<std::size_t>>());
      const std::size_t n = param.value.data.size() * sizeof(double);
      if (n > body.size() - pos) throw DataError("checkpoint truncated");
      std::memcpy(param.value.data.data(), body.data() + pos, n);
      pos += n;
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint header: ") + e.what());
  }
  if (pos != body.size()) throw DataError("checkpoint has trailing bytes");
  ckpt.net(ckpt.config.kind == ModelKind::char_autoencoder ? "decoder." : "");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  io::write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) {
  return deserialize_checkpoint(io::read_file(path));
}

}  // namespace cnlm
