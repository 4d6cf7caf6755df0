#include "cnlm/manifest.hpp"

#include <json.hpp>

#include "cnlm/error.hpp"
#include "cnlm/io.hpp"

namespace cnlm {

std::string toolkit_version() { return CNLM_VERSION; }

std::map<std::string, std::string> parse_config(std::string_view text, std::string_view origin) {
  std::map<std::string, std::string> out;
  const auto lines = io::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = io::trim(line);
    if (line.empty()) continue;
    const auto where = std::string(origin) + ":" + std::to_string(i + 1);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected key = value");
    const std::string key(io::trim(line.substr(0, eq)));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (!out.emplace(key, std::string(io::trim(line.substr(eq + 1)))).second) {
      throw ConfigError(where + ": duplicate key '" + key + "'");
    }
  }
  return out;
}

std::string format_config(const std::map<std::string, std::string>& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

std::string manifest_json(const ExperimentManifest& m) {
  nlohmann::ordered_json j;
  j["version"] = m.version;
  j["command"] = m.command;
  j["config"] = m.config;
  j["seed"] = m.seed;
  j["corpus_checksums"] = m.corpus_checksums;
  j["results"] = m.results;
  j["wall_clock_seconds"] = m.wall_clock_seconds;
  return j.dump(2) + "\n";
}

ExperimentManifest parse_manifest(std::string_view json) {
  try {
    const auto j = nlohmann::json::parse(json);
    ExperimentManifest m;
    m.version = j.at("version").get<std::string>();
    m.command = j.at("command").get<std::vector<std::string>>();
    m.config = j.at("config").get<std::map<std::string, std::string>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.corpus_checksums = j.at("corpus_checksums").get<std::map<std::string, std::string>>();
    m.results = j.at("results").get<std::map<std::string, std::string>>();
    m.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  }
}

void save_manifest(const ExperimentManifest& m, const std::filesystem::path& path) {
  io::write_file_atomic(path, manifest_json(m));
}

ExperimentManifest load_manifest(const std::filesystem::path& path) { return parse_manifest(io::read_file(path)); }

std::string file_checksum(const std::filesystem::path& path) { return io::hex64(io::fnv1a64(io::read_file(path))); }

void verify_manifest(const ExperimentManifest& m) {
  for (const auto& [role, path] : m.results) {
    const std::filesystem::path p(path);
    if (!std::filesystem::exists(p)) throw DataError("result '" + role + "' missing: " + path);
    const auto ext = p.extension().string();
    if (ext == ".json") {
      if (!nlohmann::json::accept(io::read_file(p))) throw DataError("result '" + role + "' is not valid JSON: " + path);
    } else if (ext == ".tsv") {
      io::parse_tsv(io::read_file(p), path);
    }
  }
}

}  // namespace cnlm
