#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace cnlm {

std::string toolkit_version();

// Config files hold one `key = value` per line. `#` starts a comment, blank
// lines are skipped, whitespace around keys and values is trimmed, and a key
// may appear only once. Values run to the end of the line.
std::map<std::string, std::string> parse_config(std::string_view text, std::string_view origin = "config");
std::string format_config(const std::map<std::string, std::string>& kv);

// Everything needed to rerun a subcommand and locate its outputs.
struct ExperimentManifest {
  std::string version;
  std::vector<std::string> command;               // argv, program name excluded
  std::map<std::string, std::string> config;      // effective configuration
  std::uint64_t seed = 0;
  std::map<std::string, std::string> corpus_checksums;  // path -> FNV-1a hex
  std::map<std::string, std::string> results;           // role -> path
  double wall_clock_seconds = 0;

  friend bool operator==(const ExperimentManifest&, const ExperimentManifest&) = default;
};

std::string manifest_json(const ExperimentManifest& m);
ExperimentManifest parse_manifest(std::string_view json);
void save_manifest(const ExperimentManifest& m, const std::filesystem::path& path);
ExperimentManifest load_manifest(const std::filesystem::path& path);

std::string file_checksum(const std::filesystem::path& path);

// Throws DataError unless every result file exists and parses (.json as
// JSON, .tsv as a table with a header; other files must merely exist).
void verify_manifest(const ExperimentManifest& m);

}  // namespace cnlm
