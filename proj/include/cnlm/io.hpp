#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cnlm::io {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it over `path`, so readers
// never observe a partially written result.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::vector<std::string> split(std::string_view s, char sep);
std::vector<std::string> split_lines(std::string_view text);
std::string join(std::span<const std::string> parts, std::string_view sep);
std::string_view trim(std::string_view s);

// A TSV table with a mandatory header row.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column index by name; throws DataError when missing.
  std::size_t column(std::string_view name) const;
};

Table parse_tsv(std::string_view text, std::string_view what);
std::string format_tsv(const Table& table);

// FNV-1a, 64-bit.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::string_view bytes);

std::string hex64(std::uint64_t v);

}  // namespace cnlm::io
