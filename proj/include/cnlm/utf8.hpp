#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace cnlm::utf8 {

struct Decoded {
  std::u32string chars;
  std::vector<std::size_t> offsets;  // byte offset of each code point
};

// Strict decoding; throws DataError naming the byte offset of the first
// invalid sequence (overlong forms, surrogates and truncation included).
Decoded decode(std::string_view bytes);

std::string encode(char32_t c);
std::string encode(std::u32string_view s);

// Number of code points; input must be valid UTF-8.
std::size_t length(std::string_view s);

char32_t to_lower(char32_t c);
bool is_space(char32_t c);
bool is_punct(char32_t c);
bool is_alpha(char32_t c);

std::u32string to_lower(std::u32string_view s);

}  // namespace cnlm::utf8
