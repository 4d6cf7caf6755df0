#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cnlm/rng.hpp"

namespace cnlm {

// Character n-gram counts over a whitespace-free stream. Keys have between
// min_order and n code points; `total` is the stream length (the unigram mass).
struct NgramTable {
  std::size_t n = 0;
  std::size_t min_order = 0;
  std::unordered_map<std::u32string, std::uint64_t> counts;
  std::uint64_t total = 0;

  std::uint64_t count(std::u32string_view gram) const;
};

// Sliding-window counts of every order in [min_order, n] (default: n only).
NgramTable count_ngrams(std::u32string_view stream, std::size_t n, std::size_t min_order = 0);

// Picks the candidate whose concatenation with the continuation has the
// most frequent prefix of length min(n, |candidate + continuation|); ties
// are broken uniformly at random. Returns the candidate index.
std::size_t predict_prefix(const NgramTable& table, const std::vector<std::u32string>& candidates,
                           std::u32string_view continuation, Rng& rng);
std::size_t predict_prefix(const NgramTable& table, const std::vector<std::u32string>& candidates,
                           std::u32string_view continuation, std::uint64_t seed);

// Substring test over the training stream; the empty phrase is attested.
bool is_attested(std::u32string_view stream, std::u32string_view phrase);
// Same test answered from the table when the phrase length is a stored order.
bool is_attested(const NgramTable& table, std::u32string_view phrase);

}  // namespace cnlm
