#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "cnlm/corpus.hpp"
#include "cnlm/lm.hpp"

namespace cnlm {

// Two letter bigrams sharing their first letter; the first is the one the
// language permits.
struct BigramPair {
  std::u32string acceptable;
  std::u32string unacceptable;

  std::string label() const;  // "acc/unacc"
};

// Validates shape: two code points each, same first letter, distinct.
BigramPair make_bigram_pair(std::string_view acceptable, std::string_view unacceptable);

// True when the unacceptable bigram's second letter is at least as frequent
// as the acceptable one's, so a unigram model alone would prefer it.
bool passes_unigram_control(const BigramPair& pair, std::u32string_view stream);

// TSV with columns acceptable, unacceptable.
std::vector<BigramPair> parse_pairs(std::string_view tsv);

// Drops every gold token containing either bigram. Bigrams formed across
// token junctions after concatenation are not removed. Warns when more than
// half of the characters go.
AlignedCorpus filter_corpus(const AlignedCorpus& corpus, const BigramPair& pair);

// Within-token occurrences of either bigram (brute-force scan).
std::size_t within_token_occurrences(const AlignedCorpus& corpus, const BigramPair& pair);

// exp(log p(acceptable | context) - log p(unacceptable | context)).
double likelihood_ratio(const Checkpoint& ckpt, const BigramPair& pair, std::string_view context = ".");

// Geometric mean of the ratio over several left contexts.
double likelihood_ratio(const Checkpoint& ckpt, const BigramPair& pair, const std::vector<std::string>& contexts);

// `k` left contexts of `length` characters cut at random token ends.
std::vector<std::string> sample_contexts(const AlignedCorpus& corpus, std::size_t k, std::size_t length,
                                         std::uint64_t seed);

struct PhonotacticsRow {
  BigramPair pair;
  double ratio = 0;
  double removed_fraction = 0;  // share of training characters filtered out
  std::uint64_t trained_chars = 0;
};

struct PhonotacticsReport {
  std::vector<PhonotacticsRow> rows;
  double arithmetic_mean = 0;
  double geometric_mean = 0;
};

struct PhonotacticsOptions {
  std::vector<std::string> contexts;  // empty: score after a full stop
  bool require_unigram_control = true;
  std::function<void(const PhonotacticsRow&)> on_row;
};

// Retrains one model per pair on the filtered corpus (character vocabulary
// shared across pairs) and reports per-pair ratios with their means.
PhonotacticsReport run_phonotactics_suite(const AlignedCorpus& train, const Vocabulary& vocab,
                                          const std::vector<BigramPair>& pairs, const LMConfig& config,
                                          const PhonotacticsOptions& options = {});

// Arithmetic and geometric means of positive ratios.
std::pair<double, double> ratio_means(const std::vector<double>& ratios);

std::string format_phonotactics(const PhonotacticsReport& report);

}  // namespace cnlm
