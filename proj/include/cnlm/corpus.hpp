#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cnlm {

// Whitespace-free character stream. `chars` holds Unicode code points; a
// Vocabulary maps them to dense model ids.
struct CharStream {
  std::u32string chars;
  std::vector<std::size_t> origin_offsets;  // byte offset of each char in the raw source

  std::size_t size() const { return chars.size(); }
  bool empty() const { return chars.empty(); }
  std::string text() const;
};

// Frequency-ranked symbol inventory. Symbols are UTF-8 strings: single code
// points for character models, whole tokens for word models. The unknown
// symbol takes the id right after the last regular symbol.
class Vocabulary {
 public:
  static constexpr std::string_view kUnk = "<unk>";

  Vocabulary() = default;
  Vocabulary(std::vector<std::string> symbols, std::uint64_t threshold);

  const std::vector<std::string>& symbols() const { return symbols_; }
  std::uint64_t threshold() const { return threshold_; }
  int unk_id() const { return static_cast<int>(symbols_.size()); }
  // Number of model ids, unknown included.
  int size() const { return static_cast<int>(symbols_.size()) + 1; }

  int id(std::string_view symbol) const;
  int id(char32_t c) const;
  bool contains(std::string_view symbol) const;
  const std::string& symbol(int id) const;

  std::vector<int> encode(std::u32string_view chars) const;
  std::vector<int> encode_tokens(const std::vector<std::string>& tokens) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.symbols_ == b.symbols_ && a.threshold_ == b.threshold_;
  }

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, int> index_;
  std::vector<int> ascii_;  // fast path for code points < 128
  std::uint64_t threshold_ = 1;
  std::string unk_symbol_{kUnk};
};

struct TokenSpan {
  std::size_t start = 0;  // first stream position
  std::size_t end = 0;    // one past the last position
  std::string form;       // preprocessed surface form (UTF-8)
  std::string tag;
};

struct GoldToken {
  std::string form;
  std::string tag;
};

struct AlignedCorpus {
  CharStream stream;
  std::vector<bool> boundary;  // true iff the position ends a gold token
  std::vector<TokenSpan> tokens;
  std::vector<std::size_t> paragraph_starts;  // token index of each paragraph's first token

  std::size_t paragraph_count() const { return paragraph_starts.size(); }
  // Token index range [first, last) of paragraph p.
  std::pair<std::size_t, std::size_t> paragraph_tokens(std::size_t p) const;
  // Index of the token covering a stream position.
  std::size_t token_at(std::size_t position) const;
};

struct LexiconEntry {
  std::string form;
  std::string lemma;
  std::string pos;
  std::map<std::string, std::string> morph;
  std::uint64_t frequency = 0;

  std::string feature(const std::string& key) const;
};

// Lower-cases, strips whitespace (and punctuation unless keep_punct).
// Throws DataError on invalid UTF-8, naming the byte offset.
CharStream preprocess(std::string_view raw, bool keep_punct = true);

// Symbols with frequency >= threshold, most frequent first, ties by code point.
Vocabulary build_vocabulary(const CharStream& stream, std::uint64_t threshold);

// Fraction of positions that map to the unknown symbol.
double unk_rate(const Vocabulary& vocab, const CharStream& stream);

// Splits raw text into word and punctuation tokens: whitespace separates
// tokens and every punctuation character forms a token of its own.
std::vector<GoldToken> simple_tokenize(std::string_view raw);

// Aligns a gold tokenization with the preprocessed raw text. Throws
// DataError with the first divergent stream position on mismatch.
AlignedCorpus align_boundaries(std::string_view raw, const std::vector<GoldToken>& tokens);

// One paragraph per line; each line tokenized with simple_tokenize.
AlignedCorpus load_paragraph_corpus(std::string_view text);

// Gold tokenization file: TSV with at least a `form` column (`pos` optional)
// and a `paragraph` column grouping tokens into paragraphs.
AlignedCorpus load_token_corpus(std::string_view tsv);

struct CorpusSplit {
  AlignedCorpus train;
  AlignedCorpus dev;
  AlignedCorpus test;
  std::vector<std::size_t> train_ids, dev_ids, test_ids;  // source paragraph ids
};

// Paragraph-level random split; train paragraphs are shuffled by seed.
CorpusSplit split_corpus(const AlignedCorpus& corpus, double dev_fraction,
                         double test_fraction, std::uint64_t seed);

// Concatenation of a subset of paragraphs, in the given order.
AlignedCorpus select_paragraphs(const AlignedCorpus& corpus,
                                const std::vector<std::size_t>& paragraph_ids);

struct PositionSample {
  std::size_t position = 0;
  bool label = false;          // word-final?
  std::u32string window;       // up to `window` chars ending at position (inclusive)
  std::string unit;            // token, or token prefix, ending at position
};

// n/2 word-final and n/2 word-internal positions whose token (or prefix)
// is not in `exclusion`. Throws DataError on shortfall.
std::vector<PositionSample> sample_balanced_positions(const AlignedCorpus& corpus, std::size_t n,
                                                      std::size_t window,
                                                      const std::set<std::string>& exclusion,
                                                      std::uint64_t seed);

// Lexicon TSV: form, lemma, pos, morph (k=v;k=v), frequency.
std::vector<LexiconEntry> parse_lexicon(std::string_view tsv);
std::string format_lexicon(const std::vector<LexiconEntry>& entries);

}  // namespace cnlm
