#include "cnlm/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "cnlm/error.hpp"
#include "cnlm/io.hpp"
#include "cnlm/rng.hpp"
#include "cnlm/utf8.hpp"

namespace cnlm {

std::string CharStream::text() const { return utf8::encode(chars); }

Vocabulary::Vocabulary(std::vector<std::string> symbols, std::uint64_t threshold)
    : symbols_(std::move(symbols)), ascii_(128, -1), threshold_(threshold) {
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    const auto& s = symbols_[i];
    if (!index_.emplace(s, static_cast<int>(i)).second) {
      throw DataError("duplicate vocabulary symbol '" + s + "'");
    }
    if (s.size() == 1 && static_cast<unsigned char>(s[0]) < 128) {
      ascii_[static_cast<unsigned char>(s[0])] = static_cast<int>(i);
    }
  }
}

int Vocabulary::id(std::string_view symbol) const {
  const auto it = index_.find(std::string(symbol));
  return it == index_.end() ? unk_id() : it->second;
}

int Vocabulary::id(char32_t c) const {
  if (c < 128 && !ascii_.empty()) {
    const int v = ascii_[c];
    return v < 0 ? unk_id() : v;
  }
  return id(utf8::encode(c));
}

bool Vocabulary::contains(std::string_view symbol) const {
  return index_.contains(std::string(symbol));
}

const std::string& Vocabulary::symbol(int id) const {
  if (id == unk_id()) return unk_symbol_;
  return symbols_.at(static_cast<std::size_t>(id));
}

std::vector<int> Vocabulary::encode(std::u32string_view chars) const {
  std::vector<int> ids;
  ids.reserve(chars.size());
  for (char32_t c : chars) ids.push_back(id(c));
  return ids;
}

std::vector<int> Vocabulary::encode_tokens(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::pair<std::size_t, std::size_t> AlignedCorpus::paragraph_tokens(std::size_t p) const {
  const std::size_t first = paragraph_starts.at(p);
  const std::size_t last = p + 1 < paragraph_starts.size() ? paragraph_starts[p + 1] : tokens.size();
  return {first, last};
}

std::size_t AlignedCorpus::token_at(std::size_t position) const {
  const auto it = std::upper_bound(tokens.begin(), tokens.end(), position,
                                   [](std::size_t pos, const TokenSpan& t) { return pos < t.start; });
  if (it == tokens.begin()) throw std::out_of_range("position before first token");
  return static_cast<std::size_t>(it - tokens.begin()) - 1;
}

std::string LexiconEntry::feature(const std::string& key) const {
  const auto it = morph.find(key);
  return it == morph.end() ? std::string{} : it->second;
}

CharStream preprocess(std::string_view raw, bool keep_punct) {
  const auto decoded = utf8::decode(raw);
  CharStream out;
  out.chars.reserve(decoded.chars.size());
  out.origin_offsets.reserve(decoded.chars.size());
  for (std::size_t i = 0; i < decoded.chars.size(); ++i) {
    const char32_t c = decoded.chars[i];
    if (utf8::is_space(c)) continue;
    if (!keep_punct && utf8::is_punct(c)) continue;
    out.chars.push_back(utf8::to_lower(c));
    out.origin_offsets.push_back(decoded.offsets[i]);
  }
  return out;
}

Vocabulary build_vocabulary(const CharStream& stream, std::uint64_t threshold) {
  if (stream.empty()) throw DataError("cannot build a vocabulary from an empty stream");
  std::unordered_map<char32_t, std::uint64_t> counts;
  for (char32_t c : stream.chars) ++counts[c];
  std::vector<std::pair<char32_t, std::uint64_t>> kept;
  for (const auto& [c, n] : counts) {
    if (n >= threshold) kept.emplace_back(c, n);
  }
  if (kept.empty()) {
    throw ConfigError("frequency threshold " + std::to_string(threshold) +
                      " eliminates every symbol");
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> symbols;
  symbols.reserve(kept.size());
  for (const auto& [c, n] : kept) symbols.push_back(utf8::encode(c));
  return Vocabulary(std::move(symbols), threshold);
}

double unk_rate(const Vocabulary& vocab, const CharStream& stream) {
  if (stream.empty()) return 0.0;
  std::size_t unk = 0;
  for (char32_t c : stream.chars) unk += vocab.id(c) == vocab.unk_id();
  return static_cast<double>(unk) / static_cast<double>(stream.size());
}

std::vector<GoldToken> simple_tokenize(std::string_view raw) {
  const auto decoded = utf8::decode(raw);
  std::vector<GoldToken> tokens;
  std::u32string current;
  auto flush = [&] {
    if (!current.empty()) {
      tokens.push_back({utf8::encode(current), {}});
      current.clear();
    }
  };
  for (char32_t c : decoded.chars) {
    if (utf8::is_space(c)) {
      flush();
    } else if (utf8::is_punct(c)) {
      flush();
      tokens.push_back({utf8::encode(c), "PUNCT"});
    } else {
      current.push_back(c);
    }
  }
  flush();
  return tokens;
}

namespace {

// Appends aligned tokens of one paragraph to `out`.
void align_into(AlignedCorpus& out, std::string_view raw, std::size_t base_offset,
                const std::vector<GoldToken>& tokens) {
  const CharStream stream = preprocess(raw, true);
  const std::size_t base = out.stream.size();
  std::size_t pos = 0;
  const std::size_t first_token = out.tokens.size();
  out.paragraph_starts.push_back(first_token);
  for (const auto& tok : tokens) {
    const CharStream form = preprocess(tok.form, true);
    if (form.empty()) continue;
    const std::size_t start = pos;
    for (char32_t c : form.chars) {
      if (pos >= stream.size() || stream.chars[pos] != c) {
        throw DataError("token alignment mismatch at stream position " +
                        std::to_string(base + pos) + " (token '" + tok.form + "')");
      }
      ++pos;
    }
    out.tokens.push_back({base + start, base + pos, form.text(), tok.tag});
  }
  if (pos != stream.size()) {
    throw DataError("token alignment mismatch at stream position " + std::to_string(base + pos) +
                    " (text not covered by tokens)");
  }
  if (out.tokens.size() == out.paragraph_starts.back()) out.paragraph_starts.pop_back();
  out.stream.chars += stream.chars;
  for (auto off : stream.origin_offsets) out.stream.origin_offsets.push_back(base_offset + off);
  out.boundary.resize(out.stream.size(), false);
  for (std::size_t t = first_token; t < out.tokens.size(); ++t) {
    out.boundary[out.tokens[t].end - 1] = true;
  }
}

}  // namespace

AlignedCorpus align_boundaries(std::string_view raw, const std::vector<GoldToken>& tokens) {
  AlignedCorpus out;
  align_into(out, raw, 0, tokens);
  return out;
}

AlignedCorpus load_paragraph_corpus(std::string_view text) {
  AlignedCorpus out;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(start, end - start);
    if (!io::trim(line).empty()) {
      align_into(out, line, start, simple_tokenize(line));
    }
    start = end + 1;
  }
  return out;
}

AlignedCorpus load_token_corpus(std::string_view tsv) {
  const auto table = io::parse_tsv(tsv, "token corpus");
  const auto form_col = table.column("form");
  const auto par_col = table.column("paragraph");
  std::optional<std::size_t> tag_col;
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (table.header[i] == "pos" || table.header[i] == "tag") tag_col = i;
  }
  AlignedCorpus out;
  std::size_t offset = 0;
  std::size_t i = 0;
  while (i < table.rows.size()) {
    const std::string par = table.rows[i][par_col];
    std::vector<GoldToken> tokens;
    std::string raw;
    for (; i < table.rows.size() && table.rows[i][par_col] == par; ++i) {
      const auto& row = table.rows[i];
      if (!raw.empty()) raw += ' ';
      raw += row[form_col];
      tokens.push_back({row[form_col], tag_col ? row[*tag_col] : std::string{}});
    }
    align_into(out, raw, offset, tokens);
    offset += raw.size() + 1;
  }
  return out;
}

AlignedCorpus select_paragraphs(const AlignedCorpus& corpus,
                                const std::vector<std::size_t>& paragraph_ids) {
  AlignedCorpus out;
  std::size_t byte_base = 0;
  for (auto p : paragraph_ids) {
    const auto [first, last] = corpus.paragraph_tokens(p);
    if (first == last) continue;
    const std::size_t from = corpus.tokens[first].start;
    const std::size_t to = corpus.tokens[last - 1].end;
    const std::size_t shift = out.stream.size();
    out.paragraph_starts.push_back(out.tokens.size());
    for (std::size_t t = first; t < last; ++t) {
      auto tok = corpus.tokens[t];
      tok.start = tok.start - from + shift;
      tok.end = tok.end - from + shift;
      out.tokens.push_back(std::move(tok));
    }
    // Offsets refer to the concatenation of the selected paragraphs' sources.
    const std::size_t first_off = corpus.stream.origin_offsets[from];
    for (std::size_t i = from; i < to; ++i) {
      out.stream.chars.push_back(corpus.stream.chars[i]);
      out.stream.origin_offsets.push_back(byte_base + corpus.stream.origin_offsets[i] - first_off);
      out.boundary.push_back(corpus.boundary[i]);
    }
    byte_base += corpus.stream.origin_offsets[to - 1] - first_off +
                 utf8::encode(corpus.stream.chars[to - 1]).size() + 1;
  }
  return out;
}

CorpusSplit split_corpus(const AlignedCorpus& corpus, double dev_fraction, double test_fraction,
                         std::uint64_t seed) {
  if (!(dev_fraction > 0 && dev_fraction < 1 && test_fraction > 0 && test_fraction < 1) ||
      dev_fraction + test_fraction >= 1) {
    throw ConfigError("split fractions must lie in (0,1) and sum to less than 1");
  }
  const std::size_t n = corpus.paragraph_count();
  const auto count = [n](double f) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(f * static_cast<double>(n))));
  };
  const std::size_t n_dev = count(dev_fraction);
  const std::size_t n_test = count(test_fraction);
  if (n_dev + n_test >= n) {
    throw DataError("corpus has " + std::to_string(n) + " paragraphs; need at least " +
                    std::to_string(n_dev + n_test + 1) + " for train/dev/test");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  CorpusSplit split;
  split.dev_ids.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_dev));
  split.test_ids.assign(order.begin() + static_cast<std::ptrdiff_t>(n_dev),
                        order.begin() + static_cast<std::ptrdiff_t>(n_dev + n_test));
  split.train_ids.assign(order.begin() + static_cast<std::ptrdiff_t>(n_dev + n_test), order.end());
  std::sort(split.dev_ids.begin(), split.dev_ids.end());
  std::sort(split.test_ids.begin(), split.test_ids.end());
  split.train = select_paragraphs(corpus, split.train_ids);
  split.dev = select_paragraphs(corpus, split.dev_ids);
  split.test = select_paragraphs(corpus, split.test_ids);
  return split;
}

std::vector<PositionSample> sample_balanced_positions(const AlignedCorpus& corpus, std::size_t n,
                                                      std::size_t window,
                                                      const std::set<std::string>& exclusion,
                                                      std::uint64_t seed) {
  if (n % 2 != 0) throw ConfigError("balanced sample size must be even");
  if (corpus.stream.size() <= window) {
    throw DataError("corpus of " + std::to_string(corpus.stream.size()) +
                    " characters is not longer than the window " + std::to_string(window));
  }
  std::vector<std::size_t> final_pos, internal_pos;
  for (std::size_t p = 0; p < corpus.stream.size(); ++p) {
    (corpus.boundary[p] ? final_pos : internal_pos).push_back(p);
  }
  Rng rng(seed);
  rng.shuffle(final_pos);
  rng.shuffle(internal_pos);

  const std::size_t half = n / 2;
  std::vector<PositionSample> finals, internals;
  auto draw = [&](const std::vector<std::size_t>& pool, std::vector<PositionSample>& into) {
    for (std::size_t p : pool) {
      if (into.size() == half) break;
      const auto& tok = corpus.tokens[corpus.token_at(p)];
      std::string unit = utf8::encode(
          std::u32string_view(corpus.stream.chars).substr(tok.start, p + 1 - tok.start));
      if (exclusion.contains(unit)) continue;
      PositionSample s;
      s.position = p;
      s.label = corpus.boundary[p];
      const std::size_t from = p + 1 >= window ? p + 1 - window : 0;
      s.window = corpus.stream.chars.substr(from, p + 1 - from);
      s.unit = std::move(unit);
      into.push_back(std::move(s));
    }
  };
  draw(final_pos, finals);
  draw(internal_pos, internals);
  if (finals.size() < half || internals.size() < half) {
    throw DataError("insufficient eligible positions: need " + std::to_string(half) +
                    " per class, found " + std::to_string(finals.size()) + " word-final and " +
                    std::to_string(internals.size()) + " word-internal");
  }
  std::vector<PositionSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < half; ++i) {
    out.push_back(std::move(finals[i]));
    out.push_back(std::move(internals[i]));
  }
  return out;
}

std::vector<LexiconEntry> parse_lexicon(std::string_view tsv) {
  const auto table = io::parse_tsv(tsv, "lexicon");
  const auto c_form = table.column("form");
  const auto c_lemma = table.column("lemma");
  const auto c_pos = table.column("pos");
  const auto c_morph = table.column("morph");
  const auto c_freq = table.column("frequency");
  std::vector<LexiconEntry> out;
  out.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    LexiconEntry e;
    e.form = row[c_form];
    if (e.form.empty()) throw DataError("lexicon row " + std::to_string(r + 2) + ": empty form");
    e.lemma = row[c_lemma];
    e.pos = row[c_pos];
    const auto& morph = row[c_morph];
    if (!morph.empty() && morph != "_") {
      for (const auto& kv : io::split(morph, ';')) {
        if (kv.empty()) continue;
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
          throw DataError("lexicon row " + std::to_string(r + 2) + ": malformed morph '" + kv + "'");
        }
        e.morph[kv.substr(0, eq)] = kv.substr(eq + 1);
      }
    }
    const auto& f = row[c_freq];
    const auto res = std::from_chars(f.data(), f.data() + f.size(), e.frequency);
    if (res.ec != std::errc{} || res.ptr != f.data() + f.size()) {
      throw DataError("lexicon row " + std::to_string(r + 2) + ": bad frequency '" + f + "'");
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::string format_lexicon(const std::vector<LexiconEntry>& entries) {
  io::Table t;
  t.header = {"form", "lemma", "pos", "morph", "frequency"};
  for (const auto& e : entries) {
    std::string morph;
    for (const auto& [k, v] : e.morph) {
      if (!morph.empty()) morph += ';';
      morph += k + "=" + v;
    }
    t.rows.push_back({e.form, e.lemma, e.pos, morph.empty() ? "_" : morph, std::to_string(e.frequency)});
  }
  return io::format_tsv(t);
}

}  // namespace cnlm
