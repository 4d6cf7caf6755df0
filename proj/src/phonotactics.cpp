#include "cnlm/phonotactics.hpp"

#include <cmath>

#include <spdlog/spdlog.h>

#include "cnlm/error.hpp"
#include "cnlm/io.hpp"
#include "cnlm/rng.hpp"
#include "cnlm/utf8.hpp"

namespace cnlm {
namespace {

std::u32string bigram(std::string_view s) {
  const auto chars = preprocess(s).chars;
  if (chars.size() != 2) throw DataError("'" + std::string(s) + "' is not a two-letter bigram");
  return chars;
}

bool contains_pair(std::u32string_view chars, const BigramPair& pair) {
  return chars.find(pair.acceptable) != std::u32string_view::npos ||
         chars.find(pair.unacceptable) != std::u32string_view::npos;
}

}  // namespace

std::string BigramPair::label() const { return utf8::encode(acceptable) + "/" + utf8::encode(unacceptable); }

BigramPair make_bigram_pair(std::string_view acceptable, std::string_view unacceptable) {
  BigramPair p{bigram(acceptable), bigram(unacceptable)};
  if (p.acceptable[0] != p.unacceptable[0]) throw DataError("bigram pair " + p.label() + " differs in its first letter");
  if (p.acceptable == p.unacceptable) throw DataError("bigram pair " + p.label() + " is degenerate");
  return p;
}

bool passes_unigram_control(const BigramPair& pair, std::u32string_view stream) {
  std::size_t acc = 0, unacc = 0;
  for (char32_t c : stream) {
    acc += c == pair.acceptable[1];
    unacc += c == pair.unacceptable[1];
  }
  return unacc >= acc;
}

std::vector<BigramPair> parse_pairs(std::string_view tsv) {
  const auto t = io::parse_tsv(tsv, "bigram pair file");
  const auto a = t.column("acceptable"), u = t.column("unacceptable");
  std::vector<BigramPair> out;
  for (const auto& row : t.rows) out.push_back(make_bigram_pair(row[a], row[u]));
  return out;
}

AlignedCorpus filter_corpus(const AlignedCorpus& corpus, const BigramPair& pair) {
  AlignedCorpus out;
  std::size_t removed = 0;
  std::size_t next_paragraph = 0;
  bool paragraph_open = false;
  for (std::size_t t = 0; t < corpus.tokens.size(); ++t) {
    while (next_paragraph < corpus.paragraph_starts.size() && corpus.paragraph_starts[next_paragraph] == t) {
      ++next_paragraph;
      paragraph_open = false;
    }
    const auto& tok = corpus.tokens[t];
    const std::u32string_view chars(corpus.stream.chars.data() + tok.start, tok.end - tok.start);
    if (contains_pair(chars, pair)) {
      removed += chars.size();
      continue;
    }
    if (!paragraph_open) {
      out.paragraph_starts.push_back(out.tokens.size());
      paragraph_open = true;
    }
    TokenSpan span = tok;
    span.start = out.stream.chars.size();
    out.stream.chars.append(chars);
    for (std::size_t i = tok.start; i < tok.end; ++i) {
      out.stream.origin_offsets.push_back(i < corpus.stream.origin_offsets.size() ? corpus.stream.origin_offsets[i] : 0);
      out.boundary.push_back(i + 1 == tok.end);
    }
    span.end = out.stream.chars.size();
    out.tokens.push_back(std::move(span));
  }
  if (!corpus.stream.empty() && 2 * removed > corpus.stream.size()) {
    spdlog::warn("filtering {} removed {:.1f}% of the corpus", pair.label(),
                 100.0 * static_cast<double>(removed) / static_cast<double>(corpus.stream.size()));
  }
  return out;
}

std::size_t within_token_occurrences(const AlignedCorpus& corpus, const BigramPair& pair) {
  std::size_t n = 0;
  for (const auto& tok : corpus.tokens) {
    for (std::size_t i = tok.start; i + 1 < tok.end; ++i) {
      const char32_t a = corpus.stream.chars[i], b = corpus.stream.chars[i + 1];
      n += (a == pair.acceptable[0] && b == pair.acceptable[1]) ||
           (a == pair.unacceptable[0] && b == pair.unacceptable[1]);
    }
  }
  return n;
}

double likelihood_ratio(const Checkpoint& ckpt, const BigramPair& pair, std::string_view context) {
  const auto acc = score(ckpt, utf8::encode(pair.acceptable), context);
  const auto unacc = score(ckpt, utf8::encode(pair.unacceptable), context);
  return std::exp(acc.nats - unacc.nats);
}

double likelihood_ratio(const Checkpoint& ckpt, const BigramPair& pair, const std::vector<std::string>& contexts) {
  if (contexts.empty()) return likelihood_ratio(ckpt, pair);
  double log_sum = 0;
  for (const auto& c : contexts) log_sum += std::log(likelihood_ratio(ckpt, pair, c));
  return std::exp(log_sum / static_cast<double>(contexts.size()));
}

std::vector<std::string> sample_contexts(const AlignedCorpus& corpus, std::size_t k, std::size_t length,
                                         std::uint64_t seed) {
  std::vector<std::size_t> ends;
  for (const auto& tok : corpus.tokens) {
    if (tok.end >= length) ends.push_back(tok.end);
  }
  if (ends.empty()) throw DataError("corpus too short to sample contexts of length " + std::to_string(length));
  Rng rng(seed);
  std::vector<std::string> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t end = ends[rng.below(ends.size())];
    out.push_back(utf8::encode(std::u32string_view(corpus.stream.chars).substr(end - length, length)));
  }
  return out;
}

std::pair<double, double> ratio_means(const std::vector<double>& ratios) {
  if (ratios.empty()) return {0.0, 0.0};
  double sum = 0, log_sum = 0;
  for (double r : ratios) {
    if (!(r > 0)) throw NumericError("likelihood ratio must be positive");
    sum += r;
    log_sum += std::log(r);
  }
  const double n = static_cast<double>(ratios.size());
  const double am = sum / n;
  // Guard the AM-GM ordering against rounding when all ratios coincide.
  return {am, std::min(am, std::exp(log_sum / n))};
}

PhonotacticsReport run_phonotactics_suite(const AlignedCorpus& train, const Vocabulary& vocab,
                                          const std::vector<BigramPair>& pairs, const LMConfig& config,
                                          const PhonotacticsOptions& options) {
  PhonotacticsReport report;
  std::vector<double> ratios;
  for (const auto& pair : pairs) {
    if (options.require_unigram_control && !passes_unigram_control(pair, train.stream.chars)) {
      throw DataError("pair " + pair.label() + " fails the unigram control");
    }
    const auto filtered = filter_corpus(train, pair);
    const auto ckpt = train_lm(vocab.encode(filtered.stream.chars), vocab, config);
    PhonotacticsRow row;
    row.pair = pair;
    row.ratio = likelihood_ratio(ckpt, pair, options.contexts);
    row.removed_fraction = train.stream.empty() ? 0.0
                                                : 1.0 - static_cast<double>(filtered.stream.size()) /
                                                            static_cast<double>(train.stream.size());
    row.trained_chars = ckpt.trained_chars;
    spdlog::info("pair {}: ratio {:.4f}", pair.label(), row.ratio);
    if (options.on_row) options.on_row(row);
    ratios.push_back(row.ratio);
    report.rows.push_back(std::move(row));
  }
  std::tie(report.arithmetic_mean, report.geometric_mean) = ratio_means(ratios);
  return report;
}

std::string format_phonotactics(const PhonotacticsReport& report) {
  io::Table t;
  t.header = {"acceptable", "unacceptable", "ratio", "removed_fraction", "trained_chars"};
  auto num = [](double v) { return fmt::format("{:.6g}", v); };
  for (const auto& r : report.rows) {
    t.rows.push_back({utf8::encode(r.pair.acceptable), utf8::encode(r.pair.unacceptable), num(r.ratio),
                      num(r.removed_fraction), std::to_string(r.trained_chars)});
  }
  t.rows.push_back({"AM", "", num(report.arithmetic_mean), "", ""});
  t.rows.push_back({"GM", "", num(report.geometric_mean), "", ""});
  return io::format_tsv(t);
}

}  // namespace cnlm
