#include <doctest.h>

#include <cmath>

#include "cnlm/error.hpp"
#include "cnlm/phonotactics.hpp"

using namespace cnlm;

namespace {

const AlignedCorpus& toy_corpus() {
  static const AlignedCorpus c = load_paragraph_corpus(
      "der braun bär trinkt bier\n"
      "ein brot und butter bitte\n"
      "das boot ist blau\n"
      "die tür ist zu.\n");
  return c;
}

Checkpoint toy_model(const Vocabulary& v, std::uint64_t seed) {
  LMConfig c;
  c.embedding_size = 5;
  c.hidden_size = 7;
  c.seed = seed;
  auto ckpt = init_checkpoint(c, v);
  Rng rng(seed);
  for (auto& p : ckpt.params.params()) {
    for (auto& x : p.value.data) x += rng.uniform(-0.5, 0.5);
  }
  return ckpt;
}

}  // namespace

TEST_CASE("bigram pairs are validated") {
  const auto p = make_bigram_pair("br", "bt");
  CHECK(p.label() == "br/bt");
  CHECK_THROWS_AS(make_bigram_pair("br", "dt"), DataError);
  CHECK_THROWS_AS(make_bigram_pair("b", "bt"), DataError);
  CHECK_THROWS_AS(make_bigram_pair("br", "br"), DataError);
  CHECK(make_bigram_pair("fü", "ft").acceptable.size() == 2);
  const auto pairs = parse_pairs("acceptable\tunacceptable\nbu\tbt\nzu\tzt\n");
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[1].unacceptable == U"zt");
}

TEST_CASE("unigram control compares second-letter frequencies") {
  CHECK(passes_unigram_control(make_bigram_pair("br", "bt"), U"rttt"));
  CHECK(passes_unigram_control(make_bigram_pair("br", "bt"), U"rt"));
  CHECK_FALSE(passes_unigram_control(make_bigram_pair("br", "bt"), U"rrt"));
}

TEST_CASE("filtering removes every token containing either bigram") {
  const auto& c = toy_corpus();
  const auto pair = make_bigram_pair("br", "bt");
  CHECK(within_token_occurrences(c, pair) == 2);  // braun, brot
  const auto f = filter_corpus(c, pair);
  CHECK(within_token_occurrences(f, pair) == 0);
  for (const auto& t : f.tokens) {
    CHECK(t.form != "braun");
    CHECK(t.form != "brot");
  }
  CHECK(f.tokens.size() == c.tokens.size() - 2);
  CHECK(f.stream.size() == c.stream.size() - 9);
  CHECK(f.boundary.size() == f.stream.size());
  CHECK(f.paragraph_count() == c.paragraph_count());

  // A pair absent from the corpus leaves it unchanged.
  const auto same = filter_corpus(c, make_bigram_pair("qu", "qz"));
  CHECK(same.stream.chars == c.stream.chars);
  CHECK(same.boundary == c.boundary);
}

TEST_CASE("likelihood ratio is the product of per-character conditionals") {
  const auto v = build_vocabulary(toy_corpus().stream, 1);
  const auto ckpt = toy_model(v, 7);
  const auto pair = make_bigram_pair("bu", "bt");
  const auto acc = trace(ckpt, "bu", ".");
  const auto un = trace(ckpt, "bt", ".");
  const double by_hand = std::exp(acc.log_prob[0] + acc.log_prob[1] - un.log_prob[0] - un.log_prob[1]);
  CHECK(likelihood_ratio(ckpt, pair) == doctest::Approx(by_hand).epsilon(1e-9));
  // The shared first letter cancels.
  CHECK(likelihood_ratio(ckpt, pair) == doctest::Approx(std::exp(acc.log_prob[1] - un.log_prob[1])).epsilon(1e-9));

  const std::vector<std::string> contexts{".", "der", "und"};
  double log_sum = 0;
  for (const auto& ctx : contexts) log_sum += std::log(likelihood_ratio(ckpt, pair, ctx));
  CHECK(likelihood_ratio(ckpt, pair, contexts) == doctest::Approx(std::exp(log_sum / 3)).epsilon(1e-9));

  LMConfig c;
  const auto uniform = init_checkpoint(c, v);
  auto zeroed = uniform;
  for (auto& p : zeroed.params.params()) std::fill(p.value.data.begin(), p.value.data.end(), 0.0);
  CHECK(likelihood_ratio(zeroed, pair) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sampled contexts end at token boundaries") {
  const auto& c = toy_corpus();
  const auto ctx = sample_contexts(c, 20, 6, 3);
  REQUIRE(ctx.size() == 20);
  for (const auto& s : ctx) CHECK_FALSE(s.empty());
  CHECK(sample_contexts(c, 20, 6, 3) == ctx);
}

TEST_CASE("ratio means: arithmetic above geometric") {
  const std::vector<double> german{4.6, 1.9, 6.5, 6.4, 5.4, 2.4, 0.8, 2.1, 2.7, 3.8, 2.5};
  const auto [am, gm] = ratio_means(german);
  CHECK(std::round(am * 10) / 10 == doctest::Approx(3.6));
  CHECK(std::round(gm * 10) / 10 == doctest::Approx(3.0));
  CHECK(gm <= am);
  const auto [a1, g1] = ratio_means({2.0, 2.0});
  CHECK(g1 <= a1);
  CHECK(a1 == 2.0);
  CHECK_THROWS_AS(ratio_means({1.0, 0.0}), NumericError);
}

TEST_CASE("suite retrains per pair and reports filtered shares") {
  std::string text;
  for (int i = 0; i < 40; ++i) text += "der braun bär trinkt bier und butter.\n";
  const auto c = load_paragraph_corpus(text);
  const auto v = build_vocabulary(c.stream, 1);
  LMConfig cfg;
  cfg.embedding_size = 4;
  cfg.hidden_size = 8;
  cfg.batch_size = 2;
  cfg.bptt_length = 10;
  cfg.char_budget = 2000;
  std::size_t rows_seen = 0;
  PhonotacticsOptions opts;
  opts.require_unigram_control = false;
  opts.on_row = [&](const PhonotacticsRow&) { ++rows_seen; };
  const auto report = run_phonotactics_suite(c, v, {make_bigram_pair("br", "bt"), make_bigram_pair("bu", "bd")}, cfg, opts);
  REQUIRE(report.rows.size() == 2);
  CHECK(rows_seen == 2);
  CHECK(report.rows[0].removed_fraction == doctest::Approx(5.0 / 31.0));
  CHECK(report.rows[1].removed_fraction == doctest::Approx(6.0 / 31.0));
  for (const auto& r : report.rows) CHECK(r.ratio > 0);
  const auto [am, gm] = ratio_means({report.rows[0].ratio, report.rows[1].ratio});
  CHECK(report.arithmetic_mean == am);
  CHECK(report.geometric_mean == gm);
  const auto tsv = format_phonotactics(report);
  CHECK(tsv.find("br\tbt\t") != std::string::npos);

  opts.require_unigram_control = true;
  CHECK_THROWS_AS(run_phonotactics_suite(c, v, {make_bigram_pair("br", "bt")}, cfg, opts), DataError);
}
