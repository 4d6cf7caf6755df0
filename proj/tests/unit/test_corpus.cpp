#include <doctest.h>

#include <set>

#include "cnlm/corpus.hpp"
#include "cnlm/error.hpp"
#include "cnlm/utf8.hpp"

using namespace cnlm;

TEST_CASE("preprocess lower-cases and drops whitespace") {
  const auto s = preprocess("Der  Baum\tist\nGRÜN.");
  CHECK(s.text() == "derbaumistgrün.");
  CHECK(s.origin_offsets.size() == s.size());
  CHECK(s.origin_offsets[3] == 5);  // 'b' after the double space
  CHECK(preprocess("a, b!", false).text() == "ab");
}

TEST_CASE("preprocess rejects invalid UTF-8 with the byte offset") {
  try {
    preprocess(std::string("ab\xff", 3));
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find('2') != std::string::npos);
  }
}

TEST_CASE("vocabulary is frequency ranked with code-point ties and a final unknown id") {
  const auto v = build_vocabulary(preprocess("bbbaaccd"), 1);
  CHECK(v.symbols() == std::vector<std::string>{"b", "a", "c", "d"});
  CHECK(v.size() == 5);
  CHECK(v.id(U'z') == v.unk_id());
  CHECK(v.symbol(v.unk_id()) == "<unk>");
  CHECK(v.encode(U"abz") == std::vector<int>{1, 0, 4});

  const auto t = build_vocabulary(preprocess("bbbaaccd"), 2);
  CHECK(t.symbols() == std::vector<std::string>{"b", "a", "c"});
  CHECK(unk_rate(t, preprocess("dd")) == doctest::Approx(1.0));
  CHECK_THROWS_AS(build_vocabulary(preprocess("ab"), 5), ConfigError);
  CHECK_THROWS_AS(build_vocabulary(CharStream{}, 1), DataError);
}

TEST_CASE("simple_tokenize splits punctuation into its own tokens") {
  const auto toks = simple_tokenize("Hello, world. It's");
  std::vector<std::string> forms;
  for (const auto& t : toks) forms.push_back(t.form);
  CHECK(forms == std::vector<std::string>{"Hello", ",", "world", ".", "It", "'", "s"});
  CHECK(toks[1].tag == "PUNCT");
}

TEST_CASE("align_boundaries marks token ends and reports divergence") {
  const auto c = align_boundaries("Der Baum.", {{"Der", ""}, {"Baum", ""}, {".", ""}});
  CHECK(c.stream.text() == "derbaum.");
  const std::vector<bool> expect{false, false, true, false, false, false, true, true};
  CHECK(c.boundary == expect);
  CHECK(c.tokens[1].start == 3);
  CHECK(c.tokens[1].end == 7);
  CHECK(c.token_at(5) == 1);
  CHECK_THROWS_AS(align_boundaries("Der Baum", {{"Der", ""}, {"Bau", ""}}), DataError);
}

TEST_CASE("paragraph corpus keeps paragraph starts and skips blank lines") {
  const auto c = load_paragraph_corpus("a b\n\n  \nc d e\n");
  CHECK(c.paragraph_count() == 2);
  CHECK(c.paragraph_tokens(1) == std::pair<std::size_t, std::size_t>{2, 5});
  CHECK(c.stream.text() == "abcde");
}

TEST_CASE("token corpus groups by paragraph column") {
  const auto c = load_token_corpus("form\tpos\tparagraph\nDer\tDET\t1\nBaum\tNOUN\t1\nEs\tPRON\t2\n");
  CHECK(c.paragraph_count() == 2);
  CHECK(c.tokens[1].tag == "NOUN");
  CHECK(c.stream.text() == "derbaumes");
}

TEST_CASE("split_corpus partitions paragraphs disjointly and deterministically") {
  std::string text;
  for (int i = 0; i < 50; ++i) text += "p" + std::to_string(i) + " x\n";
  const auto c = load_paragraph_corpus(text);
  const auto s = split_corpus(c, 0.1, 0.2, 7);
  CHECK(s.dev_ids.size() == 5);
  CHECK(s.test_ids.size() == 10);
  CHECK(s.train_ids.size() == 35);
  std::set<std::size_t> all(s.train_ids.begin(), s.train_ids.end());
  all.insert(s.dev_ids.begin(), s.dev_ids.end());
  all.insert(s.test_ids.begin(), s.test_ids.end());
  CHECK(all.size() == 50);
  const auto again = split_corpus(c, 0.1, 0.2, 7);
  CHECK(again.train_ids == s.train_ids);
  CHECK(s.train.paragraph_count() == 35);
  CHECK_THROWS_AS(split_corpus(c, 0.6, 0.5, 1), ConfigError);
}

TEST_CASE("balanced positions are half word-final and respect the exclusion set") {
  std::string text;
  for (int i = 0; i < 40; ++i) text += "the cat sat on mats\n";
  const auto c = load_paragraph_corpus(text);
  const auto s = sample_balanced_positions(c, 100, 10, {"cat"}, 3);
  REQUIRE(s.size() == 100);
  std::size_t finals = 0;
  for (const auto& p : s) {
    finals += p.label;
    CHECK(p.label == c.boundary[p.position]);
    CHECK(p.unit != "cat");
    CHECK(p.window.size() <= 10);
    CHECK(p.window.back() == c.stream.chars[p.position]);
  }
  CHECK(finals == 50);
  CHECK_THROWS_AS(sample_balanced_positions(c, 3, 10, {}, 1), ConfigError);
  CHECK_THROWS_AS(sample_balanced_positions(load_paragraph_corpus("ab cd ef gh ij kl\n"), 40, 4, {}, 1), DataError);
}

TEST_CASE("lexicon round-trips through TSV") {
  const std::string tsv =
      "form\tlemma\tpos\tmorph\tfrequency\nBäume\tBaum\tNOUN\tnumber=pl;plural=umlaut+e\t12\ngeht\tgehen\tVERB\t_\t3\n";
  const auto lex = parse_lexicon(tsv);
  REQUIRE(lex.size() == 2);
  CHECK(lex[0].feature("plural") == "umlaut+e");
  CHECK(lex[1].feature("number").empty());
  CHECK(parse_lexicon(format_lexicon(lex))[0].morph == lex[0].morph);
  CHECK_THROWS_AS(parse_lexicon("form\tlemma\tpos\tmorph\tfrequency\nx\tx\tN\t_\tmany\n"), DataError);
}
