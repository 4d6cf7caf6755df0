#include <doctest.h>

#include <fstream>
#include <sstream>

#include "cnlm/error.hpp"
#include "cnlm/syntax.hpp"
#include "cnlm/utf8.hpp"

using namespace cnlm;

namespace {

// Scores a sentence by a lookup on its variant; unknown variants decline.
class TableScorer : public Scorer {
 public:
  explicit TableScorer(std::map<std::string, double> table) : table_(std::move(table)) {}
  std::optional<double> log_likelihood(const std::string& prefix, const std::string& variant,
                                       const std::string& suffix) const override {
    seen.push_back(delimited(prefix, variant, suffix));
    const auto it = table_.find(variant);
    if (it == table_.end()) return std::nullopt;
    return it->second;
  }
  mutable std::vector<std::string> seen;

 private:
  std::map<std::string, double> table_;
};

MinimalPairItem pair_item(std::string id, std::vector<std::string> variants, std::size_t correct,
                          std::map<std::string, std::string> condition = {}) {
  MinimalPairItem it;
  it.id = std::move(id);
  it.phenomenon = "test";
  it.variants = std::move(variants);
  it.correct = correct;
  it.condition = std::move(condition);
  return it;
}

std::string read_data(const std::string& name) {
  std::ifstream in(std::string(CNLM_SOURCE_DIR) + "/data/stimuli/" + name);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("stimulus items round-trip through TSV") {
  auto a = pair_item("a1", {"der Baum", "die Baum"}, 0, {{"interveners", "0"}, {"gender", "m"}});
  a.frame_prefix = "ich sehe";
  auto b = pair_item("b1", {"x", "y", "z"}, 2);
  b.control_variants = {"x", "y", "z"};
  const auto back = parse_items(format_items({a, b}));
  REQUIRE(back.size() == 2);
  CHECK(back[0].condition == a.condition);
  CHECK(back[0].frame_prefix == "ich sehe");
  CHECK(back[0].frame_suffix.empty());
  CHECK(back[1].variants == b.variants);
  CHECK(back[1].control_variants == b.control_variants);
  CHECK(back[0].control_variants.empty());

  const std::string header = "id\tphenomenon\tcondition\tframe_prefix\tframe_suffix\tvariants\tcorrect_index\tcontrol_variants\n";
  CHECK_THROWS_AS(parse_items(header + "x\tp\t_\t_\t_\ta\t0\t_\n"), DataError);
  CHECK_THROWS_AS(parse_items(header + "x\tp\t_\t_\t_\ta|b\t2\t_\n"), DataError);
  CHECK_THROWS_AS(parse_items(header + "x\tp\tnoeq\t_\t_\ta|b\t0\t_\n"), DataError);
}

TEST_CASE("delimited sentences end in exactly one full stop") {
  CHECK(delimited("ich sehe", "der Baum", "") == "ich sehe der Baum .");
  CHECK(delimited("", " die Frau ", "lacht.") == "die Frau lacht.");
  CHECK(delimited("", "", "") == ".");
}

TEST_CASE("score_item picks the argmax and reports ties") {
  TableScorer s({{"a", -3.0}, {"b", -1.0}, {"c", -1.0}, {"d", -5.0}});
  auto item = pair_item("t", {"a", "d"}, 0);
  const auto o = score_item(s, item);
  CHECK(o.scored);
  CHECK(o.chosen == 0);
  CHECK_FALSE(o.tie);
  CHECK(o.scores == std::vector<double>{-3.0, -5.0});

  item.variants = {"a", "b", "c"};
  const auto first = score_item(s, item);
  CHECK(first.tie);
  CHECK(first.chosen == 1);
  std::size_t second = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    item.id = "t" + std::to_string(seed);
    const auto r = score_item(s, item, false, seed);
    CHECK((r.chosen == 1 || r.chosen == 2));
    second += r.chosen == 2;
    CHECK(score_item(s, item, false, seed).chosen == r.chosen);
  }
  CHECK(second > 70);
  CHECK(second < 130);

  item.variants = {"a", "unknown"};
  CHECK_FALSE(score_item(s, item).scored);
  CHECK_THROWS_AS(score_item(s, item, true), DataError);
}

TEST_CASE("control scoring drops the frame prefix but keeps the suffix") {
  TableScorer s({{"mit der roten", -1.0}, {"mit der rote", -2.0}});
  auto item = pair_item("c", {"mit der rote", "mit der roten"}, 1);
  item.frame_prefix = "er spielt";
  item.frame_suffix = "Farbe.";
  item.control_variants = item.variants;
  score_item(s, item, true);
  CHECK(s.seen.back() == "mit der roten Farbe.");
  score_item(s, item, false);
  CHECK(s.seen.back() == "er spielt mit der roten Farbe.");
}

TEST_CASE("evaluate_suite groups by condition and macro-averages classes") {
  TableScorer s({{"good", 0.0}, {"bad", -1.0}});
  std::vector<MinimalPairItem> items;
  // Condition 0: class m 3/3 correct, class f 0/1 correct.
  for (int i = 0; i < 3; ++i) items.push_back(pair_item("m" + std::to_string(i), {"good", "bad"}, 0, {{"k", "0"}, {"g", "m"}}));
  items.push_back(pair_item("f0", {"good", "bad"}, 1, {{"k", "0"}, {"g", "f"}}));
  // Condition 1: one scored item, one declined.
  items.push_back(pair_item("x", {"bad", "good"}, 1, {{"k", "1"}, {"g", "m"}}));
  items.push_back(pair_item("y", {"bad", "nope"}, 1, {{"k", "1"}, {"g", "m"}}));
  // Condition 2: nothing scorable, so omitted.
  items.push_back(pair_item("z", {"nope", "bad"}, 1, {{"k", "2"}}));

  const auto micro = evaluate_suite(scorer_chooser(s), items, "k");
  CHECK(micro.items == 7);
  REQUIRE(micro.conditions.size() == 2);
  CHECK(micro.conditions.at("0").accuracy == doctest::Approx(75.0));
  CHECK(micro.conditions.at("1").skipped == 1);
  CHECK(micro.conditions.at("1").n == 1);

  const auto macro = evaluate_suite(scorer_chooser(s), items, "k", "g");
  CHECK(macro.conditions.at("0").accuracy == doctest::Approx(50.0));
  CHECK(macro.conditions.at("0").by_class.at("f").accuracy == 0.0);
  CHECK(condition_report_json(macro).find("\"by_class\"") != std::string::npos);

  const auto grouped = evaluate_suite(scorer_chooser(s), items, "missing");
  CHECK(grouped.conditions.count("all") == 1);
}

TEST_CASE("sentence completion converts gap sentences to minimal pairs") {
  const auto items = parse_completion_items(read_data("completion_example.tsv"));
  REQUIRE_FALSE(items.empty());
  const auto m = to_minimal_pair(items[0]);
  CHECK(m.frame_prefix == "The cat sat on the ");
  CHECK(m.frame_suffix == " all afternoon.");
  CHECK(m.variants == std::vector<std::string>{"mat", "sky", "idea"});

  std::map<std::string, double> table;
  for (const auto& it : items) {
    for (std::size_t c = 0; c < it.choices.size(); ++c) table[it.choices[c]] = c == it.correct ? 0.0 : -1.0;
  }
  CHECK(sentence_completion(TableScorer(table), items) == 100.0);
  CHECK_THROWS_AS(parse_completion_items("id\tsentence\tchoices\tcorrect_index\nx\tno gap\ta|b\t0\n"), DataError);
}

TEST_CASE("adjective pool filters by lemma frequency and ending") {
  auto e = [](std::string form, std::string lemma, std::uint64_t f) {
    LexiconEntry x;
    x.form = std::move(form);
    x.lemma = std::move(lemma);
    x.pos = "ADJ";
    x.frequency = f;
    return x;
  };
  const auto pool = adjective_pool({e("rote", "rot", 60), e("roten", "rot", 60), e("klein", "klein", 90),
                                    e("teurer", "teuer", 500), e("Groß", "Groß", 100)},
                                   100, {"r"});
  CHECK(pool.lemmas == std::vector<std::string>{"groß", "rot"});
}

TEST_CASE("German gender items: one per nominative noun form and condition") {
  const auto tpl = parse_german_template(read_data("german_template.json"));
  REQUIRE(tpl.gender_articles.size() == 3);
  CHECK(tpl.gender_articles[0] == std::pair<std::string, std::string>{"m", "der"});
  const auto lex = parse_lexicon(read_data("german_lexicon_example.tsv"));
  const auto adjs = adjective_pool(lex, tpl.adjective_min_frequency, tpl.adjective_excluded_endings);
  const auto items = gen_german_gender(tpl, lex, adjs, {0, 1, 3}, 5);
  REQUIRE(items.size() == 9);  // Baum, Frau, Haus
  for (const auto& it : items) {
    CHECK(it.variants.size() == 3);
    const auto n = utf8::length(it.variants[0]);
    for (const auto& v : it.variants) CHECK(utf8::length(v) == n);
    CHECK(it.variants[it.correct].rfind(tpl.gender_articles[it.correct].second + " ", 0) == 0);
    CHECK(it.variants[0].find("Baums") == std::string::npos);
  }
  const auto& k3 = items[6];
  CHECK(k3.condition.at("interveners") == "3");
  CHECK(k3.variants[0].find(" sehr extrem ") != std::string::npos);
  CHECK(gen_german_gender(tpl, lex, adjs, {0, 1, 3}, 5)[4].variants == items[4].variants);
  CHECK_THROWS_AS(gen_german_gender(tpl, lex, adjs, {5}, 5), ConfigError);
}

TEST_CASE("German case items differ only in the determiner") {
  const auto tpl = parse_german_template(read_data("german_template.json"));
  const auto lex = parse_lexicon(read_data("german_lexicon_example.tsv"));
  const auto adjs = adjective_pool(lex, tpl.adjective_min_frequency, tpl.adjective_excluded_endings);
  const auto items = gen_german_case(tpl, lex, adjs, {0, 2}, 9);
  REQUIRE(items.size() == 4);  // Baum, Haus; Frau has no case forms
  for (const auto& it : items) {
    const auto& noun = it.variants[0].substr(it.variants[0].rfind(' ') + 1);
    CHECK(it.variants[1].substr(it.variants[1].rfind(' ') + 1) == noun);
    CHECK(it.variants[0].rfind("dem ", 0) == 0);
    CHECK(it.variants[1].rfind("des ", 0) == 0);
    CHECK(it.condition.at("case") == (it.correct == 0 ? "dative" : "genitive"));
    CHECK(it.condition.at("noun_length") == std::to_string(utf8::length(noun)));
  }
  // The coin is per lemma, so both conditions agree.
  CHECK(items[0].correct == items[2].correct);
  CHECK(items[1].correct == items[3].correct);
}

TEST_CASE("subcategorization items put the preposition in the frame") {
  const auto tpl = parse_german_template(read_data("german_template.json"));
  const std::vector<std::string> frames{"Er spielt ___ Farbe."};
  AdjectivePool adjs{{"rot"}};
  const auto items = gen_subcat_mit(tpl, frames, adjs, {0, 2}, 1);
  REQUIRE(items.size() == 2);
  CHECK(items[0].frame_prefix == "Er spielt mit");
  CHECK(items[0].frame_suffix == "Farbe.");
  CHECK(items[0].variants == std::vector<std::string>{"der rote", "der roten"});
  CHECK(items[0].correct == 1);
  CHECK(items[1].variants[1] == "der sehr extrem roten");
  CHECK(items[1].control_variants == items[1].variants);
  CHECK_THROWS_AS(gen_subcat_mit(tpl, {"no gap"}, adjs, {0}, 1), DataError);
}

TEST_CASE("Italian agreement items skip combinations seen in training") {
  const auto tpl = parse_italian_template(read_data("italian_template.json"));
  auto e = [](std::string form, std::string pos, std::map<std::string, std::string> morph, std::uint64_t f) {
    LexiconEntry x;
    x.form = form;
    x.lemma = form;
    x.pos = std::move(pos);
    x.morph = std::move(morph);
    x.frequency = f;
    return x;
  };
  const std::vector<LexiconEntry> lex{
      e("figlio", "NOUN", {{"gender", "m"}}, 300),    e("figlia", "NOUN", {{"gender", "f"}}, 250),
      e("gatto", "NOUN", {{"gender", "m"}}, 300),     e("gatta", "NOUN", {{"gender", "f"}}, 50),
      e("grande", "ADJ", {}, 900),                    e("forte", "ADJ", {}, 400),
      e("rosso", "ADJ", {{"gender", "m"}, {"number", "sg"}}, 2000),
      e("rossa", "ADJ", {{"gender", "f"}, {"number", "sg"}}, 1500),
      e("rosse", "ADJ", {{"gender", "f"}, {"number", "pl"}}, 600)};
  const auto nouns = gen_italian_agreement(tpl, lex, ItalianKind::noun_gender, U"", 3);
  REQUIRE(nouns.size() == 2);  // gatta is too rare
  CHECK(nouns[0].variants[0].rfind("il ", 0) == 0);
  CHECK(nouns[1].variants[1].rfind("la ", 0) == 0);
  CHECK(nouns[1].variants[1].substr(nouns[1].variants[1].size() - 6) == "figlia");

  // With both adjectives attested before the noun, nothing survives.
  const auto blocked = gen_italian_agreement(tpl, lex, ItalianKind::noun_gender, U"grandefigliofortefiglia", 3);
  CHECK(blocked.empty());
  const auto one_left = gen_italian_agreement(tpl, lex, ItalianKind::noun_gender, U"grandefiglio", 3);
  REQUIRE(one_left.size() == 2);
  CHECK(one_left[0].variants[0].find("forte") != std::string::npos);

  const auto gender = gen_italian_agreement(tpl, lex, ItalianKind::adj_gender, U"", 3);
  REQUIRE(gender.size() == 2);
  CHECK(gender[0].variants[0].rfind("il ", 0) == 0);
  CHECK(gender[0].variants[1].substr(gender[0].variants[1].size() - 5) == "rossa");
  const auto number = gen_italian_agreement(tpl, lex, ItalianKind::adj_number, U"", 3);
  REQUIRE(number.size() == 2);
  CHECK(number[1].variants[0].rfind("le ", 0) == 0);
  CHECK(number[1].correct == 1);
  CHECK_THROWS_AS(parse_italian_kind("verb"), ConfigError);
}

TEST_CASE("n-gram chooser keeps the governing word and the shared tail") {
  // "mit" followed by "der" is frequent; "die" only appears elsewhere.
  const std::u32string train = U"mitderkatzemitderfraudiekatzediekatzediekatze";
  const auto table = count_ngrams(train, 7, 1);
  auto item = pair_item("n", {"die katze", "der katze"}, 1);
  item.frame_prefix = "spielt mit";
  CHECK(ngram_order_for({item}) == 3 + 3 + 4);
  const auto chooser = ngram_chooser(table, 1);
  CHECK(chooser(item, false).chosen == 1);
  item.control_variants = item.variants;
  CHECK(chooser(item, true).chosen == 0);  // without "mit", "die" is more frequent
}
