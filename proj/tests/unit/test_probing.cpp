#include <doctest.h>

#include <random>
#include <set>

#include "cnlm/error.hpp"
#include "cnlm/probing.hpp"
#include "oracles.hpp"

using namespace cnlm;

namespace {

ProbeExample ex(std::vector<double> x, int label, std::string form = "") {
  ProbeExample e;
  e.repr = std::move(x);
  e.label = label;
  e.form = std::move(form);
  return e;
}

// Two Gaussian blobs separated along the first axis.
std::vector<ProbeExample> blobs(std::size_t per_class, double gap, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> n(0, 1);
  std::vector<ProbeExample> out;
  for (int label : {0, 1}) {
    for (std::size_t i = 0; i < per_class; ++i) {
      out.push_back(ex({n(g) + (label ? gap : -gap), n(g), n(g)}, label, std::to_string(label) + "_" + std::to_string(i)));
    }
  }
  return out;
}

LexiconEntry entry(std::string form, std::string pos, std::string morph = "_") {
  LexiconEntry e;
  e.form = std::move(form);
  e.lemma = e.form;
  e.pos = std::move(pos);
  if (morph != "_") {
    std::size_t start = 0;
    while (start < morph.size()) {
      auto end = morph.find(';', start);
      if (end == std::string::npos) end = morph.size();
      const auto kv = morph.substr(start, end - start);
      e.morph[kv.substr(0, kv.find('='))] = kv.substr(kv.find('=') + 1);
      start = end + 1;
    }
  }
  e.frequency = 1;
  return e;
}

std::vector<double> len_repr(const std::string& s) { return {static_cast<double>(s.size()), 1.0}; }

}  // namespace

TEST_CASE("logistic regression separates separable data") {
  const auto data = blobs(30, 4.0, 3);
  const auto m = train_logistic(data);
  CHECK(accuracy(m, data) == doctest::Approx(100.0));
  CHECK(m.probability({10, 0, 0}) > 0.99);
  CHECK(m.probability({-10, 0, 0}) < 0.01);
  CHECK(m.iterations > 0);
}

TEST_CASE("logistic regression rejects a single class and bad labels") {
  CHECK_THROWS_AS(train_logistic({ex({1}, 1), ex({2}, 1)}), DataError);
  CHECK_THROWS_AS(train_logistic({ex({1}, 0), ex({2}, 2)}), DataError);
  CHECK_THROWS_AS(train_logistic({ex({1}, 0), ex({2, 3}, 1)}), DataError);
  CHECK_THROWS_AS(train_logistic({}), DataError);
}

TEST_CASE("summarize matches the extended-precision oracle") {
  std::mt19937_64 g(11);
  std::uniform_real_distribution<double> u(40, 100);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(2 + trial);
    for (auto& v : x) v = u(g);
    const auto r = summarize(x);
    const auto [m, se] = oracle::mean_se(x);
    CHECK(r.mean_accuracy == doctest::Approx(m).epsilon(1e-12));
    CHECK(r.std_error == doctest::Approx(se).epsilon(1e-10));
    CHECK(r.n_splits == x.size());
  }
  CHECK(summarize({70.0}).std_error == 0.0);
}

TEST_CASE("run_probe is deterministic and near perfect on separated classes") {
  const auto pool = blobs(25, 3.0, 5);
  ProbeOptions o;
  o.n_splits = 20;
  o.seed = 9;
  const auto a = run_probe(pool, o);
  const auto b = run_probe(pool, o);
  CHECK(a.accuracies == b.accuracies);
  CHECK(a.mean_accuracy > 95.0);

  // Unrelated labels stay near chance.
  auto shuffled = pool;
  std::mt19937_64 g(2);
  for (auto& e : shuffled) e.repr = {std::normal_distribution<double>(0, 1)(g)};
  o.n_splits = 100;
  CHECK(std::abs(run_probe(shuffled, o).mean_accuracy - 50.0) < 10.0);

  ProbeOptions tight;
  tight.n_train_per_class = 25;
  CHECK_THROWS_AS(run_probe(pool, tight), DataError);
  tight.n_train_per_class = 26;
  CHECK_THROWS_AS(run_probe(pool, tight), DataError);
}

TEST_CASE("OOV policies: coin flips for missing items or drop them") {
  auto pool = blobs(20, 4.0, 7);
  for (std::size_t i = 0; i < pool.size(); i += 4) pool[i].repr.clear();  // 10 missing
  ProbeOptions o;
  o.n_train_per_class = 5;
  o.n_splits = 50;
  const auto subset = oov_policy_eval(pool, o, OovMode::subset);
  CHECK(subset.mean_accuracy > 95.0);
  CHECK(subset.excluded_rate == doctest::Approx(10.0 / 30.0));
  const auto guess = oov_policy_eval(pool, o, OovMode::random_guess);
  CHECK(guess.mean_accuracy < subset.mean_accuracy);
  CHECK(guess.mean_accuracy > 70.0);
  CHECK(guess.excluded_rate == 0.0);
  CHECK(parse_oov_mode("subset") == OovMode::subset);
  CHECK_THROWS_AS(parse_oov_mode("drop"), ConfigError);
}

TEST_CASE("word-class dataset keeps unambiguous suffix-bearing forms, balanced") {
  const std::vector<LexiconEntry> lex{
      entry("Garten", "NOUN"), entry("Wagen", "NOUN"), entry("Leben", "NOUN"), entry("en", "NOUN"),
      entry("zeigen", "VERB"), entry("sagen", "VERB"), entry("leben", "VERB"), entry("gehen", "VERB"),
      entry("Zeitung", "NOUN")};
  WordClassSpec spec;
  spec.suffix = "-en";
  const auto d = build_word_class_dataset(lex, len_repr, spec);
  REQUIRE(d.size() == 4);
  std::set<std::string> nouns;
  for (const auto& e : d) {
    CHECK(e.form != "leben");
    CHECK(e.meta.at("suffix") == "en");
    CHECK(e.repr == len_repr(e.form));
    if (e.label == 1) nouns.insert(e.form);
  }
  CHECK(nouns == std::set<std::string>{"garten", "wagen"});

  spec.n_per_class = 3;
  try {
    build_word_class_dataset(lex, len_repr, spec);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("2 NOUN and 3 VERB") != std::string::npos);
  }
}

TEST_CASE("plural classes group umlaut with a suffix under the suffix") {
  CHECK(plural_class(entry("Bäume", "NOUN", "number=pl;plural=umlaut+e")) == "e");
  CHECK(plural_class(entry("Mütter", "NOUN", "number=pl;plural=umlaut")) == "umlaut");
  CHECK(plural_class(entry("Autos", "NOUN", "number=pl;plural=-s")) == "s");
}

TEST_CASE("number dataset routes plural classes to train and test") {
  const std::vector<LexiconEntry> lex{
      entry("Auto", "NOUN", "number=sg;plural=s"),    entry("Autos", "NOUN", "number=pl;plural=s"),
      entry("Frau", "NOUN", "number=sg;plural=n"),    entry("Frauen", "NOUN", "number=pl;plural=n"),
      entry("Tag", "NOUN", "number=sg;plural=e"),     entry("Tage", "NOUN", "number=pl;plural=e"),
      entry("Kind", "NOUN", "number=sg;plural=r"),    entry("Kinder", "NOUN", "number=pl;plural=r"),
      entry("Mutter", "NOUN", "number=sg;plural=umlaut"), entry("Mütter", "NOUN", "number=pl;plural=umlaut"),
      entry("Baum", "NOUN", "number=sg;plural=umlaut+e"), entry("Bäume", "NOUN", "number=pl;plural=umlaut+e")};
  const auto d = build_number_dataset(lex, len_repr);
  CHECK(d.train.at("e").size() == 4);
  CHECK(d.train.at("s").size() == 2);
  CHECK(d.test.at("r").size() == 2);
  CHECK(d.test.at("umlaut").size() == 2);
  CHECK(d.test.at("r")[1].label == 1);
  CHECK_THROWS_AS(build_number_dataset(lex, len_repr, {"n", "s", "e", "er"}), DataError);
}

TEST_CASE("length-matched samples share the key multiset") {
  std::mt19937_64 g(4);
  std::vector<ProbeExample> a, b;
  const std::string letters = "abcdefe";
  for (int i = 0; i < 60; ++i) {
    std::string fa(3 + g() % 5, 'x'), fb(3 + g() % 7, 'y');
    fa.back() = letters[g() % letters.size()];
    fb.back() = letters[g() % letters.size()];
    a.push_back(ex({0}, 0, fa));
    b.push_back(ex({0}, 1, fb));
  }
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto [sa, sb] = length_matched_sample(a, b, 20, seed);
    REQUIRE(sa.size() == 20);
    std::multiset<std::pair<std::size_t, bool>> ka, kb;
    for (const auto& e : sa) ka.insert({e.form.size(), e.form.back() == 'e'});
    for (const auto& e : sb) kb.insert({e.form.size(), e.form.back() == 'e'});
    CHECK(ka == kb);
  }
  CHECK_THROWS_AS(length_matched_sample(a, b, 61, 1), DataError);
}

TEST_CASE("average-linkage clustering matches the brute-force oracle") {
  std::mt19937_64 g(8);
  std::normal_distribution<double> n(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = 3 + trial % 8;
    std::vector<std::vector<double>> v(k, std::vector<double>(4));
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < k; ++i) {
      for (auto& x : v[i]) x = n(g);
      labels.push_back("w" + std::to_string(i));
      CHECK(cosine_distance(v[i], v[0]) == doctest::Approx(oracle::cosine_distance(v[i], v[0])));
    }
    const auto d = cluster_embeddings(labels, v);
    const auto heights = oracle::average_linkage_heights(v);
    REQUIRE(d.merges.size() == k - 1);
    for (std::size_t m = 0; m < heights.size(); ++m) CHECK(d.merges[m].distance == doctest::Approx(heights[m]));
    CHECK(d.merges.back().size == k);
  }
}

TEST_CASE("dendrogram renders as Newick") {
  const auto d = cluster_embeddings({"a", "b", "c"}, {{1, 0}, {1, 0.01}, {0, 1}});
  CHECK(d.newick().rfind("((a,b):", 0) == 0);
  CHECK(d.newick().back() == ';');
  CHECK(cosine_distance({0, 0}, {1, 0}) == 1.0);
}

TEST_CASE("probe pools round-trip without representations") {
  std::vector<ProbeExample> pool{ex({1}, 1, "haus"), ex({2}, 0, "gehen")};
  pool[0].meta = {{"class", "NOUN"}, {"length", "4"}};
  const auto back = parse_pool(format_pool(pool));
  REQUIRE(back.size() == 2);
  CHECK(back[0].form == "haus");
  CHECK(back[0].meta == pool[0].meta);
  CHECK(back[1].label == 0);
  CHECK(back[1].meta.empty());
  CHECK_THROWS_AS(parse_pool("form\tlabel\tmeta\nx\t2\t_\n"), DataError);
}
