#include <doctest.h>

#include <map>

#include "cnlm/ngram.hpp"
#include "oracles.hpp"

using namespace cnlm;

namespace {

std::u32string random_text(Rng& rng, std::size_t len, char32_t alphabet) {
  std::u32string s(len, U'a');
  for (auto& c : s) c = U'a' + static_cast<char32_t>(rng.below(alphabet));
  return s;
}

}  // namespace

TEST_CASE("default order counts only n-grams of length n") {
  const auto t = count_ngrams(U"aaa", 2);
  CHECK(t.counts.size() == 1);
  CHECK(t.count(U"aa") == 2);
  CHECK(t.count(U"a") == 0);
  CHECK(t.total == 3);
}

TEST_CASE("counts match a brute-force recount on random instances") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const auto text = random_text(rng, 1 + rng.below(40), 1 + static_cast<char32_t>(rng.below(4)));
    const std::size_t n = 1 + rng.below(5);
    const std::size_t lo = 1 + rng.below(n);
    const auto table = count_ngrams(text, n, lo);
    const auto expect = oracle::ngrams(text, lo, n);
    REQUIRE(table.counts.size() == expect.size());
    for (const auto& [gram, c] : expect) CHECK(table.count(gram) == c);
  }
}

TEST_CASE("predict_prefix picks the most frequent continuation prefix") {
  const auto t = count_ngrams(U"derbaumderbaumdasbaum", 4, 1);
  // Keys are cut to four characters: "derb" (2) beats "dasb" (1) and "dieb" (0).
  CHECK(predict_prefix(t, {U"die", U"das", U"der"}, U"baum", 1) == 2);
}

TEST_CASE("predict_prefix breaks ties uniformly at random") {
  const auto t = count_ngrams(U"abcabc", 2, 1);
  std::map<std::size_t, int> seen;
  Rng rng(4);
  for (int i = 0; i < 3000; ++i) ++seen[predict_prefix(t, {U"x", U"y", U"z"}, U"", rng)];
  REQUIRE(seen.size() == 3);
  for (const auto& [k, n] : seen) CHECK(n == doctest::Approx(1000).epsilon(0.1));
  CHECK(predict_prefix(t, {U"x", U"y"}, U"", 9) == predict_prefix(t, {U"x", U"y"}, U"", 9));
}

TEST_CASE("attestation by substring search and by table") {
  CHECK(is_attested(U"ilmenoalieno", U"menoal"));
  CHECK_FALSE(is_attested(U"ilmenoalieno", U"menoali e"));
  CHECK(is_attested(U"abc", U""));
  const auto t = count_ngrams(U"abcab", 3, 2);
  CHECK(is_attested(t, U"ab"));
  CHECK_FALSE(is_attested(t, U"ac"));
  CHECK_THROWS(is_attested(t, U"abca"));
}
