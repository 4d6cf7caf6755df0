#include "cnlm/ngram.hpp"

#include <algorithm>
#include <functional>
#include <stdexcept>

namespace cnlm {

std::uint64_t NgramTable::count(std::u32string_view gram) const {
  const auto it = counts.find(std::u32string(gram));
  return it == counts.end() ? 0 : it->second;
}

NgramTable count_ngrams(std::u32string_view stream, std::size_t n, std::size_t min_order) {
  if (n == 0) throw std::invalid_argument("n-gram order must be positive");
  if (min_order == 0 || min_order > n) min_order = n;
  NgramTable t;
  t.n = n;
  t.min_order = min_order;
  t.total = stream.size();
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const std::size_t longest = std::min(n, stream.size() - i);
    for (std::size_t k = min_order; k <= longest; ++k) ++t.counts[std::u32string(stream.substr(i, k))];
  }
  return t;
}

std::size_t predict_prefix(const NgramTable& table, const std::vector<std::u32string>& candidates,
                           std::u32string_view continuation, Rng& rng) {
  if (candidates.empty()) throw std::invalid_argument("predict_prefix needs candidates");
  std::vector<std::size_t> best;
  std::uint64_t best_count = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    std::u32string key = candidates[i];
    key += continuation;
    // Longest prefix the table can answer.
    key.resize(std::min(key.size(), table.n));
    const std::uint64_t c = key.size() < table.min_order ? 0 : table.count(key);
    if (best.empty() || c > best_count) {
      best = {i};
      best_count = c;
    } else if (c == best_count) {
      best.push_back(i);
    }
  }
  return best.size() == 1 ? best.front() : best[rng.below(best.size())];
}

std::size_t predict_prefix(const NgramTable& table, const std::vector<std::u32string>& candidates,
                           std::u32string_view continuation, std::uint64_t seed) {
  Rng rng(seed);
  return predict_prefix(table, candidates, continuation, rng);
}

bool is_attested(std::u32string_view stream, std::u32string_view phrase) {
  if (phrase.empty()) return true;
  return std::search(stream.begin(), stream.end(),
                     std::boyer_moore_horspool_searcher(phrase.begin(), phrase.end())) != stream.end();
}

bool is_attested(const NgramTable& table, std::u32string_view phrase) {
  if (phrase.empty()) return true;
  if (phrase.size() < table.min_order || phrase.size() > table.n) {
    throw std::invalid_argument("phrase length is not a stored n-gram order");
  }
  return table.count(phrase) > 0;
}

}  // namespace cnlm
