#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cnlm/corpus.hpp"
#include "cnlm/lm.hpp"
#include "cnlm/ngram.hpp"

namespace cnlm {

// Variants and frames are human-readable; whitespace is removed at scoring.
struct MinimalPairItem {
  std::string id;
  std::string phenomenon;
  std::map<std::string, std::string> condition;
  std::string frame_prefix;
  std::string frame_suffix;
  std::vector<std::string> variants;
  std::size_t correct = 0;
  std::vector<std::string> control_variants;  // scored without frame_prefix
};

std::vector<MinimalPairItem> parse_items(std::string_view tsv);
std::string format_items(const std::vector<MinimalPairItem>& items);

// Log-likelihood (nats) of prefix + variant + suffix; nullopt when the
// scorer declines the item (e.g. an out-of-vocabulary variant in subset mode).
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual std::optional<double> log_likelihood(const std::string& prefix, const std::string& variant,
                                               const std::string& suffix) const = 0;
};

// Scores "." + text + "." with a character model (the leading stop is context).
class CharLMScorer : public Scorer {
 public:
  explicit CharLMScorer(const Checkpoint& ckpt) : ckpt_(ckpt) {}
  std::optional<double> log_likelihood(const std::string& prefix, const std::string& variant,
                                       const std::string& suffix) const override;

 private:
  const Checkpoint& ckpt_;
};

// Word-level scoring; with subset mode, variants containing an
// out-of-vocabulary token are declined (frames are not filtered).
class WordLMScorer : public Scorer {
 public:
  WordLMScorer(const Checkpoint& ckpt, bool subset) : ckpt_(ckpt), subset_(subset) {}
  std::optional<double> log_likelihood(const std::string& prefix, const std::string& variant,
                                       const std::string& suffix) const override;

 private:
  const Checkpoint& ckpt_;
  bool subset_;
};

// Joins the parts and appends a full stop unless the text already ends in one.
std::string delimited(const std::string& prefix, const std::string& variant, const std::string& suffix);

struct ItemOutcome {
  bool scored = false;
  std::size_t chosen = 0;
  bool tie = false;
  std::vector<double> scores;
};

// Argmax over variants; ties go to the first index (with a warning) unless
// a tie seed is given, in which case they are broken uniformly at random.
ItemOutcome score_item(const Scorer& scorer, const MinimalPairItem& item, bool control = false,
                       std::optional<std::uint64_t> tie_seed = std::nullopt);

using Chooser = std::function<ItemOutcome(const MinimalPairItem&, bool control)>;
Chooser scorer_chooser(const Scorer& scorer, std::optional<std::uint64_t> tie_seed = std::nullopt);

// Baseline: the variants' shared tail is the continuation and their heads
// are the candidates (see predict_prefix). Of the frame only the word right
// before the variants (the governing word) is kept, and only outside control.
Chooser ngram_chooser(const NgramTable& table, std::uint64_t seed);
// Order covering the longest candidate head plus four characters.
std::size_t ngram_order_for(const std::vector<MinimalPairItem>& items);

struct ConditionStats {
  std::size_t n = 0;
  std::size_t correct = 0;
  std::size_t ties = 0;
  std::size_t skipped = 0;
  double accuracy = 0;  // percent; macro average over classes when grouped
  std::map<std::string, ConditionStats> by_class;
};

struct ConditionReport {
  std::map<std::string, ConditionStats> conditions;
  std::size_t items = 0;
};

// Accuracy per value of condition[group_key]; with macro_key, the reported
// accuracy is the unweighted mean over the values of condition[macro_key].
ConditionReport evaluate_suite(const Chooser& choose, const std::vector<MinimalPairItem>& items,
                               const std::string& group_key = "interveners",
                               const std::string& macro_key = "", bool control = false);
std::string condition_report_json(const ConditionReport& r);

struct CompletionItem {
  std::string id;
  std::string sentence;  // contains the gap marker
  std::vector<std::string> choices;
  std::size_t correct = 0;
};
inline constexpr std::string_view kGap = "___";

std::vector<CompletionItem> parse_completion_items(std::string_view tsv);
MinimalPairItem to_minimal_pair(const CompletionItem& item);
// Percent of items whose correct filler gets the highest likelihood.
double sentence_completion(const Scorer& scorer, const std::vector<CompletionItem>& items);

// ---- stimulus generation (word lists and templates are data) ----

struct AdjectivePool {
  std::vector<std::string> lemmas;
};

// Adjective lemmas with frequency >= min_frequency, excluding those ending
// in any of `excluded_endings`, sorted.
AdjectivePool adjective_pool(const std::vector<LexiconEntry>& lexicon, std::uint64_t min_frequency,
                             const std::vector<std::string>& excluded_endings, const std::string& pos = "ADJ");

struct GermanTemplate {
  // Ordered (key, word) lists; variant order follows them.
  std::vector<std::pair<std::string, std::string>> gender_articles;   // m/f/n -> article
  std::vector<std::pair<std::string, std::string>> case_determiners;  // dative/genitive -> determiner
  std::vector<std::string> adverbs;                      // intervener ladder
  std::string nominative_suffix = "e";                   // adjective after a definite article
  std::string oblique_suffix = "en";
  std::string preposition = "mit";
  std::string preposition_article = "der";
  std::uint64_t adjective_min_frequency = 100;
  std::vector<std::string> adjective_excluded_endings{"r"};
};
GermanTemplate parse_german_template(std::string_view json);

// One item per noun form and condition (number of interveners: 0 = article
// + noun, 1 = + adjective, k > 1 = + k-1 adverbs before the adjective).
// Forms whose `case` feature (a comma list) excludes nominative are skipped.
std::vector<MinimalPairItem> gen_german_gender(const GermanTemplate& tpl, const std::vector<LexiconEntry>& nouns,
                                               const AdjectivePool& adjectives, const std::vector<int>& conditions,
                                               std::uint64_t seed);
// Noun forms are grouped by lemma through their `case` feature (a comma
// list); lemmas need distinct dative and genitive forms. Per lemma a seeded
// coin picks the case; the two variants differ only in the determiner.
std::vector<MinimalPairItem> gen_german_case(const GermanTemplate& tpl, const std::vector<LexiconEntry>& nouns,
                                             const AdjectivePool& adjectives, const std::vector<int>& conditions,
                                             std::uint64_t seed);
// Frames contain the gap marker where "<preposition> <article> <adverbs>
// <adjective>" is inserted; conditions count adverbs.
std::vector<MinimalPairItem> gen_subcat_mit(const GermanTemplate& tpl, const std::vector<std::string>& frames,
                                            const AdjectivePool& adjectives, const std::vector<int>& conditions,
                                            std::uint64_t seed);

enum class ItalianKind { noun_gender, adj_gender, adj_number };
ItalianKind parse_italian_kind(std::string_view name);

struct ItalianTemplate {
  std::map<std::string, std::string> articles;  // m, f, f.pl
  std::vector<std::string> adverbs;
  std::string masculine_ending = "o";
  std::string feminine_ending = "a";
  std::string feminine_plural_ending = "e";
  std::string invariant_adjective_ending = "e";
  std::uint64_t noun_min_frequency = 100;
  std::uint64_t noun_frequent = 500;  // both forms this frequent: no balance check
  double max_frequency_ratio = 2.0;
  std::uint64_t adjective_min_frequency = 100;
  std::uint64_t adj_gender_min_frequency = 1000;
  std::uint64_t adj_number_min_frequency = 500;
};
ItalianTemplate parse_italian_template(std::string_view json);

// Attested combinations (adjective+noun, adverb+adjective) in the training
// stream are excluded when `training` is non-empty.
std::vector<MinimalPairItem> gen_italian_agreement(const ItalianTemplate& tpl, const std::vector<LexiconEntry>& lexicon,
                                                   ItalianKind kind, std::u32string_view training,
                                                   std::uint64_t seed);

}  // namespace cnlm
