#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cnlm/corpus.hpp"

namespace cnlm {

struct ProbeExample {
  std::vector<double> repr;  // empty: no representation (out of vocabulary)
  int label = 0;             // 0 or 1
  std::string form;
  std::map<std::string, std::string> meta;
};

struct LogisticModel {
  std::vector<double> weights;
  double bias = 0;
  std::size_t iterations = 0;

  double margin(const std::vector<double>& x) const;
  double probability(const std::vector<double>& x) const;
  int predict(const std::vector<double>& x) const { return margin(x) > 0 ? 1 : 0; }
};

// L2-regularized logistic regression (bias unpenalized), full-batch gradient
// descent with step 1/L from zero weights, until the loss changes by less
// than `tolerance`. Throws DataError on a single-class training set.
LogisticModel train_logistic(const std::vector<ProbeExample>& train, double l2 = 1e-3,
                             std::size_t max_iterations = 20000, double tolerance = 1e-6);

double accuracy(const LogisticModel& model, const std::vector<ProbeExample>& test);

struct ProbeResult {
  double mean_accuracy = 0;  // percent
  double std_error = 0;      // percent
  std::size_t n_splits = 0;
  std::vector<double> accuracies;
  double excluded_rate = 0;  // OOV share of test items dropped in subset mode
};

// Mean and standard error (sample standard deviation / sqrt(n)).
ProbeResult summarize(std::vector<double> accuracies);

struct ProbeOptions {
  std::size_t n_train_per_class = 10;
  std::size_t n_splits = 100;
  std::uint64_t seed = 1;
  double l2 = 1e-3;
};

// Per split: n_train_per_class random items of each label train the probe;
// it is tested on the rest of the pool, or on `test` when given.
ProbeResult run_probe(const std::vector<ProbeExample>& pool, const ProbeOptions& options,
                      const std::vector<ProbeExample>& test = {});

enum class OovMode { random_guess, subset };
OovMode parse_oov_mode(std::string_view name);

// As run_probe, for representations that may be missing (empty repr).
// Training draws only items with a representation. random_guess: missing
// test items are classified by a seeded fair coin; subset: they are dropped
// and the dropped share is reported.
ProbeResult oov_policy_eval(const std::vector<ProbeExample>& pool, const ProbeOptions& options,
                            OovMode mode);

using ReprFn = std::function<std::vector<double>(const std::string& form)>;

struct WordClassSpec {
  std::string suffix;
  std::string pos_a = "NOUN";  // label 1
  std::string pos_b = "VERB";  // label 0
  std::size_t n_per_class = 0;  // 0: all available, balanced to the smaller class
  std::uint64_t seed = 1;
};

// Unambiguous forms (a single POS in the lexicon) of the two classes ending
// in the suffix, balanced. Throws DataError with the counts on shortfall.
std::vector<ProbeExample> build_word_class_dataset(const std::vector<LexiconEntry>& lexicon,
                                                   const ReprFn& repr, const WordClassSpec& spec);

// Plural class of a lexicon entry from its `plural` feature; umlaut combined
// with a suffix ("umlaut+e") is grouped with the suffix.
std::string plural_class(const LexiconEntry& e);

struct NumberDataset {
  std::map<std::string, std::vector<ProbeExample>> train;  // per class; label 1 = plural
  std::map<std::string, std::vector<ProbeExample>> test;
};

NumberDataset build_number_dataset(const std::vector<LexiconEntry>& lexicon, const ReprFn& repr,
                                   const std::vector<std::string>& train_classes = {"n", "s", "e"},
                                   const std::vector<std::string>& test_classes = {"r", "umlaut"});

// Per split and training class, a length-matched sample of n singulars and
// n plurals; accuracy on each test class.
std::map<std::string, ProbeResult> run_number_probe(const NumberDataset& data, std::size_t n_per_class,
                                                    const ProbeOptions& options);

// n items from each pool drawn from one distribution over (length, final -e):
// the two samples have identical key multisets. Throws DataError when the
// pools share fewer than n matchable items.
std::pair<std::vector<ProbeExample>, std::vector<ProbeExample>> length_matched_sample(
    const std::vector<ProbeExample>& a, const std::vector<ProbeExample>& b, std::size_t n,
    std::uint64_t seed);

struct Merge {
  std::size_t left = 0;   // node ids: leaves 0..n-1, merge i creates node n+i
  std::size_t right = 0;
  double distance = 0;
  std::size_t size = 0;
};

struct Dendrogram {
  std::vector<std::string> labels;
  std::vector<Merge> merges;
  std::string newick() const;
};

double cosine_distance(const std::vector<double>& a, const std::vector<double>& b);

// Average-linkage agglomerative clustering under cosine distance. Equal
// distances are resolved by the smallest leaf labels of the two clusters.
Dendrogram cluster_embeddings(const std::vector<std::string>& labels,
                              const std::vector<std::vector<double>>& vectors);

std::string format_pool(const std::vector<ProbeExample>& pool);
std::vector<ProbeExample> parse_pool(std::string_view tsv);
std::string probe_result_json(const ProbeResult& r, const std::map<std::string, std::string>& config);

}  // namespace cnlm
