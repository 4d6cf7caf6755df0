#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cnlm/corpus.hpp"
#include "cnlm/lm.hpp"
#include "cnlm/probing.hpp"

namespace cnlm {

struct UnitScore {
  std::size_t layer = 0;
  std::size_t unit = 0;
  std::size_t flat = 0;  // column in the concatenated layers: layer * hidden + unit
  double pearson_r = 0;
};

// Pearson correlation; 0 when either variable has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

// Correlates every column of `activations` ([n x layers*hidden]) with the
// labels. Sorted by r descending (by |r| when by_magnitude), ties by index.
std::vector<UnitScore> scan_units(std::span<const double> activations, std::size_t layers,
                                  std::size_t hidden, const std::vector<bool>& labels,
                                  bool by_magnitude = false);
std::vector<UnitScore> scan_units(const Checkpoint& ckpt, const std::vector<PositionSample>& samples,
                                  bool by_magnitude = false);

enum class Objective { accuracy, f1 };
Objective parse_objective(std::string_view name);

struct Threshold {
  double threshold = 0;
  int direction = 1;  // +1: boundary iff activation > threshold; -1: iff activation < threshold
  double objective = 0;
  bool predict(double a) const { return direction > 0 ? a > threshold : a < threshold; }
};

// Candidates are the midpoints between sorted distinct activations plus one
// value beyond each extreme; the best objective wins, ties by lowest threshold.
Threshold fit_threshold(std::span<const double> activations, const std::vector<bool>& labels,
                        Objective objective = Objective::accuracy, int direction = 1);

struct Counts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};
Counts confusion(const std::vector<bool>& predicted, const std::vector<bool>& gold);
double f1_score(const Counts& c);  // percent; 0 when there are no positives at all

struct SegReport {
  Counts counts;
  double precision = 0, recall = 0, f1 = 0;  // percents
  std::vector<std::pair<std::string, std::size_t>> oversegmentations;   // piece, distinct words
  std::vector<std::pair<std::string, std::size_t>> undersegmentations;  // merged tokens, count
};

SegReport seg_report(const std::vector<bool>& predicted, const std::vector<bool>& gold);

// Error lists for boundary predictions over a corpus stream.
// Oversegmentation: a piece of >= 3 characters split off inside a gold token,
// ranked by the number of distinct gold words it was split from.
// Undersegmentation: maximal runs of gold tokens with no predicted boundary
// between them (space-joined), ranked by frequency.
// `predicted` covers stream positions [first, first + predicted.size());
// only gold tokens inside that range are considered.
void segmentation_errors(const std::vector<bool>& predicted, const AlignedCorpus& corpus, std::size_t k,
                         SegReport& report, std::size_t first = 0);

enum class ClassifierMode { single_unit, full_layer };
ClassifierMode parse_classifier_mode(std::string_view name);

struct BoundaryOptions {
  ClassifierMode mode = ClassifierMode::single_unit;
  std::optional<std::size_t> unit;  // flat index; required for single_unit
  int direction = 1;                 // sign of the unit's correlation with boundaries
  double l2 = 1e-3;
  std::size_t top_k = 20;
};

// Positions [0, train_chars) of the corpus stream train the classifier,
// [train_chars, train_chars + test_chars) (0: to the end) are tested.
// State is carried across the whole stream from a zero initial state.
SegReport eval_running_text(const Checkpoint& ckpt, const AlignedCorpus& corpus, std::size_t train_chars,
                            std::size_t test_chars, const BoundaryOptions& options);

// Left-pads each sample window to `window` characters with full stops.
std::vector<std::vector<int>> sample_windows(const Vocabulary& vocab,
                                             const std::vector<PositionSample>& samples,
                                             std::size_t window = 40);

// Accuracy (percent) of a classifier trained on `train` and applied to `test`.
double eval_balanced(const Checkpoint& ckpt, const std::vector<PositionSample>& train,
                     const std::vector<PositionSample>& test, const BoundaryOptions& options,
                     std::size_t window = 40);
double eval_balanced(std::span<const double> train_acts, const std::vector<bool>& train_labels,
                     std::span<const double> test_acts, const std::vector<bool>& test_labels,
                     std::size_t width, const BoundaryOptions& options);

struct ProfileRow {
  std::size_t position = 0;
  std::string ch;
  double activation = 0;
  bool gold_boundary = false;
};

// Unit activation along a snippet (raw text, tokenized for gold marks),
// after a full-stop left context.
std::vector<ProfileRow> plot_activation_profile(const Checkpoint& ckpt, std::string_view snippet,
                                                std::size_t flat_unit);
std::string format_profile(const std::vector<ProfileRow>& rows);
std::string seg_report_json(const SegReport& r);

}  // namespace cnlm
