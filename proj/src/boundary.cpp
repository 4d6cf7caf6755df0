#include "cnlm/boundary.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <json.hpp>

#include "cnlm/error.hpp"
#include "cnlm/io.hpp"
#include "cnlm/utf8.hpp"

namespace cnlm {
namespace {

void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw DataError(std::string(what) + ": " + std::to_string(a) + " vs " + std::to_string(b) + " items");
}

double objective_value(const Counts& c, Objective objective) {
  if (objective == Objective::f1) return f1_score(c);
  const double n = static_cast<double>(c.tp + c.fp + c.fn + c.tn);
  return n == 0 ? 0.0 : 100.0 * static_cast<double>(c.tp + c.tn) / n;
}

std::vector<ProbeExample> as_examples(std::span<const double> acts, const std::vector<bool>& labels,
                                      std::size_t width) {
  std::vector<ProbeExample> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out[i].repr.assign(acts.begin() + static_cast<std::ptrdiff_t>(i * width),
                       acts.begin() + static_cast<std::ptrdiff_t>((i + 1) * width));
    out[i].label = labels[i] ? 1 : 0;
  }
  return out;
}

std::vector<double> column(std::span<const double> acts, std::size_t width, std::size_t col) {
  std::vector<double> out(acts.size() / width);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = acts[i * width + col];
  return out;
}

std::size_t single_unit(const BoundaryOptions& options, std::size_t width) {
  if (!options.unit) throw ConfigError("single-unit classifier requires a unit index");
  if (*options.unit >= width) {
    throw ConfigError("unit " + std::to_string(*options.unit) + " out of range (" + std::to_string(width) + " units)");
  }
  return *options.unit;
}

template <typename Map>
std::vector<std::pair<std::string, std::size_t>> top_k(const Map& counts, std::size_t k) {
  std::vector<std::pair<std::string, std::size_t>> out(counts.begin(), counts.end());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (out.size() > k) out.resize(k);
  return out;
}

}  // namespace

double pearson(std::span<const double> x, std::span<const double> y) {
  require_same_size(x.size(), y.size(), "pearson");
  if (x.empty()) return 0.0;
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<UnitScore> scan_units(std::span<const double> activations, std::size_t layers,
                                  std::size_t hidden, const std::vector<bool>& labels, bool by_magnitude) {
  const std::size_t width = layers * hidden;
  require_same_size(activations.size(), labels.size() * width, "scan_units activations");
  std::vector<double> y(labels.begin(), labels.end());
  std::vector<UnitScore> out(width);
#pragma omp parallel for schedule(static)
  for (long u = 0; u < static_cast<long>(width); ++u) {
    const auto f = static_cast<std::size_t>(u);
    out[f] = {f / hidden, f % hidden, f, pearson(column(activations, width, f), y)};
  }
  std::stable_sort(out.begin(), out.end(), [by_magnitude](const UnitScore& a, const UnitScore& b) {
    return by_magnitude ? std::abs(a.pearson_r) > std::abs(b.pearson_r) : a.pearson_r > b.pearson_r;
  });
  return out;
}

std::vector<UnitScore> scan_units(const Checkpoint& ckpt, const std::vector<PositionSample>& samples,
                                  bool by_magnitude) {
  const auto acts = final_states(ckpt, sample_windows(ckpt.vocab, samples));
  std::vector<bool> labels;
  for (const auto& s : samples) labels.push_back(s.label);
  return scan_units(acts, ckpt.config.layers, ckpt.config.hidden_size, labels, by_magnitude);
}

Objective parse_objective(std::string_view name) {
  if (name == "accuracy") return Objective::accuracy;
  if (name == "f1") return Objective::f1;
  throw ConfigError("unknown objective '" + std::string(name) + "'");
}

Threshold fit_threshold(std::span<const double> activations, const std::vector<bool>& labels,
                        Objective objective, int direction) {
  require_same_size(activations.size(), labels.size(), "fit_threshold");
  if (activations.empty()) throw DataError("fit_threshold needs at least one activation");
  if (direction != 1 && direction != -1) throw ConfigError("direction must be +1 or -1");
  std::vector<std::size_t> order(activations.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return activations[a] < activations[b]; });
  std::size_t positives = 0;
  for (bool l : labels) positives += l;
  const std::size_t n = labels.size();

  // Sweep candidates in ascending order, tracking the labels of the items
  // below the current candidate.
  auto counts_for = [&](std::size_t below_pos, std::size_t below_neg) {
    Counts c;
    const std::size_t above_pos = positives - below_pos, above_neg = (n - positives) - below_neg;
    if (direction > 0) {
      c = {above_pos, above_neg, below_pos, below_neg};
    } else {
      c = {below_pos, below_neg, above_pos, above_neg};
    }
    return c;
  };
  const double lo = activations[order.front()];
  const double hi = activations[order.back()];
  Threshold best{lo - 1.0, direction, objective_value(counts_for(0, 0), objective)};
  std::size_t below_pos = 0, below_neg = 0;
  for (std::size_t i = 0; i < n;) {
    const double v = activations[order[i]];
    while (i < n && activations[order[i]] == v) {
      (labels[order[i]] ? below_pos : below_neg)++;
      ++i;
    }
    const double t = i < n ? v + (activations[order[i]] - v) / 2 : hi + 1.0;
    const double obj = objective_value(counts_for(below_pos, below_neg), objective);
    if (obj > best.objective) best = {t, direction, obj};
  }
  return best;
}

Counts confusion(const std::vector<bool>& predicted, const std::vector<bool>& gold) {
  require_same_size(predicted.size(), gold.size(), "confusion");
  Counts c;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (predicted[i] && gold[i]) ++c.tp;
    else if (predicted[i]) ++c.fp;
    else if (gold[i]) ++c.fn;
    else ++c.tn;
  }
  return c;
}

double f1_score(const Counts& c) {
  const std::size_t denom = 2 * c.tp + c.fp + c.fn;
  return denom == 0 ? 0.0 : 100.0 * static_cast<double>(2 * c.tp) / static_cast<double>(denom);
}

SegReport seg_report(const std::vector<bool>& predicted, const std::vector<bool>& gold) {
  SegReport r;
  r.counts = confusion(predicted, gold);
  const auto& c = r.counts;
  r.precision = c.tp + c.fp == 0 ? 0.0 : 100.0 * static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  r.recall = c.tp + c.fn == 0 ? 0.0 : 100.0 * static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  r.f1 = f1_score(c);
  return r;
}

void segmentation_errors(const std::vector<bool>& predicted, const AlignedCorpus& corpus, std::size_t k,
                         SegReport& report, std::size_t first) {
  const std::size_t last = first + predicted.size();
  if (last > corpus.stream.size()) throw DataError("predictions extend past the corpus stream");
  auto pred = [&](std::size_t pos) { return predicted[pos - first]; };

  std::map<std::string, std::set<std::string>> pieces;  // piece -> distinct words
  std::map<std::string, std::size_t> merges;
  std::vector<std::string> run;
  auto flush = [&] {
    if (run.size() >= 2) ++merges[io::join(run, " ")];
    run.clear();
  };
  for (const auto& tok : corpus.tokens) {
    if (tok.start < first || tok.end > last) {
      flush();
      continue;
    }
    const auto chars = std::u32string_view(corpus.stream.chars).substr(tok.start, tok.end - tok.start);
    std::size_t piece_start = 0;
    bool split = false;
    for (std::size_t i = 0; i + 1 < chars.size(); ++i) {
      if (pred(tok.start + i)) split = true;
    }
    if (split) {
      for (std::size_t i = 0; i < chars.size(); ++i) {
        if (i + 1 == chars.size() || pred(tok.start + i)) {
          const std::size_t len = i + 1 - piece_start;
          if (len >= 3) pieces[utf8::encode(chars.substr(piece_start, len))].insert(tok.form);
          piece_start = i + 1;
        }
      }
    }
    run.push_back(tok.form);
    if (pred(tok.end - 1)) flush();
  }
  flush();
  std::map<std::string, std::size_t> piece_counts;
  for (const auto& [p, words] : pieces) piece_counts[p] = words.size();
  report.oversegmentations = top_k(piece_counts, k);
  report.undersegmentations = top_k(merges, k);
}

ClassifierMode parse_classifier_mode(std::string_view name) {
  if (name == "single" || name == "single-unit") return ClassifierMode::single_unit;
  if (name == "full" || name == "full-layer") return ClassifierMode::full_layer;
  throw ConfigError("unknown classifier mode '" + std::string(name) + "'");
}

SegReport eval_running_text(const Checkpoint& ckpt, const AlignedCorpus& corpus, std::size_t train_chars,
                            std::size_t test_chars, const BoundaryOptions& options) {
  const std::size_t N = corpus.stream.size();
  if (train_chars == 0 || train_chars >= N) {
    throw DataError("running-text evaluation needs 0 < train_chars < stream length (" + std::to_string(N) + ")");
  }
  const std::size_t end = test_chars == 0 ? N : std::min(N, train_chars + test_chars);
  const std::size_t L = ckpt.config.layers, H = ckpt.config.hidden_size, width = L * H;
  const bool single = options.mode == ClassifierMode::single_unit;
  const std::size_t unit = single ? single_unit(options, width) : 0;
  const RecurrentNet net = ckpt.net();
  const auto ids = ckpt.vocab.encode(corpus.stream.chars);
  auto state = net.zero_state(1);
  std::vector<double> feat(width);
  auto advance = [&](std::size_t pos) {
    net.step(std::span<const int>(&ids[pos], 1), state);
    for (std::size_t l = 0; l < L; ++l) std::copy(state.h[l].begin(), state.h[l].end(), feat.begin() + static_cast<std::ptrdiff_t>(l * H));
  };

  std::vector<double> train_acts;
  std::vector<bool> train_labels(corpus.boundary.begin(), corpus.boundary.begin() + static_cast<std::ptrdiff_t>(train_chars));
  for (std::size_t pos = 0; pos < train_chars; ++pos) {
    advance(pos);
    if (single) train_acts.push_back(feat[unit]);
    else train_acts.insert(train_acts.end(), feat.begin(), feat.end());
  }
  Threshold thr;
  LogisticModel model;
  if (single) thr = fit_threshold(train_acts, train_labels, Objective::accuracy, options.direction);
  else model = train_logistic(as_examples(train_acts, train_labels, width), options.l2);

  std::vector<bool> predicted, gold;
  for (std::size_t pos = train_chars; pos < end; ++pos) {
    advance(pos);
    predicted.push_back(single ? thr.predict(feat[unit]) : model.predict(feat) == 1);
    gold.push_back(corpus.boundary[pos]);
  }
  SegReport report = seg_report(predicted, gold);
  segmentation_errors(predicted, corpus, options.top_k, report, train_chars);
  return report;
}

std::vector<std::vector<int>> sample_windows(const Vocabulary& vocab, const std::vector<PositionSample>& samples,
                                             std::size_t window) {
  const int stop = vocab.id(U'.');
  std::vector<std::vector<int>> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    std::u32string_view w = s.window;
    if (w.size() > window) w = w.substr(w.size() - window);
    std::vector<int> ids(window - w.size(), stop);
    const auto enc = vocab.encode(w);
    ids.insert(ids.end(), enc.begin(), enc.end());
    out.push_back(std::move(ids));
  }
  return out;
}

double eval_balanced(std::span<const double> train_acts, const std::vector<bool>& train_labels,
                     std::span<const double> test_acts, const std::vector<bool>& test_labels,
                     std::size_t width, const BoundaryOptions& options) {
  require_same_size(train_acts.size(), train_labels.size() * width, "balanced train activations");
  require_same_size(test_acts.size(), test_labels.size() * width, "balanced test activations");
  if (test_labels.empty()) throw DataError("balanced evaluation needs test samples");
  std::vector<bool> predicted(test_labels.size());
  if (options.mode == ClassifierMode::single_unit) {
    const std::size_t unit = single_unit(options, width);
    const auto thr = fit_threshold(column(train_acts, width, unit), train_labels, Objective::accuracy,
                                   options.direction);
    for (std::size_t i = 0; i < predicted.size(); ++i) predicted[i] = thr.predict(test_acts[i * width + unit]);
  } else {
    const auto model = train_logistic(as_examples(train_acts, train_labels, width), options.l2);
    const auto test = as_examples(test_acts, test_labels, width);
    for (std::size_t i = 0; i < predicted.size(); ++i) predicted[i] = model.predict(test[i].repr) == 1;
  }
  const auto c = confusion(predicted, test_labels);
  return 100.0 * static_cast<double>(c.tp + c.tn) / static_cast<double>(test_labels.size());
}

double eval_balanced(const Checkpoint& ckpt, const std::vector<PositionSample>& train,
                     const std::vector<PositionSample>& test, const BoundaryOptions& options, std::size_t window) {
  const std::size_t width = ckpt.config.layers * ckpt.config.hidden_size;
  auto labels = [](const std::vector<PositionSample>& s) {
    std::vector<bool> out;
    for (const auto& p : s) out.push_back(p.label);
    return out;
  };
  const auto train_acts = final_states(ckpt, sample_windows(ckpt.vocab, train, window));
  const auto test_acts = final_states(ckpt, sample_windows(ckpt.vocab, test, window));
  return eval_balanced(train_acts, labels(train), test_acts, labels(test), width, options);
}

std::vector<ProfileRow> plot_activation_profile(const Checkpoint& ckpt, std::string_view snippet,
                                                std::size_t flat_unit) {
  const auto aligned = align_boundaries(snippet, simple_tokenize(snippet));
  const std::size_t width = ckpt.config.layers * ckpt.config.hidden_size;
  if (flat_unit >= width) throw ConfigError("unit index out of range");
  const auto rec = trace_ids(ckpt, ckpt.vocab.encode(aligned.stream.chars), ckpt.vocab.encode(U"."), false);
  std::vector<ProfileRow> rows;
  for (std::size_t t = 0; t < rec.positions; ++t) {
    rows.push_back({t, utf8::encode(aligned.stream.chars[t]), rec.unit(t, flat_unit), aligned.boundary[t]});
  }
  return rows;
}

std::string format_profile(const std::vector<ProfileRow>& rows) {
  io::Table t;
  t.header = {"position", "char", "activation", "gold_boundary"};
  char buf[40];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", r.activation);
    t.rows.push_back({std::to_string(r.position), r.ch, buf, r.gold_boundary ? "1" : "0"});
  }
  return io::format_tsv(t);
}

std::string seg_report_json(const SegReport& r) {
  nlohmann::ordered_json j;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["counts"] = {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"fn", r.counts.fn}, {"tn", r.counts.tn}};
  auto list = [](const auto& v, const char* key) {
    auto a = nlohmann::ordered_json::array();
    for (const auto& [s, n] : v) a.push_back({{key, s}, {"count", n}});
    return a;
  };
  j["oversegmentations"] = list(r.oversegmentations, "substring");
  j["undersegmentations"] = list(r.undersegmentations, "merged");
  return j.dump(2) + "\n";
}

}  // namespace cnlm
