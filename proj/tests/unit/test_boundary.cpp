#include <doctest.h>

#include <random>

#include "cnlm/boundary.hpp"
#include "cnlm/error.hpp"
#include "oracles.hpp"

using namespace cnlm;

namespace {

std::vector<double> normals(std::size_t n, std::mt19937_64& g) {
  std::normal_distribution<double> d(0, 1);
  std::vector<double> v(n);
  for (auto& x : v) x = d(g);
  return v;
}

Checkpoint small_model() {
  LMConfig c;
  c.embedding_size = 4;
  c.hidden_size = 6;
  c.layers = 2;
  c.seed = 3;
  auto ckpt = init_checkpoint(c, build_vocabulary(preprocess("abcdefghijklmnopqrstuvwxyzü.,"), 1));
  Rng rng(5);
  for (auto& p : ckpt.params.params()) {
    for (auto& x : p.value.data) x += rng.uniform(-0.5, 0.5);
  }
  return ckpt;
}

}  // namespace

TEST_CASE("pearson matches the oracle and is affine invariant") {
  std::mt19937_64 g(1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + trial;
    const auto x = normals(n, g);
    auto y = normals(n, g);
    for (std::size_t i = 0; i < n; ++i) y[i] += 0.5 * x[i];
    const double r = pearson(x, y);
    CHECK(r == doctest::Approx(oracle::pearson(x, y)).epsilon(1e-10));
    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = 3.0 - 2.5 * x[i];
    CHECK(pearson(z, y) == doctest::Approx(-r).epsilon(1e-10));
  }
  const std::vector<double> flat(5, 2.0), any{1, 2, 3, 4, 5};
  CHECK(pearson(flat, any) == 0.0);
}

TEST_CASE("scan_units ranks by signed or absolute correlation") {
  std::mt19937_64 g(2);
  const std::size_t n = 200, layers = 2, hidden = 3;
  std::vector<bool> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = g() % 2;
  std::vector<double> acts(n * layers * hidden);
  std::normal_distribution<double> noise(0, 0.3);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t u = 0; u < layers * hidden; ++u) acts[i * 6 + u] = noise(g);
    acts[i * 6 + 4] += labels[i] ? 1.0 : 0.0;   // layer 1, unit 1: positive
    acts[i * 6 + 2] -= labels[i] ? 2.0 : 0.0;   // layer 0, unit 2: strongly negative
  }
  const auto s = scan_units(acts, layers, hidden, labels);
  REQUIRE(s.size() == 6);
  CHECK(s.front().flat == 4);
  CHECK(s.front().layer == 1);
  CHECK(s.front().unit == 1);
  CHECK(s.back().flat == 2);
  for (std::size_t i = 1; i < s.size(); ++i) CHECK(s[i - 1].pearson_r >= s[i].pearson_r);
  CHECK(scan_units(acts, layers, hidden, labels, true).front().flat == 2);
}

TEST_CASE("fit_threshold agrees with an exhaustive search over cuts") {
  std::mt19937_64 g(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 3 + trial % 40;
    std::vector<double> a(n);
    std::vector<bool> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<double>(g() % 12) / 4.0;  // many ties
      y[i] = g() % 3 == 0;
    }
    for (int direction : {1, -1}) {
      for (bool use_f1 : {false, true}) {
        const auto t = fit_threshold(a, y, use_f1 ? Objective::f1 : Objective::accuracy, direction);
        const auto [best, at] = oracle::best_threshold(a, y, direction, use_f1);
        CHECK(t.objective == doctest::Approx(best));
        CHECK(t.threshold == doctest::Approx(at));
        CHECK(oracle::threshold_objective(a, y, t.threshold, direction, use_f1) == doctest::Approx(best));
      }
    }
  }
  CHECK_THROWS_AS(fit_threshold(std::vector<double>{1.0}, {true}, Objective::accuracy, 0), ConfigError);
  CHECK_THROWS_AS(fit_threshold(std::vector<double>{}, {}, Objective::accuracy, 1), DataError);
  CHECK(parse_objective("f1") == Objective::f1);
}

TEST_CASE("segmentation scores follow the confusion counts") {
  const std::vector<bool> gold{true, false, true, false, false, true};
  const std::vector<bool> pred{true, true, false, false, false, true};
  const auto r = seg_report(pred, gold);
  CHECK(r.counts.tp == 2);
  CHECK(r.counts.fp == 1);
  CHECK(r.counts.fn == 1);
  CHECK(r.counts.tn == 2);
  CHECK(r.precision == doctest::Approx(200.0 / 3));
  CHECK(r.recall == doctest::Approx(200.0 / 3));
  CHECK(r.f1 == doctest::Approx(oracle::f1(2, 1, 1)));

  const std::vector<bool> everything(gold.size(), true);
  const auto all = seg_report(everything, gold);
  CHECK(all.recall == 100.0);
  CHECK(all.precision == 50.0);
  CHECK(f1_score(Counts{}) == 0.0);
}

TEST_CASE("error lists: merged token runs and split-off pieces") {
  std::string text;
  for (int i = 0; i < 6; ++i) text += "bis zu dem haus\n";
  text += "die maus\n";
  const auto c = load_paragraph_corpus(text);
  std::vector<bool> pred = c.boundary;
  for (const auto& t : c.tokens) {
    if (t.form == "bis") pred[t.end - 1] = false;                                 // undersegment "bis zu"
    if (t.form == "haus" || t.form == "maus") pred[t.start] = true;               // split off "aus"
  }
  SegReport r = seg_report(pred, c.boundary);
  segmentation_errors(pred, c, 5, r);
  REQUIRE_FALSE(r.undersegmentations.empty());
  CHECK(r.undersegmentations.front() == std::pair<std::string, std::size_t>{"bis zu", 6});
  REQUIRE(r.oversegmentations.size() == 1);
  CHECK(r.oversegmentations.front() == std::pair<std::string, std::size_t>{"aus", 2});

  // A window that starts mid-corpus only sees tokens inside it.
  const std::size_t first = c.tokens[4].start;
  const std::vector<bool> tail(pred.begin() + static_cast<long>(first), pred.end());
  SegReport w;
  segmentation_errors(tail, c, 5, w, first);
  CHECK(w.undersegmentations.front().second == 5);
  CHECK_THROWS_AS(segmentation_errors(pred, c, 5, w, 1), DataError);
}

TEST_CASE("balanced evaluation on synthetic activations") {
  std::mt19937_64 g(6);
  const std::size_t n = 120, width = 4;
  std::vector<bool> labels(n);
  std::vector<double> acts(n * width);
  std::normal_distribution<double> noise(0, 0.1);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = i % 2;
    for (std::size_t u = 0; u < width; ++u) acts[i * width + u] = noise(g);
    acts[i * width + 3] += labels[i] ? -1.0 : 1.0;
  }
  const std::span<const double> all(acts);
  const auto train = all.subspan(0, 60 * width), test = all.subspan(60 * width);
  const std::vector<bool> ytr(labels.begin(), labels.begin() + 60), yte(labels.begin() + 60, labels.end());
  BoundaryOptions o;
  o.unit = 3;
  o.direction = -1;
  CHECK(eval_balanced(train, ytr, test, yte, width, o) == 100.0);
  o.direction = 1;
  CHECK(eval_balanced(train, ytr, test, yte, width, o) <= 50.0);
  o.mode = ClassifierMode::full_layer;
  CHECK(eval_balanced(train, ytr, test, yte, width, o) == 100.0);
  o.mode = ClassifierMode::single_unit;
  o.unit = 4;
  CHECK_THROWS(eval_balanced(train, ytr, test, yte, width, o));
  CHECK(parse_classifier_mode("full") == ClassifierMode::full_layer);
}

TEST_CASE("windows are left-padded with full stops") {
  const auto v = build_vocabulary(preprocess("abc."), 1);
  PositionSample s;
  s.window = U"ab";
  const auto w = sample_windows(v, {s}, 4);
  REQUIRE(w.size() == 1);
  CHECK(w[0] == std::vector<int>{v.id(U'.'), v.id(U'.'), v.id(U'a'), v.id(U'b')});
}

TEST_CASE("profile rows mirror the trace column") {
  const auto ckpt = small_model();
  const auto rows = plot_activation_profile(ckpt, "der baum, grün", 7);
  const auto rec = trace(ckpt, "derbaum,grün", ".");
  REQUIRE(rows.size() == rec.positions);
  for (std::size_t t = 0; t < rows.size(); ++t) CHECK(rows[t].activation == rec.unit(t, 7));
  CHECK(rows[2].gold_boundary);
  CHECK(rows[6].gold_boundary);
  CHECK(rows[7].gold_boundary);
  CHECK_FALSE(rows[5].gold_boundary);
  CHECK(format_profile(rows).rfind("position\tchar\tactivation\tgold_boundary\n", 0) == 0);
  CHECK_THROWS_AS(plot_activation_profile(ckpt, "x", 12), ConfigError);
}

TEST_CASE("running-text evaluation covers the test span") {
  const auto ckpt = small_model();
  std::string text;
  for (int i = 0; i < 30; ++i) text += "the cat sat on the mat. a dog ran.\n";
  const auto c = load_paragraph_corpus(text);
  BoundaryOptions o;
  o.unit = 0;
  const auto r = eval_running_text(ckpt, c, 200, 300, o);
  const auto& k = r.counts;
  CHECK(k.tp + k.fp + k.fn + k.tn == 300);
  o.mode = ClassifierMode::full_layer;
  const auto full = eval_running_text(ckpt, c, 200, 0, o);
  CHECK(full.counts.tp + full.counts.fp + full.counts.fn + full.counts.tn == c.stream.size() - 200);
  CHECK_THROWS_AS(eval_running_text(ckpt, c, 0, 10, o), DataError);
}
