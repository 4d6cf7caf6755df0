#include "cnlm/probing.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "cnlm/error.hpp"
#include "cnlm/io.hpp"
#include "cnlm/rng.hpp"
#include "cnlm/utf8.hpp"

namespace cnlm {
namespace {

// log(1 + exp(-z)) without overflow.
double softplus_neg(double z) { return z > 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::string lower(std::string_view s) { return utf8::encode(utf8::to_lower(utf8::decode(s).chars)); }

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::pair<std::size_t, bool> length_key(const ProbeExample& e) {
  const auto chars = utf8::decode(e.form).chars;
  return {chars.size(), !chars.empty() && chars.back() == U'e'};
}

std::string format_meta(const std::map<std::string, std::string>& meta) {
  std::string out;
  for (const auto& [k, v] : meta) {
    if (!out.empty()) out += ';';
    out += k + "=" + v;
  }
  return out.empty() ? "_" : out;
}

void split_by_label(const std::vector<ProbeExample>& pool, std::vector<std::size_t>& neg,
                    std::vector<std::size_t>& pos) {
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (pool[i].label != 0 && pool[i].label != 1) throw DataError("probe labels must be 0 or 1");
    (pool[i].label == 1 ? pos : neg).push_back(i);
  }
}

void require_class_sizes(std::size_t neg, std::size_t pos, std::size_t n) {
  if (neg == 0 || pos == 0) throw DataError("probe pool contains a single class");
  if (neg < n || pos < n) {
    throw DataError("probe pool has " + std::to_string(pos) + " positive and " + std::to_string(neg) +
                    " negative items; " + std::to_string(n) + " per class needed for training");
  }
}

}  // namespace

double LogisticModel::margin(const std::vector<double>& x) const {
  double m = bias;
  for (std::size_t j = 0; j < weights.size(); ++j) m += weights[j] * x[j];
  return m;
}

double LogisticModel::probability(const std::vector<double>& x) const { return sigmoid(margin(x)); }

LogisticModel train_logistic(const std::vector<ProbeExample>& train, double l2,
                             std::size_t max_iterations, double tolerance) {
  if (train.empty()) throw DataError("empty training set");
  const std::size_t d = train.front().repr.size();
  bool has[2] = {false, false};
  double sq = 0;
  for (const auto& e : train) {
    if (e.repr.size() != d) throw DataError("inconsistent representation dimensions");
    if (e.label != 0 && e.label != 1) throw DataError("probe labels must be 0 or 1");
    has[e.label] = true;
    for (double v : e.repr) sq += v * v;
  }
  if (!has[0] || !has[1]) throw DataError("degenerate training set: a single class");
  const double n = static_cast<double>(train.size());
  // Lipschitz bound of the gradient: trace of the (bias-augmented) Gram matrix / 4n.
  const double step = 1.0 / (0.25 * (sq / n + 1.0) + l2);

  LogisticModel m;
  m.weights.assign(d, 0.0);
  auto loss_and_grad = [&](std::vector<double>* gw, double* gb) {
    double loss = 0;
    if (gw) std::fill(gw->begin(), gw->end(), 0.0);
    if (gb) *gb = 0;
    for (const auto& e : train) {
      const double y = e.label == 1 ? 1.0 : -1.0;
      const double z = m.margin(e.repr);
      loss += softplus_neg(y * z);
      if (gw) {
        const double g = -y * sigmoid(-y * z) / n;
        for (std::size_t j = 0; j < d; ++j) (*gw)[j] += g * e.repr[j];
        *gb += g;
      }
    }
    loss /= n;
    double wsq = 0;
    for (std::size_t j = 0; j < d; ++j) {
      wsq += m.weights[j] * m.weights[j];
      if (gw) (*gw)[j] += l2 * m.weights[j];
    }
    return loss + 0.5 * l2 * wsq;
  };
  std::vector<double> gw(d);
  double gb = 0;
  double prev = loss_and_grad(&gw, &gb);
  for (m.iterations = 1; m.iterations <= max_iterations; ++m.iterations) {
    for (std::size_t j = 0; j < d; ++j) m.weights[j] -= step * gw[j];
    m.bias -= step * gb;
    const double cur = loss_and_grad(&gw, &gb);
    if (std::abs(prev - cur) < tolerance) break;
    prev = cur;
  }
  return m;
}

double accuracy(const LogisticModel& model, const std::vector<ProbeExample>& test) {
  if (test.empty()) throw DataError("empty test set");
  std::size_t hits = 0;
  for (const auto& e : test) hits += model.predict(e.repr) == e.label;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(test.size());
}

ProbeResult summarize(std::vector<double> accuracies) {
  ProbeResult r;
  r.n_splits = accuracies.size();
  if (accuracies.empty()) return r;
  const double n = static_cast<double>(accuracies.size());
  double s = 0;
  for (double a : accuracies) s += a;
  r.mean_accuracy = s / n;
  if (accuracies.size() > 1) {
    double ss = 0;
    for (double a : accuracies) ss += (a - r.mean_accuracy) * (a - r.mean_accuracy);
    r.std_error = std::sqrt(ss / (n - 1)) / std::sqrt(n);
  }
  r.accuracies = std::move(accuracies);
  return r;
}

ProbeResult run_probe(const std::vector<ProbeExample>& pool, const ProbeOptions& options,
                      const std::vector<ProbeExample>& test) {
  std::vector<std::size_t> neg, pos;
  split_by_label(pool, neg, pos);
  const std::size_t n = options.n_train_per_class;
  require_class_sizes(neg.size(), pos.size(), n);
  if (test.empty() && neg.size() + pos.size() == 2 * n) {
    throw DataError("probe pool leaves no test items after sampling the training set");
  }
  std::vector<double> acc(options.n_splits);
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (long s = 0; s < static_cast<long>(options.n_splits); ++s) {
    try {
      Rng rng(derive_seed(options.seed, static_cast<std::uint64_t>(s)));
      auto a = neg, b = pos;
      rng.shuffle(a);
      rng.shuffle(b);
      std::vector<ProbeExample> train, held;
      for (std::size_t i = 0; i < a.size(); ++i) (i < n ? train : held).push_back(pool[a[i]]);
      for (std::size_t i = 0; i < b.size(); ++i) (i < n ? train : held).push_back(pool[b[i]]);
      const auto model = train_logistic(train, options.l2);
      acc[static_cast<std::size_t>(s)] = accuracy(model, test.empty() ? held : test);
    } catch (...) {
#pragma omp critical
      failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return summarize(std::move(acc));
}

OovMode parse_oov_mode(std::string_view name) {
  if (name == "random-guess") return OovMode::random_guess;
  if (name == "subset") return OovMode::subset;
  throw ConfigError("unknown OOV mode '" + std::string(name) + "'");
}

ProbeResult oov_policy_eval(const std::vector<ProbeExample>& pool, const ProbeOptions& options,
                            OovMode mode) {
  std::vector<ProbeExample> known, missing;
  for (const auto& e : pool) (e.repr.empty() ? missing : known).push_back(e);
  const std::size_t n = options.n_train_per_class;
  std::vector<std::size_t> neg, pos;
  split_by_label(known, neg, pos);
  const bool guess_only = known.empty() && mode == OovMode::random_guess;
  if (!guess_only) require_class_sizes(neg.size(), pos.size(), n);

  std::vector<double> acc(options.n_splits);
  std::size_t tested_known = 0;
  for (std::size_t s = 0; s < options.n_splits; ++s) {
    const std::uint64_t split_seed = derive_seed(options.seed, s);
    Rng rng(split_seed);
    Rng coin(derive_seed(split_seed, 1));
    std::vector<ProbeExample> train, held;
    if (!guess_only) {
      auto a = neg, b = pos;
      rng.shuffle(a);
      rng.shuffle(b);
      for (std::size_t i = 0; i < a.size(); ++i) (i < n ? train : held).push_back(known[a[i]]);
      for (std::size_t i = 0; i < b.size(); ++i) (i < n ? train : held).push_back(known[b[i]]);
    }
    tested_known = held.size();
    double hits = 0;
    std::size_t total = held.size();
    if (!held.empty()) {
      const auto model = train_logistic(train, options.l2);
      for (const auto& e : held) hits += model.predict(e.repr) == e.label;
    }
    if (mode == OovMode::random_guess) {
      for (const auto& e : missing) hits += static_cast<int>(coin.below(2)) == e.label;
      total += missing.size();
    }
    if (total == 0) throw DataError("no test items left for OOV evaluation");
    acc[s] = 100.0 * hits / static_cast<double>(total);
  }
  auto r = summarize(std::move(acc));
  if (mode == OovMode::subset && tested_known + missing.size() > 0) {
    r.excluded_rate = static_cast<double>(missing.size()) /
                      static_cast<double>(tested_known + missing.size());
  }
  return r;
}

std::vector<ProbeExample> build_word_class_dataset(const std::vector<LexiconEntry>& lexicon,
                                                   const ReprFn& repr, const WordClassSpec& spec) {
  std::string suffix = spec.suffix;
  if (!suffix.empty() && suffix.front() == '-') suffix.erase(0, 1);
  suffix = lower(suffix);
  std::map<std::string, std::set<std::string>> pos_of;
  for (const auto& e : lexicon) pos_of[lower(e.form)].insert(e.pos);
  std::vector<std::string> a, b;  // sorted by construction
  for (const auto& [form, tags] : pos_of) {
    if (tags.size() != 1 || !ends_with(form, suffix) || form.size() == suffix.size()) continue;
    if (*tags.begin() == spec.pos_a) a.push_back(form);
    if (*tags.begin() == spec.pos_b) b.push_back(form);
  }
  const std::size_t want = spec.n_per_class > 0 ? spec.n_per_class : std::min(a.size(), b.size());
  if (a.size() < want || b.size() < want || want == 0) {
    throw DataError("suffix -" + suffix + ": " + std::to_string(a.size()) + " " + spec.pos_a + " and " +
                    std::to_string(b.size()) + " " + spec.pos_b + " forms available, " +
                    std::to_string(std::max<std::size_t>(want, 1)) + " per class needed");
  }
  Rng rng(spec.seed);
  rng.shuffle(a);
  rng.shuffle(b);
  std::vector<ProbeExample> out;
  for (int label : {1, 0}) {
    const auto& forms = label == 1 ? a : b;
    for (std::size_t i = 0; i < want; ++i) {
      ProbeExample e;
      e.form = forms[i];
      e.label = label;
      e.repr = repr(forms[i]);
      e.meta = {{"class", label == 1 ? spec.pos_a : spec.pos_b},
                {"suffix", suffix},
                {"length", std::to_string(utf8::length(forms[i]))}};
      out.push_back(std::move(e));
    }
  }
  return out;
}

std::string plural_class(const LexiconEntry& e) {
  std::string c = lower(e.feature("plural"));
  const auto plus = c.find('+');
  if (plus != std::string::npos) c = c.substr(plus + 1);
  if (!c.empty() && c.front() == '-') c.erase(0, 1);
  return c;
}

NumberDataset build_number_dataset(const std::vector<LexiconEntry>& lexicon, const ReprFn& repr,
                                   const std::vector<std::string>& train_classes,
                                   const std::vector<std::string>& test_classes) {
  NumberDataset out;
  std::set<std::pair<std::string, int>> seen;
  for (const auto& e : lexicon) {
    const std::string number = lower(e.feature("number"));
    if (number != "sg" && number != "pl") continue;
    const int label = number == "pl" ? 1 : 0;
    const std::string cls = plural_class(e);
    const bool is_train = std::find(train_classes.begin(), train_classes.end(), cls) != train_classes.end();
    const bool is_test = std::find(test_classes.begin(), test_classes.end(), cls) != test_classes.end();
    if (!is_train && !is_test) continue;
    const std::string form = lower(e.form);
    if (!seen.insert({form, label}).second) continue;
    ProbeExample ex;
    ex.form = form;
    ex.label = label;
    ex.repr = repr(form);
    ex.meta = {{"class", cls}, {"number", number}, {"lemma", lower(e.lemma)},
               {"length", std::to_string(utf8::length(form))}};
    (is_train ? out.train : out.test)[cls].push_back(std::move(ex));
  }
  for (const auto& c : train_classes) {
    if (out.train[c].empty()) throw DataError("no lexicon entries for plural class '" + c + "'");
  }
  for (const auto& c : test_classes) {
    if (out.test[c].empty()) throw DataError("no lexicon entries for plural class '" + c + "'");
  }
  return out;
}

std::map<std::string, ProbeResult> run_number_probe(const NumberDataset& data, std::size_t n_per_class,
                                                    const ProbeOptions& options) {
  std::map<std::string, std::vector<std::pair<std::vector<ProbeExample>, std::vector<ProbeExample>>>> split_pools;
  for (const auto& [cls, pool] : data.train) {
    std::vector<ProbeExample> sg, pl;
    for (const auto& e : pool) (e.label == 1 ? pl : sg).push_back(e);
    split_pools[cls].push_back({std::move(sg), std::move(pl)});
  }
  std::map<std::string, std::vector<double>> acc;
  for (const auto& [cls, pool] : data.test) acc[cls].assign(options.n_splits, 0.0);
  for (std::size_t s = 0; s < options.n_splits; ++s) {
    std::vector<ProbeExample> train;
    std::uint64_t k = 0;
    for (const auto& [cls, pools] : split_pools) {
      auto [sg, pl] = length_matched_sample(pools.front().first, pools.front().second, n_per_class,
                                            derive_seed(derive_seed(options.seed, s), k++));
      train.insert(train.end(), sg.begin(), sg.end());
      train.insert(train.end(), pl.begin(), pl.end());
    }
    const auto model = train_logistic(train, options.l2);
    for (const auto& [cls, pool] : data.test) acc[cls][s] = accuracy(model, pool);
  }
  std::map<std::string, ProbeResult> out;
  for (auto& [cls, a] : acc) out[cls] = summarize(std::move(a));
  return out;
}

std::pair<std::vector<ProbeExample>, std::vector<ProbeExample>> length_matched_sample(
    const std::vector<ProbeExample>& a, const std::vector<ProbeExample>& b, std::size_t n,
    std::uint64_t seed) {
  std::map<std::pair<std::size_t, bool>, std::vector<std::size_t>> ka, kb;
  for (std::size_t i = 0; i < a.size(); ++i) ka[length_key(a[i])].push_back(i);
  for (std::size_t i = 0; i < b.size(); ++i) kb[length_key(b[i])].push_back(i);
  // One slot per matchable pair of items in each shared key.
  std::vector<std::pair<std::size_t, bool>> slots;
  for (const auto& [key, items] : ka) {
    const auto it = kb.find(key);
    if (it == kb.end()) continue;
    slots.insert(slots.end(), std::min(items.size(), it->second.size()), key);
  }
  if (slots.size() < n) {
    throw DataError("length matching: only " + std::to_string(slots.size()) +
                    " matchable items, " + std::to_string(n) + " requested");
  }
  Rng rng(seed);
  rng.shuffle(slots);
  slots.resize(n);
  std::sort(slots.begin(), slots.end());
  std::pair<std::vector<ProbeExample>, std::vector<ProbeExample>> out;
  for (auto& [key, items] : ka) rng.shuffle(items);
  for (auto& [key, items] : kb) rng.shuffle(items);
  std::map<std::pair<std::size_t, bool>, std::size_t> used;
  for (const auto& key : slots) {
    const std::size_t i = used[key]++;
    out.first.push_back(a[ka[key][i]]);
    out.second.push_back(b[kb[key][i]]);
  }
  return out;
}

double cosine_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) return 1.0;
  return 1.0 - dot / std::sqrt(na * nb);
}

Dendrogram cluster_embeddings(const std::vector<std::string>& labels,
                              const std::vector<std::vector<double>>& vectors) {
  if (labels.size() != vectors.size()) throw DataError("labels and vectors differ in count");
  const std::size_t n = labels.size();
  Dendrogram d;
  d.labels = labels;
  struct Cluster {
    std::size_t node;
    std::size_t size;
    std::string label;  // smallest member label
  };
  std::vector<Cluster> active;
  for (std::size_t i = 0; i < n; ++i) active.push_back({i, 1, labels[i]});
  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) dist[i][j] = dist[j][i] = cosine_distance(vectors[i], vectors[j]);
  }
  while (active.size() > 1) {
    std::size_t bi = 0, bj = 1;
    auto key = [&](std::size_t i, std::size_t j) {
      const auto& x = active[i].label;
      const auto& y = active[j].label;
      return std::make_tuple(dist[i][j], std::min(x, y), std::max(x, y));
    };
    for (std::size_t i = 0; i < active.size(); ++i) {
      for (std::size_t j = i + 1; j < active.size(); ++j) {
        if (key(i, j) < key(bi, bj)) {
          bi = i;
          bj = j;
        }
      }
    }
    if (active[bj].label < active[bi].label) std::swap(bi, bj);
    const auto& ci = active[bi];
    const auto& cj = active[bj];
    d.merges.push_back({ci.node, cj.node, dist[bi][bj], ci.size + cj.size});
    // Average linkage (size-weighted update).
    const double wi = static_cast<double>(ci.size), wj = static_cast<double>(cj.size);
    for (std::size_t k = 0; k < active.size(); ++k) {
      if (k == bi || k == bj) continue;
      dist[bi][k] = dist[k][bi] = (wi * dist[bi][k] + wj * dist[bj][k]) / (wi + wj);
    }
    active[bi] = {n + d.merges.size() - 1, ci.size + cj.size, std::min(ci.label, cj.label)};
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(bj));
    dist.erase(dist.begin() + static_cast<std::ptrdiff_t>(bj));
    for (auto& row : dist) row.erase(row.begin() + static_cast<std::ptrdiff_t>(bj));
  }
  return d;
}

std::string Dendrogram::newick() const {
  const std::size_t n = labels.size();
  if (n == 0) return ";";
  std::function<std::string(std::size_t)> render = [&](std::size_t node) -> std::string {
    if (node < n) return labels[node];
    const auto& m = merges[node - n];
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", m.distance);
    return "(" + render(m.left) + "," + render(m.right) + "):" + buf;
  };
  return render(merges.empty() ? 0 : n + merges.size() - 1) + ";";
}

std::string format_pool(const std::vector<ProbeExample>& pool) {
  io::Table t;
  t.header = {"form", "label", "meta"};
  for (const auto& e : pool) t.rows.push_back({e.form, std::to_string(e.label), format_meta(e.meta)});
  return io::format_tsv(t);
}

std::vector<ProbeExample> parse_pool(std::string_view tsv) {
  const auto t = io::parse_tsv(tsv, "probe pool");
  const auto c_form = t.column("form"), c_label = t.column("label"), c_meta = t.column("meta");
  std::vector<ProbeExample> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    ProbeExample e;
    e.form = row[c_form];
    if (row[c_label] != "0" && row[c_label] != "1") {
      throw DataError("probe pool row " + std::to_string(r + 2) + ": label must be 0 or 1");
    }
    e.label = row[c_label] == "1" ? 1 : 0;
    if (row[c_meta] != "_") {
      for (const auto& kv : io::split(row[c_meta], ';')) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw DataError("probe pool row " + std::to_string(r + 2) + ": malformed meta");
        e.meta[kv.substr(0, eq)] = kv.substr(eq + 1);
      }
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::string probe_result_json(const ProbeResult& r, const std::map<std::string, std::string>& config) {
  nlohmann::ordered_json j;
  j["mean_accuracy"] = r.mean_accuracy;
  j["std_error"] = r.std_error;
  j["n_splits"] = r.n_splits;
  j["excluded_rate"] = r.excluded_rate;
  j["accuracies"] = r.accuracies;
  j["config"] = config;
  return j.dump(2) + "\n";
}

}  // namespace cnlm
