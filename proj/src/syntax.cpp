#include "cnlm/syntax.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "cnlm/error.hpp"
#include "cnlm/io.hpp"
#include "cnlm/utf8.hpp"

namespace cnlm {
namespace {

std::string lower(std::string_view s) { return utf8::encode(utf8::to_lower(utf8::decode(s).chars)); }

std::u32string squeeze(std::string_view s) { return preprocess(s, true).chars; }

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (w.empty()) continue;
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

std::string format_map(const std::map<std::string, std::string>& m) {
  std::string out;
  for (const auto& [k, v] : m) {
    if (!out.empty()) out += ';';
    out += k + "=" + v;
  }
  return out.empty() ? "_" : out;
}

std::map<std::string, std::string> parse_map(const std::string& s, std::size_t row) {
  std::map<std::string, std::string> out;
  if (s.empty() || s == "_") return out;
  for (const auto& kv : io::split(s, ';')) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw DataError("stimulus row " + std::to_string(row) + ": malformed condition '" + kv + "'");
    out[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  return out;
}

std::string field(const std::string& s) { return s.empty() ? "_" : s; }
std::string unfield(const std::string& s) { return s == "_" ? std::string{} : s; }

void require_equal_lengths(const MinimalPairItem& item) {
  const std::size_t len = squeeze(item.variants.front()).size();
  for (const auto& v : item.variants) {
    if (squeeze(v).size() != len) {
      throw ConfigError("length-controlled item " + item.id + " has variants of different lengths");
    }
  }
}

// Words between the determiner and the noun for `k` interveners.
std::vector<std::string> interveners(const std::vector<std::string>& adverbs, int k, const std::string& adjective) {
  std::vector<std::string> words;
  if (k <= 0) return words;
  if (static_cast<std::size_t>(k - 1) > adverbs.size()) {
    throw ConfigError("condition " + std::to_string(k) + " needs " + std::to_string(k - 1) + " adverbs in the template");
  }
  words.assign(adverbs.begin(), adverbs.begin() + (k - 1));
  words.push_back(adjective);
  return words;
}

const std::string& pick(const std::vector<std::string>& pool, Rng& rng) {
  if (pool.empty()) throw DataError("adjective pool is empty");
  return pool[rng.below(pool.size())];
}

std::uint64_t item_seed(std::uint64_t seed, const std::string& id) { return derive_seed(seed, io::fnv1a64(id)); }

// The `case` feature may list several cases ("nominative,dative");
// abbreviations nom/acc/dat/gen are expanded.
std::vector<std::string> cases_of(const LexiconEntry& e) {
  std::vector<std::string> out;
  const auto raw = e.feature("case");
  if (raw.empty()) return out;
  for (auto c : io::split(lower(raw), ',')) {
    if (c == "nom") c = "nominative";
    if (c == "acc") c = "accusative";
    if (c == "dat") c = "dative";
    if (c == "gen") c = "genitive";
    out.push_back(c);
  }
  return out;
}

bool has_case(const LexiconEntry& e, const std::string& c) {
  const auto cs = cases_of(e);
  return std::find(cs.begin(), cs.end(), c) != cs.end();
}

template <typename T>
T json_or(const nlohmann::ordered_json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

std::vector<std::pair<std::string, std::string>> ordered_pairs(const nlohmann::ordered_json& j, const char* key) {
  std::vector<std::pair<std::string, std::string>> out;
  if (!j.contains(key)) return out;
  for (const auto& [k, v] : j.at(key).items()) out.emplace_back(k, v.get<std::string>());
  return out;
}

}  // namespace

std::vector<MinimalPairItem> parse_items(std::string_view tsv) {
  const auto t = io::parse_tsv(tsv, "stimulus file");
  const auto c_id = t.column("id"), c_ph = t.column("phenomenon"), c_cond = t.column("condition"),
             c_pre = t.column("frame_prefix"), c_suf = t.column("frame_suffix"), c_var = t.column("variants"),
             c_cor = t.column("correct_index"), c_ctl = t.column("control_variants");
  std::vector<MinimalPairItem> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::size_t line = r + 2;
    MinimalPairItem it;
    it.id = row[c_id];
    it.phenomenon = row[c_ph];
    it.condition = parse_map(row[c_cond], line);
    it.frame_prefix = unfield(row[c_pre]);
    it.frame_suffix = unfield(row[c_suf]);
    it.variants = io::split(row[c_var], '|');
    if (it.variants.size() < 2) throw DataError("stimulus row " + std::to_string(line) + ": fewer than 2 variants");
    try {
      it.correct = std::stoul(row[c_cor]);
    } catch (const std::exception&) {
      throw DataError("stimulus row " + std::to_string(line) + ": bad correct_index '" + row[c_cor] + "'");
    }
    if (it.correct >= it.variants.size()) throw DataError("stimulus row " + std::to_string(line) + ": correct_index out of range");
    if (!row[c_ctl].empty() && row[c_ctl] != "_") it.control_variants = io::split(row[c_ctl], '|');
    out.push_back(std::move(it));
  }
  return out;
}

std::string format_items(const std::vector<MinimalPairItem>& items) {
  io::Table t;
  t.header = {"id", "phenomenon", "condition", "frame_prefix", "frame_suffix", "variants", "correct_index", "control_variants"};
  for (const auto& it : items) {
    t.rows.push_back({it.id, it.phenomenon, format_map(it.condition), field(it.frame_prefix), field(it.frame_suffix),
                      io::join(it.variants, "|"), std::to_string(it.correct),
                      it.control_variants.empty() ? "_" : io::join(it.control_variants, "|")});
  }
  return io::format_tsv(t);
}

std::string delimited(const std::string& prefix, const std::string& variant, const std::string& suffix) {
  std::string text{io::trim(join_words({std::string(io::trim(prefix)), std::string(io::trim(variant)),
                                        std::string(io::trim(suffix))}))};
  if (text.empty() || text.back() != '.') text += text.empty() ? "." : " .";
  return text;
}

std::optional<double> CharLMScorer::log_likelihood(const std::string& prefix, const std::string& variant,
                                                   const std::string& suffix) const {
  return score(ckpt_, delimited(prefix, variant, suffix), ".").nats;
}

std::optional<double> WordLMScorer::log_likelihood(const std::string& prefix, const std::string& variant,
                                                   const std::string& suffix) const {
  if (subset_) {
    for (const auto& tok : simple_tokenize(variant)) {
      if (!ckpt_.vocab.contains(lower(tok.form))) return std::nullopt;
    }
  }
  return score(ckpt_, delimited(prefix, variant, suffix), ".").nats;
}

ItemOutcome score_item(const Scorer& scorer, const MinimalPairItem& item, bool control,
                       std::optional<std::uint64_t> tie_seed) {
  const auto& variants = control ? item.control_variants : item.variants;
  if (variants.empty()) {
    throw DataError("item " + item.id + (control ? " has no control variants" : " has no variants"));
  }
  const std::string& prefix = control ? std::string{} : item.frame_prefix;
  ItemOutcome out;
  for (const auto& v : variants) {
    const auto ll = scorer.log_likelihood(prefix, v, item.frame_suffix);
    if (!ll) return out;
    out.scores.push_back(*ll);
  }
  out.scored = true;
  const double best = *std::max_element(out.scores.begin(), out.scores.end());
  std::vector<std::size_t> tied;
  for (std::size_t i = 0; i < out.scores.size(); ++i) {
    if (out.scores[i] == best) tied.push_back(i);
  }
  out.tie = tied.size() > 1;
  out.chosen = tied.front();
  if (out.tie) {
    if (tie_seed) {
      Rng rng(item_seed(*tie_seed, item.id));
      out.chosen = tied[rng.below(tied.size())];
    } else {
      spdlog::warn("item {}: {} variants tie; choosing the first", item.id, tied.size());
    }
  }
  return out;
}

Chooser scorer_chooser(const Scorer& scorer, std::optional<std::uint64_t> tie_seed) {
  return [&scorer, tie_seed](const MinimalPairItem& item, bool control) {
    return score_item(scorer, item, control, tie_seed);
  };
}

namespace {

// Splits squeezed variants into heads and their longest shared tail.
std::pair<std::vector<std::u32string>, std::u32string> heads_and_tail(const std::vector<std::string>& variants) {
  std::vector<std::u32string> s;
  for (const auto& v : variants) s.push_back(squeeze(v));
  std::size_t common = s.front().size();
  for (const auto& v : s) {
    std::size_t k = 0;
    while (k < common && k < v.size() && v[v.size() - 1 - k] == s.front()[s.front().size() - 1 - k]) ++k;
    common = k;
  }
  std::vector<std::u32string> heads;
  for (const auto& v : s) heads.push_back(v.substr(0, v.size() - common));
  return {heads, s.front().substr(s.front().size() - common)};
}

}  // namespace

Chooser ngram_chooser(const NgramTable& table, std::uint64_t seed) {
  return [&table, seed](const MinimalPairItem& item, bool control) {
    auto variants = control ? item.control_variants : item.variants;
    if (variants.empty()) throw DataError("item " + item.id + " has no variants");
    if (!control && !item.frame_prefix.empty()) {
      const auto words = io::split(std::string(io::trim(item.frame_prefix)), ' ');
      for (auto& v : variants) v = words.back() + " " + v;
    }
    const auto [heads, tail] = heads_and_tail(variants);
    Rng rng(item_seed(seed, item.id));
    ItemOutcome out;
    out.scored = true;
    out.chosen = predict_prefix(table, heads, tail, rng);
    return out;
  };
}

std::size_t ngram_order_for(const std::vector<MinimalPairItem>& items) {
  std::size_t longest = 1;
  for (const auto& it : items) {
    const auto words = io::split(std::string(io::trim(it.frame_prefix)), ' ');
    const std::size_t governor = it.frame_prefix.empty() ? 0 : squeeze(words.back()).size();
    for (const auto& h : heads_and_tail(it.variants).first) longest = std::max(longest, governor + h.size());
  }
  return longest + 4;
}

ConditionReport evaluate_suite(const Chooser& choose, const std::vector<MinimalPairItem>& items,
                               const std::string& group_key, const std::string& macro_key, bool control) {
  std::vector<ItemOutcome> outcomes(items.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < static_cast<long>(items.size()); ++i) {
    try {
      const auto& item = items[static_cast<std::size_t>(i)];
      if (control && item.control_variants.empty()) continue;
      outcomes[static_cast<std::size_t>(i)] = choose(item, control);
    } catch (...) {
#pragma omp critical
      failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  ConditionReport report;
  report.items = items.size();
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    if (control && item.control_variants.empty()) continue;
    const auto it = item.condition.find(group_key);
    auto& stats = report.conditions[it == item.condition.end() ? "all" : it->second];
    const auto& o = outcomes[i];
    auto record = [&](ConditionStats& s) {
      if (!o.scored) {
        ++s.skipped;
        return;
      }
      ++s.n;
      s.correct += o.chosen == item.correct;
      s.ties += o.tie;
    };
    record(stats);
    if (!macro_key.empty()) {
      const auto c = item.condition.find(macro_key);
      record(stats.by_class[c == item.condition.end() ? "?" : c->second]);
    }
  }
  for (auto it = report.conditions.begin(); it != report.conditions.end();) {
    auto& s = it->second;
    if (s.n == 0) {
      spdlog::warn("condition {}={} has no scored items; omitted", group_key, it->first);
      it = report.conditions.erase(it);
      continue;
    }
    for (auto& [cls, cs] : s.by_class) {
      cs.accuracy = cs.n == 0 ? 0.0 : 100.0 * static_cast<double>(cs.correct) / static_cast<double>(cs.n);
    }
    if (macro_key.empty()) {
      s.accuracy = 100.0 * static_cast<double>(s.correct) / static_cast<double>(s.n);
    } else {
      double sum = 0;
      std::size_t classes = 0;
      for (const auto& [cls, cs] : s.by_class) {
        if (cs.n == 0) continue;
        sum += cs.accuracy;
        ++classes;
      }
      s.accuracy = sum / static_cast<double>(classes);
    }
    ++it;
  }
  return report;
}

std::string condition_report_json(const ConditionReport& r) {
  nlohmann::ordered_json j;
  j["items"] = r.items;
  auto& conds = j["conditions"] = nlohmann::ordered_json::object();
  auto stats_json = [](const ConditionStats& s) {
    return nlohmann::ordered_json{{"accuracy", s.accuracy}, {"n", s.n}, {"correct", s.correct},
                                  {"ties", s.ties}, {"skipped", s.skipped}};
  };
  for (const auto& [name, s] : r.conditions) {
    auto entry = stats_json(s);
    if (!s.by_class.empty()) {
      for (const auto& [cls, cs] : s.by_class) entry["by_class"][cls] = stats_json(cs);
    }
    conds[name] = entry;
  }
  return j.dump(2) + "\n";
}

std::vector<CompletionItem> parse_completion_items(std::string_view tsv) {
  const auto t = io::parse_tsv(tsv, "sentence completion file");
  const auto c_id = t.column("id"), c_s = t.column("sentence"), c_ch = t.column("choices"), c_cor = t.column("correct_index");
  std::vector<CompletionItem> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    CompletionItem it{row[c_id], row[c_s], io::split(row[c_ch], '|'), 0};
    if (it.sentence.find(kGap) == std::string::npos) {
      throw DataError("completion row " + std::to_string(r + 2) + ": sentence lacks the gap marker " + std::string(kGap));
    }
    try {
      it.correct = std::stoul(row[c_cor]);
    } catch (const std::exception&) {
      throw DataError("completion row " + std::to_string(r + 2) + ": bad correct_index");
    }
    if (it.choices.empty() || it.correct >= it.choices.size()) {
      throw DataError("completion row " + std::to_string(r + 2) + ": correct_index out of range");
    }
    out.push_back(std::move(it));
  }
  return out;
}

MinimalPairItem to_minimal_pair(const CompletionItem& item) {
  const auto gap = item.sentence.find(kGap);
  MinimalPairItem m;
  m.id = item.id;
  m.phenomenon = "completion";
  m.frame_prefix = item.sentence.substr(0, gap);
  m.frame_suffix = item.sentence.substr(gap + kGap.size());
  m.variants = item.choices;
  m.correct = item.correct;
  return m;
}

double sentence_completion(const Scorer& scorer, const std::vector<CompletionItem>& items) {
  if (items.empty()) throw DataError("no sentence completion items");
  const auto report = evaluate_suite(scorer_chooser(scorer), [&] {
    std::vector<MinimalPairItem> m;
    for (const auto& it : items) m.push_back(to_minimal_pair(it));
    return m;
  }(), "none");
  if (report.conditions.empty()) return 0.0;
  return report.conditions.begin()->second.accuracy;
}

AdjectivePool adjective_pool(const std::vector<LexiconEntry>& lexicon, std::uint64_t min_frequency,
                             const std::vector<std::string>& excluded_endings, const std::string& pos) {
  std::map<std::string, std::uint64_t> freq;
  for (const auto& e : lexicon) {
    if (e.pos != pos) continue;
    const std::string lemma = lower(e.lemma.empty() ? e.form : e.lemma);
    freq[lemma] += e.frequency;
  }
  AdjectivePool pool;
  for (const auto& [lemma, f] : freq) {
    if (f < min_frequency) continue;
    const bool excluded = std::any_of(excluded_endings.begin(), excluded_endings.end(),
                                      [&](const std::string& e) { return ends_with(lemma, e); });
    if (!excluded) pool.lemmas.push_back(lemma);
  }
  return pool;
}

GermanTemplate parse_german_template(std::string_view text) {
  GermanTemplate t;
  try {
    const auto j = nlohmann::ordered_json::parse(text);
    t.gender_articles = ordered_pairs(j, "gender_articles");
    t.case_determiners = ordered_pairs(j, "case_determiners");
    t.adverbs = json_or(j, "adverbs", t.adverbs);
    t.nominative_suffix = json_or(j, "nominative_suffix", t.nominative_suffix);
    t.oblique_suffix = json_or(j, "oblique_suffix", t.oblique_suffix);
    t.preposition = json_or(j, "preposition", t.preposition);
    t.preposition_article = json_or(j, "preposition_article", t.preposition_article);
    t.adjective_min_frequency = json_or(j, "adjective_min_frequency", t.adjective_min_frequency);
    t.adjective_excluded_endings = json_or(j, "adjective_excluded_endings", t.adjective_excluded_endings);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed German template: ") + e.what());
  }
  return t;
}

std::vector<MinimalPairItem> gen_german_gender(const GermanTemplate& tpl, const std::vector<LexiconEntry>& nouns,
                                               const AdjectivePool& adjectives, const std::vector<int>& conditions,
                                               std::uint64_t seed) {
  if (tpl.gender_articles.size() < 2) throw ConfigError("template needs at least two gender articles");
  std::vector<std::pair<std::string, std::size_t>> selected;  // form, gender index
  std::set<std::string> seen;
  for (const auto& e : nouns) {
    const std::string g = lower(e.feature("gender"));
    if (!has_case(e, "nominative") && !e.feature("case").empty()) continue;
    const auto it = std::find_if(tpl.gender_articles.begin(), tpl.gender_articles.end(),
                                 [&](const auto& p) { return p.first == g; });
    if (it == tpl.gender_articles.end() || !seen.insert(e.form).second) continue;
    selected.emplace_back(e.form, static_cast<std::size_t>(it - tpl.gender_articles.begin()));
  }
  if (selected.empty()) throw DataError("no nouns with a gender listed in the template");
  std::vector<MinimalPairItem> out;
  for (int k : conditions) {
    for (std::size_t i = 0; i < selected.size(); ++i) {
      const auto& [noun, g] = selected[i];
      MinimalPairItem item;
      item.id = "gender-" + std::to_string(k) + "-" + std::to_string(i);
      Rng rng(item_seed(seed, item.id));
      const std::string adj = k > 0 ? pick(adjectives.lemmas, rng) + tpl.nominative_suffix : "";
      const auto middle = interveners(tpl.adverbs, k, adj);
      item.phenomenon = "gender";
      item.condition = {{"interveners", std::to_string(k)}, {"gender", tpl.gender_articles[g].first}};
      for (const auto& [key, article] : tpl.gender_articles) {
        std::vector<std::string> words{article};
        words.insert(words.end(), middle.begin(), middle.end());
        words.push_back(noun);
        item.variants.push_back(join_words(words));
      }
      item.correct = g;
      require_equal_lengths(item);
      out.push_back(std::move(item));
    }
  }
  return out;
}

std::vector<MinimalPairItem> gen_german_case(const GermanTemplate& tpl, const std::vector<LexiconEntry>& nouns,
                                             const AdjectivePool& adjectives, const std::vector<int>& conditions,
                                             std::uint64_t seed) {
  if (tpl.case_determiners.size() != 2) throw ConfigError("template needs exactly two case determiners");
  // lemma -> case -> form
  std::map<std::string, std::map<std::string, std::string>> forms;
  for (const auto& e : nouns) {
    for (const auto& c : cases_of(e)) forms[e.lemma.empty() ? e.form : e.lemma].emplace(c, e.form);
  }
  std::vector<std::pair<std::string, std::array<std::string, 2>>> lemmas;
  for (const auto& [lemma, by_case] : forms) {
    const auto a = by_case.find(tpl.case_determiners[0].first);
    const auto b = by_case.find(tpl.case_determiners[1].first);
    // Only nouns that mark the two cases differently.
    if (a == by_case.end() || b == by_case.end() || lower(a->second) == lower(b->second)) continue;
    lemmas.push_back({lemma, {a->second, b->second}});
  }
  if (lemmas.empty()) throw DataError("no nouns with distinct forms for both cases");
  std::vector<MinimalPairItem> out;
  for (int k : conditions) {
    for (std::size_t i = 0; i < lemmas.size(); ++i) {
      const auto& [lemma, pair] = lemmas[i];
      Rng coin(item_seed(seed, "case-coin-" + lemma));
      const std::size_t c = coin.below(2);
      MinimalPairItem item;
      item.id = "case-" + std::to_string(k) + "-" + std::to_string(i);
      Rng rng(item_seed(seed, item.id));
      const std::string adj = k > 0 ? pick(adjectives.lemmas, rng) + tpl.oblique_suffix : "";
      const auto middle = interveners(tpl.adverbs, k, adj);
      item.phenomenon = "case";
      item.condition = {{"interveners", std::to_string(k)},
                        {"case", tpl.case_determiners[c].first},
                        {"noun_length", std::to_string(utf8::length(pair[c]))},
                        {"other_form_length", std::to_string(utf8::length(pair[1 - c]))}};
      for (const auto& [key, det] : tpl.case_determiners) {
        std::vector<std::string> words{det};
        words.insert(words.end(), middle.begin(), middle.end());
        words.push_back(pair[c]);
        item.variants.push_back(join_words(words));
      }
      item.correct = c;
      require_equal_lengths(item);
      out.push_back(std::move(item));
    }
  }
  return out;
}

std::vector<MinimalPairItem> gen_subcat_mit(const GermanTemplate& tpl, const std::vector<std::string>& frames,
                                            const AdjectivePool& adjectives, const std::vector<int>& conditions,
                                            std::uint64_t seed) {
  std::vector<MinimalPairItem> out;
  for (int k : conditions) {
    if (k < 0 || static_cast<std::size_t>(k) > tpl.adverbs.size()) {
      throw ConfigError("condition " + std::to_string(k) + " needs " + std::to_string(k) + " adverbs in the template");
    }
    for (std::size_t i = 0; i < frames.size(); ++i) {
      const auto gap = frames[i].find(kGap);
      if (gap == std::string::npos) throw DataError("frame " + std::to_string(i) + " lacks the gap marker");
      MinimalPairItem item;
      item.id = "subcat-" + std::to_string(k) + "-" + std::to_string(i);
      Rng rng(item_seed(seed, item.id));
      const std::string stem = pick(adjectives.lemmas, rng);
      std::vector<std::string> words{tpl.preposition_article};
      words.insert(words.end(), tpl.adverbs.begin(), tpl.adverbs.begin() + k);
      item.phenomenon = "subcat";
      item.condition = {{"interveners", std::to_string(k)}, {"length_bias", "correct-longer"}};
      item.frame_prefix = join_words({std::string(io::trim(frames[i].substr(0, gap))), tpl.preposition});
      item.frame_suffix = std::string(io::trim(frames[i].substr(gap + kGap.size())));
      for (const auto& suffix : {tpl.nominative_suffix, tpl.oblique_suffix}) {
        auto w = words;
        w.push_back(stem + suffix);
        item.variants.push_back(join_words(w));
      }
      item.correct = 1;
      item.control_variants = item.variants;
      out.push_back(std::move(item));
    }
  }
  return out;
}

ItalianKind parse_italian_kind(std::string_view name) {
  if (name == "noun-gender") return ItalianKind::noun_gender;
  if (name == "adj-gender") return ItalianKind::adj_gender;
  if (name == "adj-number") return ItalianKind::adj_number;
  throw ConfigError("unknown Italian agreement kind '" + std::string(name) + "'");
}

ItalianTemplate parse_italian_template(std::string_view text) {
  ItalianTemplate t;
  try {
    const auto j = nlohmann::ordered_json::parse(text);
    for (const auto& [k, v] : ordered_pairs(j, "articles")) t.articles[k] = v;
    t.adverbs = json_or(j, "adverbs", t.adverbs);
    t.masculine_ending = json_or(j, "masculine_ending", t.masculine_ending);
    t.feminine_ending = json_or(j, "feminine_ending", t.feminine_ending);
    t.feminine_plural_ending = json_or(j, "feminine_plural_ending", t.feminine_plural_ending);
    t.invariant_adjective_ending = json_or(j, "invariant_adjective_ending", t.invariant_adjective_ending);
    t.noun_min_frequency = json_or(j, "noun_min_frequency", t.noun_min_frequency);
    t.noun_frequent = json_or(j, "noun_frequent", t.noun_frequent);
    t.max_frequency_ratio = json_or(j, "max_frequency_ratio", t.max_frequency_ratio);
    t.adjective_min_frequency = json_or(j, "adjective_min_frequency", t.adjective_min_frequency);
    t.adj_gender_min_frequency = json_or(j, "adj_gender_min_frequency", t.adj_gender_min_frequency);
    t.adj_number_min_frequency = json_or(j, "adj_number_min_frequency", t.adj_number_min_frequency);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed Italian template: ") + e.what());
  }
  for (const char* key : {"m", "f", "f.pl"}) {
    if (!t.articles.count(key)) throw ConfigError(std::string("Italian template lacks article '") + key + "'");
  }
  return t;
}

namespace {

struct FormPair {
  std::string stem;
  std::string a, b;  // e.g. masculine / feminine form
  std::uint64_t fa = 0, fb = 0;
};

// Pairs entries of `pos` by stem: `a` matches (feat_a, ending_a), `b` matches (feat_b, ending_b).
std::vector<FormPair> pair_forms(const std::vector<LexiconEntry>& lexicon, const std::string& pos,
                                 const std::map<std::string, std::string>& feat_a, const std::string& ending_a,
                                 const std::map<std::string, std::string>& feat_b, const std::string& ending_b) {
  auto matches = [](const LexiconEntry& e, const std::map<std::string, std::string>& f) {
    return std::all_of(f.begin(), f.end(), [&](const auto& kv) { return lower(e.feature(kv.first)) == kv.second; });
  };
  std::map<std::string, FormPair> by_stem;
  for (const auto& e : lexicon) {
    if (e.pos != pos) continue;
    const std::string form = lower(e.form);
    for (int side = 0; side < 2; ++side) {
      const auto& f = side == 0 ? feat_a : feat_b;
      const auto& ending = side == 0 ? ending_a : ending_b;
      if (!matches(e, f) || !ends_with(form, ending) || form.size() <= ending.size()) continue;
      const std::string stem = form.substr(0, form.size() - ending.size());
      auto& p = by_stem[stem];
      p.stem = stem;
      (side == 0 ? p.a : p.b) = form;
      (side == 0 ? p.fa : p.fb) += e.frequency;
    }
  }
  std::vector<FormPair> out;
  for (auto& [stem, p] : by_stem) {
    if (!p.a.empty() && !p.b.empty()) out.push_back(std::move(p));
  }
  return out;
}

bool attested(std::u32string_view training, const std::vector<std::string>& words) {
  return !training.empty() && is_attested(training, squeeze(join_words(words)));
}

}  // namespace

std::vector<MinimalPairItem> gen_italian_agreement(const ItalianTemplate& tpl, const std::vector<LexiconEntry>& lexicon,
                                                   ItalianKind kind, std::u32string_view training,
                                                   std::uint64_t seed) {
  std::vector<MinimalPairItem> out;
  auto finish = [&](MinimalPairItem item) {
    require_equal_lengths(item);
    out.push_back(std::move(item));
  };
  if (kind == ItalianKind::noun_gender) {
    const auto nouns = pair_forms(lexicon, "NOUN", {{"gender", "m"}}, tpl.masculine_ending, {{"gender", "f"}},
                                  tpl.feminine_ending);
    std::vector<std::string> adjectives;
    std::map<std::string, std::uint64_t> adj_freq;
    for (const auto& e : lexicon) {
      // Plural forms share the ending but cannot modify a singular noun.
      if (e.pos != "ADJ" || lower(e.feature("number")) == "pl") continue;
      if (ends_with(lower(e.form), tpl.invariant_adjective_ending)) adj_freq[lower(e.form)] += e.frequency;
    }
    for (const auto& [form, f] : adj_freq) {
      if (f >= tpl.adjective_min_frequency) adjectives.push_back(form);
    }
    if (adjectives.empty()) throw DataError("no invariant adjectives pass the frequency threshold");
    for (const auto& p : nouns) {
      if (p.fa < tpl.noun_min_frequency || p.fb < tpl.noun_min_frequency) continue;
      const bool balanced = static_cast<double>(std::max(p.fa, p.fb)) <= tpl.max_frequency_ratio * static_cast<double>(std::min(p.fa, p.fb));
      const bool frequent = p.fa >= tpl.noun_frequent && p.fb >= tpl.noun_frequent;
      if (!balanced && !frequent) continue;
      Rng rng(item_seed(seed, "it-noun-" + p.stem));
      auto order = adjectives;
      rng.shuffle(order);
      const auto adj = std::find_if(order.begin(), order.end(), [&](const std::string& a) {
        return !attested(training, {a, p.a}) && !attested(training, {a, p.b});
      });
      if (adj == order.end()) continue;
      for (int g = 0; g < 2; ++g) {
        MinimalPairItem item;
        item.id = "it-noun-gender-" + p.stem + (g == 0 ? "-m" : "-f");
        item.phenomenon = "it-noun-gender";
        item.condition = {{"gender", g == 0 ? "m" : "f"}, {"interveners", "1"}};
        const std::string& noun = g == 0 ? p.a : p.b;
        item.variants = {join_words({tpl.articles.at("m"), *adj, noun}), join_words({tpl.articles.at("f"), *adj, noun})};
        item.correct = static_cast<std::size_t>(g);
        finish(std::move(item));
      }
    }
    return out;
  }

  const bool gender = kind == ItalianKind::adj_gender;
  const auto adjs = gender ? pair_forms(lexicon, "ADJ", {{"gender", "m"}, {"number", "sg"}}, tpl.masculine_ending,
                                        {{"gender", "f"}, {"number", "sg"}}, tpl.feminine_ending)
                           : pair_forms(lexicon, "ADJ", {{"gender", "f"}, {"number", "sg"}}, tpl.feminine_ending,
                                        {{"gender", "f"}, {"number", "pl"}}, tpl.feminine_plural_ending);
  const std::uint64_t min_freq = gender ? tpl.adj_gender_min_frequency : tpl.adj_number_min_frequency;
  if (tpl.adverbs.empty()) throw ConfigError("Italian template lists no adverbs");
  const std::string art_a = gender ? tpl.articles.at("m") : tpl.articles.at("f");
  const std::string art_b = gender ? tpl.articles.at("f") : tpl.articles.at("f.pl");
  for (const auto& p : adjs) {
    if (p.fa < min_freq || p.fb < min_freq) continue;
    Rng rng(item_seed(seed, std::string(gender ? "it-adj-gender-" : "it-adj-number-") + p.stem));
    auto order = tpl.adverbs;
    rng.shuffle(order);
    const auto adv = std::find_if(order.begin(), order.end(), [&](const std::string& a) {
      return !attested(training, {a, p.a}) && !attested(training, {a, p.b});
    });
    if (adv == order.end()) continue;
    for (int side = 0; side < 2; ++side) {
      MinimalPairItem item;
      const std::string label = gender ? (side == 0 ? "m" : "f") : (side == 0 ? "sg" : "pl");
      item.id = std::string(gender ? "it-adj-gender-" : "it-adj-number-") + p.stem + "-" + label;
      item.phenomenon = gender ? "it-adj-gender" : "it-adj-number";
      item.condition = {{gender ? "gender" : "number", label}, {"interveners", "1"}};
      const std::string& art = side == 0 ? art_a : art_b;
      item.variants = {join_words({art, *adv, p.a}), join_words({art, *adv, p.b})};
      item.correct = static_cast<std::size_t>(side);
      finish(std::move(item));
    }
  }
  return out;
}

}  // namespace cnlm
