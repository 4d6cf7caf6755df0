#include "cli.hpp"

#include <omp.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "cnlm/boundary.hpp"
#include "cnlm/corpus.hpp"
#include "cnlm/error.hpp"
#include "cnlm/io.hpp"
#include "cnlm/lm.hpp"
#include "cnlm/manifest.hpp"
#include "cnlm/network.hpp"
#include "cnlm/ngram.hpp"
#include "cnlm/phonotactics.hpp"
#include "cnlm/probing.hpp"
#include "cnlm/syntax.hpp"
#include "cnlm/utf8.hpp"

namespace cnlm {
namespace {

using Json = nlohmann::ordered_json;

// Shortest round-trip representation that always reads as a float.
std::string format_number(double v) {
  std::string s = fmt::format("{}", v);
  if (s.find_first_of(".eni") == std::string::npos) s += ".0";
  return s;
}

// State shared by all subcommands of one invocation.
struct Context {
  std::ostream* out = nullptr;
  std::vector<std::string> inputs;
  std::map<std::string, std::string> results;
  std::map<std::string, std::string> config;
  std::uint64_t seed = 0;
  bool deterministic = false;

  void input(const std::string& path) {
    if (!path.empty()) inputs.push_back(path);
  }
  // Writes to `path` atomically, or to stdout when no path was given.
  void emit(const std::string& role, const std::string& path, const std::string& contents) {
    if (path.empty()) {
      *out << contents;
      return;
    }
    io::write_file_atomic(path, contents);
    results[role] = path;
  }
};

AlignedCorpus load_corpus(const std::string& path) {
  const auto text = io::read_file(path);
  return std::filesystem::path(path).extension() == ".tsv" ? load_token_corpus(text) : load_paragraph_corpus(text);
}

std::string vocab_json(const Vocabulary& v) {
  return Json{{"threshold", v.threshold()}, {"symbols", v.symbols()}}.dump(2) + "\n";
}

Vocabulary load_vocab(const std::string& path) {
  try {
    const auto j = nlohmann::json::parse(io::read_file(path));
    return Vocabulary(j.at("symbols").get<std::vector<std::string>>(), j.at("threshold").get<std::uint64_t>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed vocabulary " + path + ": " + e.what());
  }
}

std::vector<std::string> token_forms(const AlignedCorpus& c) {
  std::vector<std::string> out;
  out.reserve(c.tokens.size());
  for (const auto& t : c.tokens) out.push_back(t.form);
  return out;
}

std::vector<std::size_t> paragraph_positions(const AlignedCorpus& c) {
  std::vector<std::size_t> out;
  for (auto t : c.paragraph_starts) {
    if (t < c.tokens.size()) out.push_back(c.tokens[t].start);
  }
  return out;
}

bool is_char_model(const Checkpoint& c) {
  return c.config.kind == ModelKind::char_lstm || c.config.kind == ModelKind::char_rnn;
}

void require_char_model(const Checkpoint& c, const char* what) {
  if (!is_char_model(c)) throw ConfigError(std::string(what) + " needs a character language model");
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  for (const auto& part : io::split(s, ',')) {
    try {
      out.push_back(std::stoi(part));
    } catch (const std::exception&) {
      throw ConfigError("bad integer list '" + s + "'");
    }
  }
  return out;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::vector<std::string> out;
  for (auto& line : io::split_lines(io::read_file(path))) {
    const auto t = io::trim(line);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

// Config file first, then --set overrides (flags win).
LMConfig resolve_config(const std::string& file, const std::vector<std::string>& sets, LMConfig base = {}) {
  std::map<std::string, std::string> kv = base.to_map();
  if (!file.empty()) {
    for (auto& [k, v] : parse_config(io::read_file(file), file)) kv[k] = v;
  }
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    kv[std::string(io::trim(s.substr(0, eq)))] = std::string(io::trim(s.substr(eq + 1)));
  }
  auto cfg = LMConfig::from_map(kv);
  cfg.validate();
  return cfg;
}

ReprFn repr_for(const Checkpoint& ckpt) {
  switch (ckpt.config.kind) {
    case ModelKind::word_lstm:
      return [&ckpt](const std::string& form) { return output_embedding(ckpt, form).value_or(std::vector<double>{}); };
    case ModelKind::char_autoencoder:
      return [&ckpt](const std::string& form) { return autoencoder_repr(ckpt, form); };
    default:
      return [&ckpt](const std::string& form) { return word_repr(ckpt, form); };
  }
}

// ---- subcommand option blocks ----

struct TrainArgs {
  std::string config, train, dev, output, vocab, resume;
  std::vector<std::string> sets;
};

struct ProbeArgs {
  std::string model, lexicon, suffix, pos_a = "NOUN", pos_b = "VERB", oov = "random-guess", output, pool;
  std::size_t n_train = 10, splits = 100, per_class = 0, n_number = 15;
  std::uint64_t seed = 1;
  double l2 = 1e-3;
};

struct BoundaryArgs {
  std::string model, corpus, mode = "single", text, output;
  std::optional<std::size_t> unit;
  int direction = 0;
  bool by_magnitude = false;
  std::size_t samples = 2000, window = 40, top = 20, train_chars = 0, test_chars = 0, n_train = 1000, n_test = 1000;
  std::uint64_t seed = 1;
  double l2 = 1e-3;
};

struct MinpairArgs {
  std::string phenomenon, template_path, lexicon, frames, training, conditions = "0,1,2,3", model, items, output,
      oov = "subset", group_key = "interveners", macro_key;
  std::optional<std::uint64_t> tie_seed;
  std::uint64_t seed = 1;
  bool control = false;
};

// The unit most correlated with boundaries on balanced samples.
std::pair<std::size_t, int> auto_unit(const Checkpoint& ckpt, const AlignedCorpus& corpus, std::size_t samples,
                                      std::uint64_t seed, bool by_magnitude) {
  const auto picked = sample_balanced_positions(corpus, samples, 40, {}, seed);
  const auto scores = scan_units(ckpt, picked, by_magnitude);
  spdlog::info("auto-selected unit {} (r = {:.3f})", scores.front().flat, scores.front().pearson_r);
  return {scores.front().flat, scores.front().pearson_r >= 0 ? 1 : -1};
}

BoundaryOptions boundary_options(const BoundaryArgs& a, const Checkpoint& ckpt, const AlignedCorpus& corpus) {
  BoundaryOptions o;
  o.mode = parse_classifier_mode(a.mode);
  o.l2 = a.l2;
  o.top_k = a.top;
  if (o.mode == ClassifierMode::single_unit) {
    if (a.unit) {
      o.unit = *a.unit;
      o.direction = a.direction == 0 ? 1 : a.direction;
    } else {
      std::tie(o.unit, o.direction) = auto_unit(ckpt, corpus, a.samples, a.seed, a.by_magnitude);
      if (a.direction != 0) o.direction = a.direction;
    }
  }
  return o;
}

std::string errors_tsv(const SegReport& r) {
  io::Table t;
  t.header = {"type", "string", "count"};
  for (const auto& [s, n] : r.oversegmentations) t.rows.push_back({"over", s, std::to_string(n)});
  for (const auto& [s, n] : r.undersegmentations) t.rows.push_back({"under", s, std::to_string(n)});
  return io::format_tsv(t);
}

std::vector<MinimalPairItem> generate_items(const MinpairArgs& a) {
  const auto lexicon = a.lexicon.empty() ? std::vector<LexiconEntry>{} : parse_lexicon(io::read_file(a.lexicon));
  const auto ph = a.phenomenon;
  if (ph.rfind("it-", 0) == 0) {
    const auto tpl = parse_italian_template(io::read_file(a.template_path));
    std::u32string training;
    if (!a.training.empty()) training = load_corpus(a.training).stream.chars;
    else spdlog::warn("no training corpus given; attested combinations are not excluded");
    return gen_italian_agreement(tpl, lexicon, parse_italian_kind(ph.substr(3)), training, a.seed);
  }
  const auto tpl = parse_german_template(io::read_file(a.template_path));
  const auto conditions = parse_int_list(a.conditions);
  const auto adjectives = adjective_pool(lexicon, tpl.adjective_min_frequency, tpl.adjective_excluded_endings);
  std::vector<LexiconEntry> nouns;
  for (const auto& e : lexicon) {
    if (e.pos == "NOUN") nouns.push_back(e);
  }
  if (ph == "gender") return gen_german_gender(tpl, nouns, adjectives, conditions, a.seed);
  if (ph == "case") return gen_german_case(tpl, nouns, adjectives, conditions, a.seed);
  if (ph == "subcat") {
    if (a.frames.empty()) throw ConfigError("subcat items need --frames");
    return gen_subcat_mit(tpl, read_lines(a.frames), adjectives, conditions, a.seed);
  }
  throw ConfigError("unknown phenomenon '" + ph + "' (gender, case, subcat, it-noun-gender, it-adj-gender, it-adj-number)");
}

std::unique_ptr<Scorer> make_scorer(const Checkpoint& ckpt, const std::string& oov) {
  if (ckpt.config.kind == ModelKind::word_lstm) {
    if (oov != "subset" && oov != "all") throw ConfigError("--oov must be subset or all");
    return std::make_unique<WordLMScorer>(ckpt, oov == "subset");
  }
  require_char_model(ckpt, "minimal-pair scoring");
  return std::make_unique<CharLMScorer>(ckpt);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Character-level language models and linguistic probes", "cnlm"};
  app.require_subcommand(1);
  app.fallthrough();

  Context ctx;
  ctx.out = &out;
  int threads = 0;
  std::string manifest_path, log_level = "info";
  app.add_option("--threads", threads, "OpenMP threads (0: runtime default)")->check(CLI::NonNegativeNumber);
  app.add_flag("--deterministic", ctx.deterministic, "Reproducible mode: one thread, no wall-clock budgets");
  app.add_option("--manifest", manifest_path, "Write an experiment manifest (JSON) after success");
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

  std::function<int()> action;
  auto on = [&action](CLI::App* sub, std::function<int()> fn) { sub->callback([&action, fn] { action = fn; }); };

  // preprocess
  std::string pp_in, pp_out;
  bool pp_strip = false;
  auto* pp = app.add_subcommand("preprocess", "Lower-case and strip whitespace from raw text");
  pp->add_option("--input", pp_in, "Raw UTF-8 text")->required();
  pp->add_option("--output", pp_out, "Whitespace-free text");
  pp->add_flag("--strip-punct", pp_strip, "Also remove punctuation");
  on(pp, [&] {
    ctx.input(pp_in);
    ctx.emit("stream", pp_out, preprocess(io::read_file(pp_in), !pp_strip).text() + "\n");
    return 0;
  });

  // build-vocab
  std::string bv_in, bv_out;
  std::uint64_t bv_threshold = 1;
  auto* bv = app.add_subcommand("build-vocab", "Character vocabulary of a corpus");
  bv->add_option("--input", bv_in, "Corpus (one paragraph per line, or token TSV)")->required();
  bv->add_option("--threshold", bv_threshold, "Minimum character frequency");
  bv->add_option("--output", bv_out, "Vocabulary JSON");
  on(bv, [&] {
    ctx.input(bv_in);
    const auto corpus = load_corpus(bv_in);
    ctx.emit("vocab", bv_out, vocab_json(build_vocabulary(corpus.stream, bv_threshold)));
    return 0;
  });

  // split
  std::string sp_in, sp_dir;
  double sp_dev = 0.1, sp_test = 0.1;
  std::uint64_t sp_seed = 1;
  auto* sp = app.add_subcommand("split", "Random paragraph-level train/dev/test split");
  sp->add_option("--input", sp_in, "Corpus, one paragraph per line")->required();
  sp->add_option("--out-dir", sp_dir, "Directory for train.txt, dev.txt and test.txt")->required();
  sp->add_option("--dev-fraction", sp_dev);
  sp->add_option("--test-fraction", sp_test);
  sp->add_option("--seed", sp_seed);
  on(sp, [&] {
    ctx.input(sp_in);
    ctx.seed = sp_seed;
    const auto text = io::read_file(sp_in);
    std::vector<std::string> paragraphs;
    for (auto& line : io::split_lines(text)) {
      if (!io::trim(line).empty()) paragraphs.push_back(line);
    }
    const auto split = split_corpus(load_paragraph_corpus(text), sp_dev, sp_test, sp_seed);
    std::filesystem::create_directories(sp_dir);
    auto write = [&](const char* name, const std::vector<std::size_t>& ids) {
      std::string body;
      for (auto id : ids) body += paragraphs.at(id) + "\n";
      const auto path = (std::filesystem::path(sp_dir) / (std::string(name) + ".txt")).string();
      ctx.emit(name, path, body);
    };
    write("train", split.train_ids);
    write("dev", split.dev_ids);
    write("test", split.test_ids);
    return 0;
  });

  // train
  TrainArgs tr;
  auto* trn = app.add_subcommand("train", "Train a language model or autoencoder");
  trn->add_option("--config", tr.config, "key = value config file");
  trn->add_option("--set", tr.sets, "Config override key=value (repeatable; wins over the file)");
  trn->add_option("--train", tr.train, "Training corpus (autoencoder: one form per line)")->required();
  trn->add_option("--dev", tr.dev, "Dev corpus for learning-rate decay");
  trn->add_option("--vocab", tr.vocab, "Fixed character vocabulary JSON");
  trn->add_option("--resume", tr.resume, "Continue from this checkpoint");
  trn->add_option("--output", tr.output, "Checkpoint path")->required();
  on(trn, [&] {
    ctx.input(tr.train);
    ctx.input(tr.dev);
    ctx.input(tr.vocab);
    std::optional<Checkpoint> resumed;
    if (!tr.resume.empty()) {
      ctx.input(tr.resume);
      resumed = load_checkpoint(tr.resume);
    }
    const LMConfig cfg = resolve_config(tr.config, tr.sets, resumed ? resumed->config : LMConfig{});
    if (ctx.deterministic && cfg.wall_clock_seconds > 0) {
      throw ConfigError("wall_clock_seconds is not reproducible; unset it in deterministic mode");
    }
    if (cfg.char_budget == 0) spdlog::warn("char_budget is 0: the model is saved untrained");
    ctx.config = cfg.to_map();
    ctx.seed = cfg.seed;
    TrainOptions opts;
    opts.on_progress = [](const TrainProgress& p) {
      spdlog::info("updates {} chars {} train bpc {:.4f}{} lr {:.4g}", p.updates, p.trained_chars, p.train_bpc,
                   p.dev_bpc ? fmt::format(" dev bpc {:.4f}", *p.dev_bpc) : "", p.learning_rate);
      return true;
    };
    Checkpoint ckpt;
    if (cfg.kind == ModelKind::char_autoencoder) {
      if (resumed) throw ConfigError("autoencoders cannot be resumed");
      ckpt = train_autoencoder(read_lines(tr.train), cfg);
    } else if (cfg.kind == ModelKind::word_lstm) {
      if (resumed) throw ConfigError("word models cannot be resumed");
      const auto train = load_corpus(tr.train);
      const auto forms = token_forms(train);
      if (!tr.dev.empty()) {
        const auto vocab = build_word_vocabulary(forms, cfg.vocab_limit);
        opts.dev = vocab.encode_tokens(token_forms(load_corpus(tr.dev)));
      }
      ckpt = train_wordnlm(forms, cfg, opts);
    } else {
      const auto train = load_corpus(tr.train);
      const Vocabulary vocab = resumed ? resumed->vocab
                               : tr.vocab.empty() ? build_vocabulary(train.stream, cfg.vocab_threshold)
                                                  : load_vocab(tr.vocab);
      if (!tr.dev.empty()) opts.dev = vocab.encode(load_corpus(tr.dev).stream.chars);
      opts.paragraph_starts = paragraph_positions(train);
      const auto ids = vocab.encode(train.stream.chars);
      if (resumed) {
        ckpt = std::move(*resumed);
        ckpt.config = cfg;
        continue_training(ckpt, ids, opts);
      } else {
        ckpt = train_lm(ids, vocab, cfg, opts);
      }
    }
    save_checkpoint(ckpt, tr.output);
    ctx.results["checkpoint"] = tr.output;
    Json summary{{"kind", to_string(ckpt.config.kind)},
                 {"updates", ckpt.updates},
                 {"trained_symbols", ckpt.trained_chars},
                 {"learning_rate", ckpt.learning_rate},
                 {"dev_bpc_history", ckpt.dev_bpc_history}};
    out << summary.dump(2) << "\n";
    return 0;
  });

  // eval-bpc / eval-ppl
  std::string ev_model, ev_in, ev_out;
  auto* eb = app.add_subcommand("eval-bpc", "Bits per character of a character model on a corpus");
  auto* ep = app.add_subcommand("eval-ppl", "Perplexity of a word model on a corpus");
  for (auto* s : {eb, ep}) {
    s->add_option("--model", ev_model)->required();
    s->add_option("--input", ev_in)->required();
    s->add_option("--output", ev_out, "Result JSON");
  }
  on(eb, [&] {
    ctx.input(ev_in);
    const auto ckpt = load_checkpoint(ev_model);
    require_char_model(ckpt, "eval-bpc");
    const auto corpus = load_corpus(ev_in);
    Json j{{"bpc", evaluate_bpc(ckpt, ckpt.vocab.encode(corpus.stream.chars))},
           {"chars", corpus.stream.size()},
           {"unknown_rate", unk_rate(ckpt.vocab, corpus.stream)}};
    ctx.emit("bpc", ev_out, j.dump(2) + "\n");
    return 0;
  });
  on(ep, [&] {
    ctx.input(ev_in);
    const auto ckpt = load_checkpoint(ev_model);
    if (ckpt.config.kind != ModelKind::word_lstm) throw ConfigError("eval-ppl needs a word model");
    const auto forms = token_forms(load_corpus(ev_in));
    Json j{{"perplexity", evaluate_perplexity(ckpt, ckpt.vocab.encode_tokens(forms))}, {"tokens", forms.size()}};
    ctx.emit("perplexity", ev_out, j.dump(2) + "\n");
    return 0;
  });

  // score
  std::string sc_model, sc_text, sc_context = ".";
  bool sc_bits = false;
  auto* sc = app.add_subcommand("score", "Log-likelihood of a string (nats)");
  sc->add_option("--model", sc_model)->required();
  sc->add_option("--text", sc_text, "String to score")->required();
  sc->add_option("--context", sc_context, "Left context (conditions, does not count)");
  sc->add_flag("--bits", sc_bits, "Report base-2 log-likelihood");
  on(sc, [&] {
    const auto ckpt = load_checkpoint(sc_model);
    const auto ll = score(ckpt, sc_text, sc_context);
    out << format_number(sc_bits ? ll.bits() : ll.nats) << "\n";
    return 0;
  });

  // trace
  std::string tc_model, tc_text, tc_context = ".", tc_out;
  bool tc_cells = false;
  auto* tc = app.add_subcommand("trace", "Per-character hidden states and log-probabilities");
  tc->add_option("--model", tc_model)->required();
  tc->add_option("--text", tc_text)->required();
  tc->add_option("--context", tc_context);
  tc->add_flag("--cells", tc_cells, "Also dump LSTM cell states");
  tc->add_option("--output", tc_out, "TSV");
  on(tc, [&] {
    const auto ckpt = load_checkpoint(tc_model);
    require_char_model(ckpt, "trace");
    const auto chars = preprocess(tc_text).chars;
    const auto rec = trace_ids(ckpt, encode_text(ckpt.vocab, tc_text), encode_text(ckpt.vocab, tc_context), tc_cells);
    io::Table t;
    t.header = {"position", "char", "log_prob"};
    for (std::size_t l = 0; l < rec.layers; ++l) {
      for (std::size_t u = 0; u < rec.hidden; ++u) t.header.push_back(fmt::format("h{}.{}", l, u));
    }
    const bool cells = tc_cells && !rec.c.empty();
    if (cells) {
      for (std::size_t l = 0; l < rec.layers; ++l) {
        for (std::size_t u = 0; u < rec.hidden; ++u) t.header.push_back(fmt::format("c{}.{}", l, u));
      }
    }
    const std::size_t width = rec.layers * rec.hidden;
    for (std::size_t p = 0; p < rec.positions; ++p) {
      std::vector<std::string> row{std::to_string(p), utf8::encode(std::u32string(1, chars[p])),
                                   format_number(rec.log_prob[p])};
      for (std::size_t k = 0; k < width; ++k) row.push_back(format_number(rec.h[p * width + k]));
      if (cells) {
        for (std::size_t k = 0; k < width; ++k) row.push_back(format_number(rec.c[p * width + k]));
      }
      t.rows.push_back(std::move(row));
    }
    ctx.emit("trace", tc_out, io::format_tsv(t));
    return 0;
  });

  // probe
  ProbeArgs pr;
  auto* probe = app.add_subcommand("probe", "Diagnostic classifiers on word representations");
  probe->require_subcommand(1);
  auto* pwc = probe->add_subcommand("word-class", "Noun/verb (or any two POS) from representations");
  auto* pnum = probe->add_subcommand("number", "Singular/plural with held-out plural classes");
  for (auto* s : {pwc, pnum}) {
    s->add_option("--model", pr.model)->required();
    s->add_option("--lexicon", pr.lexicon)->required();
    s->add_option("--splits", pr.splits);
    s->add_option("--seed", pr.seed);
    s->add_option("--l2", pr.l2);
    s->add_option("--output", pr.output, "Result JSON");
  }
  pwc->add_option("--suffix", pr.suffix, "Shared word ending")->required();
  pwc->add_option("--pos-a", pr.pos_a, "Class labelled 1");
  pwc->add_option("--pos-b", pr.pos_b, "Class labelled 0");
  pwc->add_option("--n-train", pr.n_train, "Training items per class and split");
  pwc->add_option("--per-class", pr.per_class, "Pool size per class (0: all)");
  pwc->add_option("--oov", pr.oov, "random-guess or subset (word models)");
  pwc->add_option("--pool", pr.pool, "Also write the item pool TSV");
  pnum->add_option("--n-per-class", pr.n_number, "Training singulars and plurals per class");
  on(pwc, [&] {
    ctx.input(pr.lexicon);
    ctx.seed = pr.seed;
    const auto ckpt = load_checkpoint(pr.model);
    const auto lexicon = parse_lexicon(io::read_file(pr.lexicon));
    WordClassSpec spec{pr.suffix, pr.pos_a, pr.pos_b, pr.per_class, pr.seed};
    const auto pool = build_word_class_dataset(lexicon, repr_for(ckpt), spec);
    if (!pr.pool.empty()) ctx.emit("pool", pr.pool, format_pool(pool));
    const ProbeOptions opts{pr.n_train, pr.splits, pr.seed, pr.l2};
    const bool missing = std::any_of(pool.begin(), pool.end(), [](const ProbeExample& e) { return e.repr.empty(); });
    const auto result = missing ? oov_policy_eval(pool, opts, parse_oov_mode(pr.oov)) : run_probe(pool, opts);
    ctx.emit("probe", pr.output,
             probe_result_json(result, {{"task", "word-class"},
                                        {"suffix", pr.suffix},
                                        {"model", to_string(ckpt.config.kind)},
                                        {"items", std::to_string(pool.size())}}));
    return 0;
  });
  on(pnum, [&] {
    ctx.input(pr.lexicon);
    ctx.seed = pr.seed;
    const auto ckpt = load_checkpoint(pr.model);
    const auto data = build_number_dataset(parse_lexicon(io::read_file(pr.lexicon)), repr_for(ckpt));
    const ProbeOptions opts{pr.n_number, pr.splits, pr.seed, pr.l2};
    Json j = Json::object();
    for (const auto& [cls, r] : run_number_probe(data, pr.n_number, opts)) {
      j[cls] = Json::parse(probe_result_json(r, {{"test_class", cls}}));
    }
    ctx.emit("probe", pr.output, j.dump(2) + "\n");
    return 0;
  });

  // boundary
  BoundaryArgs ba;
  auto* bd = app.add_subcommand("boundary", "Word-boundary tracking analyses");
  bd->require_subcommand(1);
  auto* bscan = bd->add_subcommand("scan", "Correlate every unit with word-final positions");
  auto* bf1 = bd->add_subcommand("f1", "Boundary classifier on running text");
  auto* bbal = bd->add_subcommand("balanced", "Boundary classifier on balanced samples");
  auto* berr = bd->add_subcommand("errors", "Over- and undersegmentation lists");
  auto* bprof = bd->add_subcommand("profile", "One unit's activation along a snippet");
  for (auto* s : {bscan, bf1, bbal, berr, bprof}) {
    s->add_option("--model", ba.model)->required();
    s->add_option("--output", ba.output);
    s->add_option("--seed", ba.seed);
  }
  for (auto* s : {bscan, bf1, bbal, berr}) s->add_option("--corpus", ba.corpus)->required();
  for (auto* s : {bf1, bbal, berr}) {
    s->add_option("--mode", ba.mode, "single or full");
    s->add_option("--unit", ba.unit, "Flat unit index (single mode; default: best by scan)");
    s->add_option("--direction", ba.direction, "+1 or -1 (default: sign of the unit's correlation)");
    s->add_option("--l2", ba.l2);
  }
  for (auto* s : {bscan, bf1, bbal, berr}) {
    s->add_option("--samples", ba.samples, "Balanced samples for the unit scan");
    s->add_flag("--by-magnitude", ba.by_magnitude, "Rank units by |r| instead of r");
  }
  for (auto* s : {bf1, berr}) {
    s->add_option("--train-chars", ba.train_chars, "Classifier training prefix")->required();
    s->add_option("--test-chars", ba.test_chars, "Test span after the prefix (0: rest)");
    s->add_option("--top", ba.top, "List length for error analysis");
  }
  bscan->add_option("--window", ba.window);
  bscan->add_option("--top", ba.top, "Rows to report");
  bbal->add_option("--n-train", ba.n_train);
  bbal->add_option("--n-test", ba.n_test);
  bprof->add_option("--text", ba.text)->required();
  bprof->add_option("--unit", ba.unit)->required();
  auto bload = [&] {
    ctx.input(ba.corpus);
    ctx.seed = ba.seed;
    auto ckpt = load_checkpoint(ba.model);
    require_char_model(ckpt, "boundary analysis");
    return ckpt;
  };
  on(bscan, [&] {
    const auto ckpt = bload();
    const auto corpus = load_corpus(ba.corpus);
    const auto scores = scan_units(ckpt, sample_balanced_positions(corpus, ba.samples, ba.window, {}, ba.seed), ba.by_magnitude);
    io::Table t;
    t.header = {"rank", "layer", "unit", "flat", "pearson_r"};
    for (std::size_t i = 0; i < std::min(ba.top, scores.size()); ++i) {
      const auto& s = scores[i];
      t.rows.push_back({std::to_string(i + 1), std::to_string(s.layer), std::to_string(s.unit), std::to_string(s.flat),
                        format_number(s.pearson_r)});
    }
    ctx.emit("scan", ba.output, io::format_tsv(t));
    return 0;
  });
  auto running = [&](bool errors) {
    const auto ckpt = bload();
    const auto corpus = load_corpus(ba.corpus);
    const auto report = eval_running_text(ckpt, corpus, ba.train_chars, ba.test_chars, boundary_options(ba, ckpt, corpus));
    ctx.emit(errors ? "errors" : "f1", ba.output, errors ? errors_tsv(report) : seg_report_json(report));
    return 0;
  };
  on(bf1, [&] { return running(false); });
  on(berr, [&] { return running(true); });
  on(bbal, [&] {
    const auto ckpt = bload();
    const auto corpus = load_corpus(ba.corpus);
    const auto opts = boundary_options(ba, ckpt, corpus);
    auto all = sample_balanced_positions(corpus, ba.n_train + ba.n_test, 40, {}, derive_seed(ba.seed, 7));
    std::vector<PositionSample> pos, neg, train, test;
    for (auto& s : all) (s.label ? pos : neg).push_back(std::move(s));
    for (std::size_t i = 0; i < pos.size(); ++i) (i < ba.n_train / 2 ? train : test).push_back(pos[i]);
    for (std::size_t i = 0; i < neg.size(); ++i) (i < ba.n_train / 2 ? train : test).push_back(neg[i]);
    Json j{{"accuracy", eval_balanced(ckpt, train, test, opts)},
           {"mode", ba.mode},
           {"train", train.size()},
           {"test", test.size()}};
    if (opts.unit) j["unit"] = *opts.unit;
    ctx.emit("balanced", ba.output, j.dump(2) + "\n");
    return 0;
  });
  on(bprof, [&] {
    const auto ckpt = bload();
    ctx.emit("profile", ba.output, format_profile(plot_activation_profile(ckpt, ba.text, *ba.unit)));
    return 0;
  });

  // minpairs
  MinpairArgs mp;
  auto* mps = app.add_subcommand("minpairs", "Minimal-pair agreement stimuli");
  mps->require_subcommand(1);
  auto* mgen = mps->add_subcommand("generate", "Generate stimuli from a template and lexicon");
  auto* meval = mps->add_subcommand("evaluate", "Score stimuli with a model");
  mgen->add_option("--phenomenon", mp.phenomenon,
                   "gender, case, subcat, it-noun-gender, it-adj-gender or it-adj-number")
      ->required();
  mgen->add_option("--template", mp.template_path, "Template JSON")->required();
  mgen->add_option("--lexicon", mp.lexicon, "Lexicon TSV");
  mgen->add_option("--frames", mp.frames, "Sentence frames with ___ (subcat)");
  mgen->add_option("--training", mp.training, "Training corpus for attestation filtering (Italian)");
  mgen->add_option("--conditions", mp.conditions, "Comma-separated intervener counts");
  mgen->add_option("--seed", mp.seed);
  mgen->add_option("--output", mp.output, "Stimulus TSV");
  on(mgen, [&] {
    ctx.input(mp.template_path);
    ctx.input(mp.lexicon);
    ctx.input(mp.frames);
    ctx.input(mp.training);
    ctx.seed = mp.seed;
    ctx.emit("items", mp.output, format_items(generate_items(mp)));
    return 0;
  });
  meval->add_option("--model", mp.model)->required();
  meval->add_option("--items", mp.items)->required();
  meval->add_flag("--control", mp.control, "Score the control variants");
  meval->add_option("--oov", mp.oov, "Word models: subset (skip OOV items) or all");
  meval->add_option("--group-key", mp.group_key, "Condition key to group by");
  meval->add_option("--macro-key", mp.macro_key, "Condition key to macro-average over");
  meval->add_option("--tie-seed", mp.tie_seed, "Break exact ties at random with this seed");
  meval->add_option("--output", mp.output, "Result JSON");
  on(meval, [&] {
    ctx.input(mp.items);
    const auto ckpt = load_checkpoint(mp.model);
    const auto scorer = make_scorer(ckpt, mp.oov);
    const auto items = parse_items(io::read_file(mp.items));
    const auto report = evaluate_suite(scorer_chooser(*scorer, mp.tie_seed), items, mp.group_key, mp.macro_key, mp.control);
    ctx.emit("minpairs", mp.output, condition_report_json(report));
    return 0;
  });

  // complete
  std::string cp_model, cp_items, cp_out, cp_oov = "all";
  auto* cp = app.add_subcommand("complete", "Sentence completion by likelihood");
  cp->add_option("--model", cp_model)->required();
  cp->add_option("--items", cp_items, "TSV: id, sentence (with ___), choices (|), correct_index")->required();
  cp->add_option("--oov", cp_oov, "Word models: subset or all");
  cp->add_option("--output", cp_out);
  on(cp, [&] {
    ctx.input(cp_items);
    const auto ckpt = load_checkpoint(cp_model);
    const auto items = parse_completion_items(io::read_file(cp_items));
    const auto scorer = make_scorer(ckpt, cp_oov);
    Json j{{"accuracy", sentence_completion(*scorer, items)}, {"items", items.size()}};
    ctx.emit("completion", cp_out, j.dump(2) + "\n");
    return 0;
  });

  // ngram-baseline
  std::string ng_train, ng_items, ng_out, ng_group = "interveners", ng_macro;
  std::size_t ng_order = 0;
  std::uint64_t ng_seed = 1;
  bool ng_control = false;
  auto* ng = app.add_subcommand("ngram-baseline", "Character n-gram baseline on minimal pairs");
  ng->add_option("--train", ng_train, "Training corpus")->required();
  ng->add_option("--items", ng_items, "Stimulus TSV")->required();
  ng->add_option("--order", ng_order, "n (0: longest distinguishing prefix + 4)");
  ng->add_option("--seed", ng_seed, "Tie-breaking seed");
  ng->add_option("--group-key", ng_group);
  ng->add_option("--macro-key", ng_macro);
  ng->add_flag("--control", ng_control, "Score the control variants");
  ng->add_option("--output", ng_out);
  on(ng, [&] {
    ctx.input(ng_train);
    ctx.input(ng_items);
    ctx.seed = ng_seed;
    const auto items = parse_items(io::read_file(ng_items));
    const std::size_t n = ng_order == 0 ? ngram_order_for(items) : ng_order;
    const auto table = count_ngrams(load_corpus(ng_train).stream.chars, n, 1);
    auto report = evaluate_suite(ngram_chooser(table, ng_seed), items, ng_group, ng_macro, ng_control);
    auto j = Json::parse(condition_report_json(report));
    j["order"] = n;
    ctx.emit("ngram", ng_out, j.dump(2) + "\n");
    return 0;
  });

  // phonotactics
  TrainArgs ph;
  std::string ph_pairs, ph_mode = "stop";
  std::size_t ph_k = 100, ph_len = 20;
  bool ph_uncontrolled = false;
  auto* pht = app.add_subcommand("phonotactics", "Held-out bigram likelihood ratios after retraining");
  pht->add_option("--config", ph.config);
  pht->add_option("--set", ph.sets);
  pht->add_option("--train", ph.train)->required();
  pht->add_option("--pairs", ph_pairs, "TSV: acceptable, unacceptable")->required();
  pht->add_option("--context-mode", ph_mode, "stop (after a full stop) or sampled");
  pht->add_option("--contexts", ph_k, "Sampled contexts");
  pht->add_option("--context-length", ph_len);
  pht->add_flag("--allow-uncontrolled", ph_uncontrolled, "Skip the unigram-frequency control");
  pht->add_option("--output", ph.output, "Result TSV");
  on(pht, [&] {
    ctx.input(ph.train);
    ctx.input(ph_pairs);
    const LMConfig cfg = resolve_config(ph.config, ph.sets);
    if (cfg.kind != ModelKind::char_lstm && cfg.kind != ModelKind::char_rnn) {
      throw ConfigError("phonotactics retrains character models only");
    }
    ctx.config = cfg.to_map();
    ctx.seed = cfg.seed;
    const auto train = load_corpus(ph.train);
    const auto vocab = build_vocabulary(train.stream, cfg.vocab_threshold);
    PhonotacticsOptions opts;
    opts.require_unigram_control = !ph_uncontrolled;
    if (ph_mode == "sampled") {
      opts.contexts = sample_contexts(train, ph_k, ph_len, derive_seed(cfg.seed, 3));
    } else if (ph_mode != "stop") {
      throw ConfigError("--context-mode must be stop or sampled");
    }
    const auto report = run_phonotactics_suite(train, vocab, parse_pairs(io::read_file(ph_pairs)), cfg, opts);
    ctx.emit("phonotactics", ph.output, format_phonotactics(report));
    return 0;
  });

  // gradcheck
  std::string gc_cell = "lstm", gc_nl = "tanh";
  std::size_t gc_vocab = 6, gc_emb = 4, gc_hidden = 5, gc_layers = 2, gc_steps = 3;
  std::uint64_t gc_seed = 1;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient check of a random network");
  gc->add_option("--cell", gc_cell, "lstm or rnn");
  gc->add_option("--nonlinearity", gc_nl, "tanh or relu (rnn)");
  gc->add_option("--vocab", gc_vocab);
  gc->add_option("--embedding", gc_emb);
  gc->add_option("--hidden", gc_hidden);
  gc->add_option("--layers", gc_layers);
  gc->add_option("--steps", gc_steps);
  gc->add_option("--seed", gc_seed);
  on(gc, [&] {
    NetShape shape;
    if (gc_cell != "lstm" && gc_cell != "rnn") throw ConfigError("--cell must be lstm or rnn");
    shape.cell = gc_cell == "lstm" ? CellKind::lstm : CellKind::rnn;
    shape.nonlinearity = parse_nonlinearity(gc_nl);
    shape.vocab = gc_vocab;
    shape.embedding = gc_emb;
    shape.hidden = gc_hidden;
    shape.layers = gc_layers;
    const auto r = check_network_gradients(shape, gc_seed, gc_steps);
    const bool ok = r.max_rel_error < 1e-4;
    out << Json{{"max_rel_error", r.max_rel_error}, {"worst_param", r.worst_param},
                {"checked", r.checked}, {"pass", ok}}
               .dump(2)
        << "\n";
    return ok ? 0 : static_cast<int>(kNumericFailure);
  });

  std::vector<std::string> argv_store{"cnlm"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(kUsage);
  }

  const auto started = std::chrono::steady_clock::now();
  try {
    spdlog::set_level(spdlog::level::from_str(log_level));
    if (ctx.deterministic) threads = 1;
    if (threads > 0) omp_set_num_threads(threads);
    const int code = action();
    if (code == 0 && !manifest_path.empty()) {
      ExperimentManifest m;
      m.version = toolkit_version();
      m.command = args;
      m.config = ctx.config;
      m.seed = ctx.seed;
      for (const auto& in : ctx.inputs) m.corpus_checksums[in] = file_checksum(in);
      m.results = ctx.results;
      m.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      save_manifest(m, manifest_path);
    }
    return code;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kNumericFailure;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const ShapeError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kNumericFailure;
  }
}

}  // namespace cnlm
