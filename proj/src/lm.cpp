#include "cnlm/lm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "cnlm/error.hpp"
#include "cnlm/utf8.hpp"

namespace cnlm {
namespace {

DropoutRates dropout_rates(const LMConfig& c) {
  return {c.dropout_input, c.dropout_embedding, c.dropout_hidden};
}

void check_ids(const std::vector<int>& ids, std::size_t vocab, const char* what) {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw DataError(std::string(what) + ": symbol id " + std::to_string(ids[i]) +
                      " at position " + std::to_string(i) + " is outside the vocabulary");
    }
  }
}


std::vector<int> encode_words(const Vocabulary& vocab, std::string_view text, std::size_t* unknown) {
  std::vector<std::string> forms;
  for (const auto& tok : simple_tokenize(text)) forms.push_back(utf8::encode(utf8::to_lower(utf8::decode(tok.form).chars)));
  auto ids = vocab.encode_tokens(forms);
  if (unknown) *unknown = static_cast<std::size_t>(std::count(ids.begin(), ids.end(), vocab.unk_id()));
  return ids;
}

std::vector<int> encode_for(const Checkpoint& ckpt, std::string_view text, const char* what) {
  std::size_t unknown = 0;
  auto ids = ckpt.config.kind == ModelKind::word_lstm ? encode_words(ckpt.vocab, text, &unknown)
                                                      : encode_text(ckpt.vocab, text, &unknown);
  if (unknown > 0) {
    spdlog::warn("{} '{}': {} out-of-vocabulary symbol(s) mapped to {}", what, text, unknown,
                 Vocabulary::kUnk);
  }
  return ids;
}

}  // namespace

std::size_t Checkpoint::model_vocab() const {
  const auto v = static_cast<std::size_t>(vocab.size());
  return config.kind == ModelKind::char_autoencoder ? v + 1 : v;
}

RecurrentNet Checkpoint::net(const std::string& prefix) const {
  NetShape shape = config.net_shape(model_vocab());
  if (prefix == "encoder.") shape.output_layer = false;
  return RecurrentNet(shape, params, prefix);
}

Checkpoint init_checkpoint(const LMConfig& config, const Vocabulary& vocab) {
  config.validate();
  if (vocab.symbols().empty()) throw ConfigError("vocabulary is empty");
  Checkpoint ckpt;
  ckpt.config = config;
  ckpt.vocab = vocab;
  ckpt.learning_rate = config.learning_rate;
  Rng rng(config.seed);
  const NetShape shape = config.net_shape(ckpt.model_vocab());
  if (config.kind == ModelKind::char_autoencoder) {
    NetShape enc = shape;
    enc.output_layer = false;
    RecurrentNet::create_params(ckpt.params, enc, "encoder.", rng);
    RecurrentNet::create_params(ckpt.params, shape, "decoder.", rng);
  } else {
    RecurrentNet::create_params(ckpt.params, shape, "", rng);
  }
  ckpt.rng_state = rng.state();
  return ckpt;
}

Checkpoint train_lm(const std::vector<int>& ids, const Vocabulary& vocab, const LMConfig& config,
                    const TrainOptions& options) {
  if (config.kind == ModelKind::char_autoencoder) {
    throw ConfigError("use train_autoencoder for autoencoder models");
  }
  Checkpoint ckpt = init_checkpoint(config, vocab);
  continue_training(ckpt, ids, options);
  return ckpt;
}

void continue_training(Checkpoint& ckpt, const std::vector<int>& ids, const TrainOptions& options) {
  const LMConfig& cfg = ckpt.config;
  cfg.validate();
  const std::size_t B = cfg.batch_size;
  const std::size_t T = cfg.bptt_length;
  const std::size_t N = ids.size();
  if (N < B * T) {
    throw DataError("training stream has " + std::to_string(N) + " symbols; batch_size x bptt_length = " +
                    std::to_string(B * T) + " required");
  }
  const std::size_t lane = N / B;
  if (lane < 2) throw DataError("training stream too short for batch_size lanes");
  check_ids(ids, ckpt.model_vocab(), "training stream");
  check_ids(options.dev, ckpt.model_vocab(), "dev stream");

  std::vector<char> par_start;
  if (cfg.reset_at_paragraph) {
    par_start.assign(N, 0);
    for (auto p : options.paragraph_starts) {
      if (p < N) par_start[p] = 1;
    }
  }
  std::vector<int> dev = options.dev;
  if (cfg.eval_chars > 0 && dev.size() > cfg.eval_chars) dev.resize(cfg.eval_chars);

  const RecurrentNet net = ckpt.net();
  Rng rng(0);
  rng.restore(ckpt.rng_state);
  const DropoutRates drop = dropout_rates(cfg);
  RecurrentNet::State state = net.zero_state(B);
  RecurrentNet::Tape tape;
  std::vector<std::vector<int>> inputs, targets;
  std::vector<std::vector<char>> resets;

  double best = ckpt.dev_bpc_history.empty()
                    ? INFINITY
                    : *std::min_element(ckpt.dev_bpc_history.begin(), ckpt.dev_bpc_history.end());
  double interval_nll = 0;
  std::uint64_t interval_count = 0;
  std::uint64_t next_eval = ckpt.trained_chars + cfg.eval_interval;
  const auto start = std::chrono::steady_clock::now();
  std::size_t pos = 0;

  while (ckpt.trained_chars < cfg.char_budget) {
    if (cfg.max_updates > 0 && ckpt.updates >= cfg.max_updates) break;
    if (cfg.wall_clock_seconds > 0) {
      const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
      if (elapsed.count() >= cfg.wall_clock_seconds) break;
    }
    const std::size_t steps = std::min(T, lane - 1 - pos);
    if (steps == 0) {
      pos = 0;
      state = net.zero_state(B);
      continue;
    }
    inputs.assign(steps, std::vector<int>(B));
    targets.assign(steps, std::vector<int>(B));
    resets.assign(steps, std::vector<char>(B, 0));
    for (std::size_t t = 0; t < steps; ++t) {
      for (std::size_t b = 0; b < B; ++b) {
        const std::size_t i = b * lane + pos + t;
        inputs[t][b] = ids[i];
        targets[t][b] = ids[i + 1];
        if (!par_start.empty()) resets[t][b] = par_start[i];
      }
    }
    const double nll = net.forward(inputs, &targets, state, tape, drop, &rng,
                                   par_start.empty() ? nullptr : &resets);
    if (!std::isfinite(nll)) {
      throw NumericError("non-finite training loss at update " + std::to_string(ckpt.updates) +
                         " (learning rate " + std::to_string(ckpt.learning_rate) + ")");
    }
    const double count = static_cast<double>(steps * B);
    net.backward(tape, 1.0 / count, ckpt.params);
    sgd_step(ckpt.params, ckpt.learning_rate, cfg.clip);
    ++ckpt.updates;
    ckpt.trained_chars += steps * B;
    pos += steps;
    interval_nll += nll;
    interval_count += steps * B;

    if (cfg.eval_interval > 0 && ckpt.trained_chars >= next_eval) {
      while (next_eval <= ckpt.trained_chars) next_eval += cfg.eval_interval;
      TrainProgress progress;
      progress.updates = ckpt.updates;
      progress.trained_chars = ckpt.trained_chars;
      progress.train_bpc = interval_nll / static_cast<double>(interval_count) / std::numbers::ln2;
      interval_nll = 0;
      interval_count = 0;
      if (!dev.empty()) {
        const double bpc = evaluate_bpc(ckpt, dev);
        ckpt.dev_bpc_history.push_back(bpc);
        if (bpc >= best) {
          ckpt.learning_rate *= cfg.decay;
        } else {
          best = bpc;
        }
        progress.dev_bpc = bpc;
      }
      progress.learning_rate = ckpt.learning_rate;
      if (options.on_progress && !options.on_progress(progress)) break;
    }
  }
  ckpt.rng_state = rng.state();
}

double LogLikelihood::bits() const { return nats / std::numbers::ln2; }

LogLikelihood score_ids(const Checkpoint& ckpt, const std::vector<int>& ids,
                        const std::vector<int>& context) {
  const RecurrentNet net = ckpt.net();
  check_ids(context, ckpt.model_vocab(), "context");
  check_ids(ids, ckpt.model_vocab(), "scored sequence");
  auto state = net.zero_state(1);
  std::vector<double> logits;
  LogLikelihood ll;
  const std::size_t n = context.size() + ids.size();
  for (std::size_t i = 0; i < n; ++i) {
    const int id = i < context.size() ? context[i] : ids[i - context.size()];
    if (i >= context.size()) {
      net.logits(state, logits);
      ll.nats += log_softmax_at(logits, id);
    }
    if (i + 1 < n) net.step(std::span<const int>(&id, 1), state);
  }
  return ll;
}

std::vector<int> encode_text(const Vocabulary& vocab, std::string_view text, std::size_t* unknown) {
  const CharStream s = preprocess(text, true);
  auto ids = vocab.encode(s.chars);
  if (unknown) *unknown = static_cast<std::size_t>(std::count(ids.begin(), ids.end(), vocab.unk_id()));
  return ids;
}

LogLikelihood score(const Checkpoint& ckpt, std::string_view text, std::string_view left_context) {
  if (ckpt.config.kind == ModelKind::char_autoencoder) {
    throw ConfigError("autoencoder checkpoints cannot score sequences");
  }
  return score_ids(ckpt, encode_for(ckpt, text, "scored text"),
                   encode_for(ckpt, left_context, "context"));
}

double evaluate_bpc(const Checkpoint& ckpt, const std::vector<int>& ids) {
  if (ids.empty()) throw DataError("cannot evaluate an empty stream");
  return -score_ids(ckpt, ids).bits() / static_cast<double>(ids.size());
}

double evaluate_perplexity(const Checkpoint& ckpt, const std::vector<int>& token_ids) {
  if (token_ids.empty()) throw DataError("cannot evaluate an empty token stream");
  return std::exp(-score_ids(ckpt, token_ids).nats / static_cast<double>(token_ids.size()));
}

std::span<const double> TraceRecord::h_at(std::size_t t, std::size_t layer) const {
  return std::span<const double>(h.data() + (t * layers + layer) * hidden, hidden);
}

TraceRecord trace_ids(const Checkpoint& ckpt, const std::vector<int>& ids,
                      const std::vector<int>& context, bool with_cells) {
  const RecurrentNet net = ckpt.net();
  check_ids(context, ckpt.model_vocab(), "context");
  check_ids(ids, ckpt.model_vocab(), "traced sequence");
  const std::size_t L = ckpt.config.layers;
  const std::size_t H = ckpt.config.hidden_size;
  const bool cells = with_cells && ckpt.config.kind != ModelKind::char_rnn;
  TraceRecord rec;
  rec.layers = L;
  rec.hidden = H;
  rec.positions = ids.size();
  rec.h.resize(ids.size() * L * H);
  if (cells) rec.c.resize(ids.size() * L * H);
  rec.log_prob.resize(ids.size());
  auto state = net.zero_state(1);
  for (int id : context) net.step(std::span<const int>(&id, 1), state);
  std::vector<double> logits;
  for (std::size_t t = 0; t < ids.size(); ++t) {
    net.logits(state, logits);
    rec.log_prob[t] = log_softmax_at(logits, ids[t]);
    net.step(std::span<const int>(&ids[t], 1), state);
    for (std::size_t l = 0; l < L; ++l) {
      std::copy(state.h[l].begin(), state.h[l].end(), rec.h.begin() + static_cast<std::ptrdiff_t>((t * L + l) * H));
      if (cells) {
        std::copy(state.c[l].begin(), state.c[l].end(), rec.c.begin() + static_cast<std::ptrdiff_t>((t * L + l) * H));
      }
    }
  }
  return rec;
}

TraceRecord trace(const Checkpoint& ckpt, std::string_view text, std::string_view left_context) {
  return trace_ids(ckpt, encode_for(ckpt, text, "traced text"),
                   encode_for(ckpt, left_context, "context"));
}

std::vector<double> final_states(const Checkpoint& ckpt, const std::vector<std::vector<int>>& windows,
                                 std::size_t batch) {
  const RecurrentNet net = ckpt.net();
  const std::size_t L = ckpt.config.layers;
  const std::size_t H = ckpt.config.hidden_size;
  const std::size_t width = L * H;
  std::vector<double> out(windows.size() * width);
  if (windows.empty()) return out;
  const std::size_t len = windows.front().size();
  for (const auto& w : windows) {
    if (w.size() != len) throw ShapeError("final_states requires equal-length windows");
    check_ids(w, ckpt.model_vocab(), "window");
  }
  batch = std::max<std::size_t>(batch, 1);
  std::vector<int> column;
  for (std::size_t first = 0; first < windows.size(); first += batch) {
    const std::size_t rows = std::min(batch, windows.size() - first);
    auto state = net.zero_state(rows);
    column.resize(rows);
    for (std::size_t t = 0; t < len; ++t) {
      for (std::size_t r = 0; r < rows; ++r) column[r] = windows[first + r][t];
      net.step(column, state);
    }
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t l = 0; l < L; ++l) {
        std::copy_n(state.h[l].begin() + static_cast<std::ptrdiff_t>(r * H), H,
                    out.begin() + static_cast<std::ptrdiff_t>((first + r) * width + l * H));
      }
    }
  }
  return out;
}

std::vector<double> word_repr(const Checkpoint& ckpt, std::string_view word,
                              std::string_view left_context, bool all_layers) {
  const auto rec = trace(ckpt, word, left_context);
  if (rec.positions == 0) throw DataError("cannot represent an empty word");
  const std::size_t t = rec.positions - 1;
  if (all_layers) {
    const auto first = rec.h.begin() + static_cast<std::ptrdiff_t>(t * rec.layers * rec.hidden);
    return {first, first + static_cast<std::ptrdiff_t>(rec.layers * rec.hidden)};
  }
  const auto top = rec.h_at(t, rec.layers - 1);
  return {top.begin(), top.end()};
}

Vocabulary build_word_vocabulary(const std::vector<std::string>& tokens, std::size_t limit) {
  if (tokens.empty()) throw DataError("cannot build a vocabulary from an empty token stream");
  std::unordered_map<std::string, std::uint64_t> counts;
  for (const auto& t : tokens) ++counts[t];
  std::vector<std::pair<std::string, std::uint64_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (ranked.size() > limit) ranked.resize(limit);
  std::vector<std::string> symbols;
  for (auto& [s, c] : ranked) symbols.push_back(std::move(s));
  return Vocabulary(std::move(symbols), 1);
}

Checkpoint train_wordnlm(const std::vector<std::string>& tokens, const LMConfig& config,
                         const TrainOptions& options) {
  LMConfig cfg = config;
  cfg.kind = ModelKind::word_lstm;
  const Vocabulary vocab = build_word_vocabulary(tokens, cfg.vocab_limit);
  return train_lm(vocab.encode_tokens(tokens), vocab, cfg, options);
}

std::optional<std::vector<double>> output_embedding(const Checkpoint& ckpt, std::string_view symbol) {
  if (!ckpt.vocab.contains(symbol)) return std::nullopt;
  const auto id = static_cast<std::size_t>(ckpt.vocab.id(symbol));
  const Tensor& w = ckpt.params.get("output.weight").value;
  std::vector<double> out(w.rows());
  for (std::size_t r = 0; r < w.rows(); ++r) out[r] = w(r, id);
  return out;
}

std::vector<double> input_embedding(const Checkpoint& ckpt, std::string_view symbol) {
  const std::string prefix = ckpt.config.kind == ModelKind::char_autoencoder ? "encoder." : "";
  const Tensor& e = ckpt.params.get(prefix + "embedding").value;
  const auto id = static_cast<std::size_t>(ckpt.vocab.id(symbol));
  return {e.data.begin() + static_cast<std::ptrdiff_t>(id * e.cols()),
          e.data.begin() + static_cast<std::ptrdiff_t>((id + 1) * e.cols())};
}

}  // namespace cnlm
