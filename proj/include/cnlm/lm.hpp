#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cnlm/corpus.hpp"
#include "cnlm/network.hpp"
#include "cnlm/tensor.hpp"

namespace cnlm {

enum class ModelKind { char_lstm, char_rnn, word_lstm, char_autoencoder };

ModelKind parse_model_kind(std::string_view name);
std::string to_string(ModelKind kind);

struct LMConfig {
  ModelKind kind = ModelKind::char_lstm;
  std::size_t layers = 1;
  std::size_t embedding_size = 32;
  std::size_t hidden_size = 128;
  std::size_t batch_size = 16;
  std::size_t bptt_length = 50;
  double learning_rate = 1.0;
  double decay = 1.0;
  double dropout_hidden = 0;
  double dropout_embedding = 0;
  double dropout_input = 0;
  Nonlinearity nonlinearity = Nonlinearity::tanh;
  std::size_t vocab_limit = 50000;  // word models
  std::uint64_t vocab_threshold = 1;  // character models
  std::uint64_t seed = 1;

  double clip = 5.0;
  // char_budget bounds every run (0 trains nothing); max_updates and
  // wall_clock_seconds can only stop it earlier.
  std::uint64_t char_budget = 0;        // stop once this many symbols were trained on
  std::uint64_t max_updates = 0;        // 0: unlimited
  double wall_clock_seconds = 0;        // 0: unlimited
  std::uint64_t eval_interval = 0;      // symbols between dev evaluations; 0: never
  std::uint64_t eval_chars = 0;         // dev prefix used per evaluation; 0: whole dev
  bool reset_at_paragraph = false;

  // Throws ConfigError describing the first violated constraint.
  void validate() const;
  NetShape net_shape(std::size_t vocab) const;

  // Flat key -> value view (used by the CLI config files and checkpoints).
  std::map<std::string, std::string> to_map() const;
  static LMConfig from_map(const std::map<std::string, std::string>& kv);
  void set(const std::string& key, const std::string& value);

  friend bool operator==(const LMConfig&, const LMConfig&) = default;
};

struct Checkpoint {
  LMConfig config;
  Vocabulary vocab;
  ParamSet params;
  std::uint64_t trained_chars = 0;
  std::uint64_t updates = 0;
  double learning_rate = 0;  // current (after decays)
  std::vector<double> dev_bpc_history;
  std::string rng_state;

  // Number of model ids: vocabulary plus the autoencoder's boundary symbol.
  std::size_t model_vocab() const;
  RecurrentNet net(const std::string& prefix = "") const;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

Checkpoint init_checkpoint(const LMConfig& config, const Vocabulary& vocab);

struct TrainProgress {
  std::uint64_t updates = 0;
  std::uint64_t trained_chars = 0;
  double train_bpc = 0;  // mean over the last interval
  std::optional<double> dev_bpc;
  double learning_rate = 0;
};

struct TrainOptions {
  std::vector<int> dev;                        // dev ids for decay decisions
  std::vector<std::size_t> paragraph_starts;   // stream positions, for reset_at_paragraph
  // Called after every evaluation interval; returning false stops training.
  std::function<bool(const TrainProgress&)> on_progress;
};

// Stateful truncated BPTT over batch_size contiguous lanes.
Checkpoint train_lm(const std::vector<int>& ids, const Vocabulary& vocab, const LMConfig& config,
                    const TrainOptions& options = {});

// Continues training an existing checkpoint until its config budgets are hit.
void continue_training(Checkpoint& ckpt, const std::vector<int>& ids, const TrainOptions& options = {});

struct LogLikelihood {
  double nats = 0;
  double bits() const;
};

// Sum of log p(symbol | context, preceding symbols); the context conditions
// but does not contribute.
LogLikelihood score_ids(const Checkpoint& ckpt, const std::vector<int>& ids,
                        const std::vector<int>& context = {});

// Text-level scoring for character models: lower-cased, whitespace removed;
// out-of-vocabulary characters map to the unknown symbol with a warning.
LogLikelihood score(const Checkpoint& ckpt, std::string_view text,
                    std::string_view left_context = ".");

double evaluate_bpc(const Checkpoint& ckpt, const std::vector<int>& ids);
double evaluate_perplexity(const Checkpoint& ckpt, const std::vector<int>& token_ids);

struct TraceRecord {
  std::size_t layers = 0;
  std::size_t hidden = 0;
  std::size_t positions = 0;
  std::vector<double> h;         // [positions x layers x hidden]
  std::vector<double> c;         // same layout; LSTM only, when requested
  std::vector<double> log_prob;  // natural log of p(observed symbol)

  std::span<const double> h_at(std::size_t t, std::size_t layer) const;
  double unit(std::size_t t, std::size_t flat_unit) const { return h[t * layers * hidden + flat_unit]; }
};

TraceRecord trace_ids(const Checkpoint& ckpt, const std::vector<int>& ids,
                      const std::vector<int>& context = {}, bool with_cells = true);
TraceRecord trace(const Checkpoint& ckpt, std::string_view text, std::string_view left_context = ".");

// Hidden state after consuming each window (all windows the same length),
// all layers concatenated: [windows x layers*hidden]. Windows are processed
// in batches; results equal one-at-a-time processing bit for bit.
std::vector<double> final_states(const Checkpoint& ckpt, const std::vector<std::vector<int>>& windows,
                                 std::size_t batch = 256);

// Hidden state at the word's last character (top layer, or all layers).
std::vector<double> word_repr(const Checkpoint& ckpt, std::string_view word,
                              std::string_view left_context = ".", bool all_layers = false);

// Characters of `text` (preprocessed) as model ids; counts unknowns.
std::vector<int> encode_text(const Vocabulary& vocab, std::string_view text,
                             std::size_t* unknown = nullptr);

// ---- word-level LM ----
Vocabulary build_word_vocabulary(const std::vector<std::string>& tokens, std::size_t limit);
Checkpoint train_wordnlm(const std::vector<std::string>& tokens, const LMConfig& config,
                         const TrainOptions& options = {});
// Output-layer embedding (column of output.weight) of a word; nullopt if OOV.
std::optional<std::vector<double>> output_embedding(const Checkpoint& ckpt, std::string_view symbol);
std::vector<double> input_embedding(const Checkpoint& ckpt, std::string_view symbol);

// ---- character autoencoder ----
Checkpoint train_autoencoder(const std::vector<std::string>& forms, const LMConfig& config);
// Encoder top-layer state after reading the form.
std::vector<double> autoencoder_repr(const Checkpoint& ckpt, std::string_view form);
// Greedy decoding from the encoder state.
std::string reconstruct(const Checkpoint& ckpt, std::string_view form);

// ---- checkpoint files ----
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::string_view bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace cnlm
