#include <charconv>
#include <cmath>
#include <cstdio>

#include "cnlm/error.hpp"
#include "cnlm/lm.hpp"

namespace cnlm {
namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("invalid value for " + key + ": '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("invalid value for " + key + ": '" + value + "'");
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

ModelKind parse_model_kind(std::string_view name) {
  if (name == "char-lstm") return ModelKind::char_lstm;
  if (name == "char-rnn") return ModelKind::char_rnn;
  if (name == "word-lstm") return ModelKind::word_lstm;
  if (name == "char-autoencoder") return ModelKind::char_autoencoder;
  throw ConfigError("unknown model kind '" + std::string(name) + "'");
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::char_lstm: return "char-lstm";
    case ModelKind::char_rnn: return "char-rnn";
    case ModelKind::word_lstm: return "word-lstm";
    case ModelKind::char_autoencoder: return "char-autoencoder";
  }
  return "?";
}

void LMConfig::validate() const {
  require(layers >= 1, "layers must be >= 1");
  require(embedding_size >= 1, "embedding_size must be >= 1");
  require(hidden_size >= 1, "hidden_size must be >= 1");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(bptt_length >= 1, "bptt_length must be >= 1");
  require(std::isfinite(learning_rate) && learning_rate > 0, "learning_rate must be > 0");
  require(decay > 0 && decay <= 1, "decay must be in (0, 1]");
  for (auto [name, p] : {std::pair{"dropout_hidden", dropout_hidden},
                         std::pair{"dropout_embedding", dropout_embedding},
                         std::pair{"dropout_input", dropout_input}}) {
    require(p >= 0 && p < 1, std::string(name) + " must be in [0, 1)");
  }
  require(vocab_limit >= 1, "vocab_limit must be >= 1");
  require(vocab_threshold >= 1, "vocab_threshold must be >= 1");
  require(clip > 0, "clip must be > 0");
  require(wall_clock_seconds >= 0, "wall_clock_seconds must be >= 0");
  require(kind != ModelKind::char_rnn || nonlinearity == Nonlinearity::tanh ||
              nonlinearity == Nonlinearity::relu,
          "unsupported nonlinearity");
}

NetShape LMConfig::net_shape(std::size_t vocab) const {
  NetShape s;
  s.cell = kind == ModelKind::char_rnn ? CellKind::rnn : CellKind::lstm;
  s.nonlinearity = nonlinearity;
  s.vocab = vocab;
  s.embedding = embedding_size;
  s.hidden = hidden_size;
  s.layers = layers;
  return s;
}

std::map<std::string, std::string> LMConfig::to_map() const {
  return {
      {"kind", to_string(kind)},
      {"layers", std::to_string(layers)},
      {"embedding_size", std::to_string(embedding_size)},
      {"hidden_size", std::to_string(hidden_size)},
      {"batch_size", std::to_string(batch_size)},
      {"bptt_length", std::to_string(bptt_length)},
      {"learning_rate", format_double(learning_rate)},
      {"decay", format_double(decay)},
      {"dropout_hidden", format_double(dropout_hidden)},
      {"dropout_embedding", format_double(dropout_embedding)},
      {"dropout_input", format_double(dropout_input)},
      {"nonlinearity", to_string(nonlinearity)},
      {"vocab_limit", std::to_string(vocab_limit)},
      {"vocab_threshold", std::to_string(vocab_threshold)},
      {"seed", std::to_string(seed)},
      {"clip", format_double(clip)},
      {"char_budget", std::to_string(char_budget)},
      {"max_updates", std::to_string(max_updates)},
      {"wall_clock_seconds", format_double(wall_clock_seconds)},
      {"eval_interval", std::to_string(eval_interval)},
      {"eval_chars", std::to_string(eval_chars)},
      {"reset_at_paragraph", reset_at_paragraph ? "true" : "false"},
  };
}

void LMConfig::set(const std::string& key, const std::string& value) {
  if (key == "kind") kind = parse_model_kind(value);
  else if (key == "layers") layers = parse_number<std::size_t>(key, value);
  else if (key == "embedding_size") embedding_size = parse_number<std::size_t>(key, value);
  else if (key == "hidden_size") hidden_size = parse_number<std::size_t>(key, value);
  else if (key == "batch_size") batch_size = parse_number<std::size_t>(key, value);
  else if (key == "bptt_length") bptt_length = parse_number<std::size_t>(key, value);
  else if (key == "learning_rate") learning_rate = parse_number<double>(key, value);
  else if (key == "decay") decay = parse_number<double>(key, value);
  else if (key == "dropout_hidden") dropout_hidden = parse_number<double>(key, value);
  else if (key == "dropout_embedding") dropout_embedding = parse_number<double>(key, value);
  else if (key == "dropout_input") dropout_input = parse_number<double>(key, value);
  else if (key == "nonlinearity") nonlinearity = parse_nonlinearity(value);
  else if (key == "vocab_limit") vocab_limit = parse_number<std::size_t>(key, value);
  else if (key == "vocab_threshold") vocab_threshold = parse_number<std::uint64_t>(key, value);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "clip") clip = parse_number<double>(key, value);
  else if (key == "char_budget") char_budget = parse_number<std::uint64_t>(key, value);
  else if (key == "max_updates") max_updates = parse_number<std::uint64_t>(key, value);
  else if (key == "wall_clock_seconds") wall_clock_seconds = parse_number<double>(key, value);
  else if (key == "eval_interval") eval_interval = parse_number<std::uint64_t>(key, value);
  else if (key == "eval_chars") eval_chars = parse_number<std::uint64_t>(key, value);
  else if (key == "reset_at_paragraph") reset_at_paragraph = parse_bool(key, value);
  else throw ConfigError("unknown configuration key '" + key + "'");
}

LMConfig LMConfig::from_map(const std::map<std::string, std::string>& kv) {
  LMConfig c;
  for (const auto& [k, v] : kv) c.set(k, v);
  return c;
}

}  // namespace cnlm
