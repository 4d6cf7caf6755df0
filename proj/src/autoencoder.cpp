#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

#include "cnlm/error.hpp"
#include "cnlm/lm.hpp"
#include "cnlm/utf8.hpp"

namespace cnlm {
namespace {

// The id after the vocabulary marks both the start and the end of a form.
int boundary_id(const Checkpoint& ckpt) { return ckpt.vocab.size(); }

std::vector<int> form_ids(const Checkpoint& ckpt, std::string_view form) {
  auto ids = encode_text(ckpt.vocab, form);
  if (ids.empty()) throw DataError("empty form '" + std::string(form) + "'");
  return ids;
}

RecurrentNet::State encode(const RecurrentNet& enc, const std::vector<std::vector<int>>& forms) {
  auto state = enc.zero_state(forms.size());
  std::vector<int> column(forms.size());
  for (std::size_t t = 0; t < forms.front().size(); ++t) {
    for (std::size_t r = 0; r < forms.size(); ++r) column[r] = forms[r][t];
    enc.step(column, state);
  }
  return state;
}

void require_autoencoder(const Checkpoint& ckpt) {
  if (ckpt.config.kind != ModelKind::char_autoencoder) {
    throw ConfigError("checkpoint is not a character autoencoder");
  }
}

}  // namespace

Checkpoint train_autoencoder(const std::vector<std::string>& forms, const LMConfig& config) {
  if (forms.empty()) throw DataError("no forms to train the autoencoder on");
  LMConfig cfg = config;
  cfg.kind = ModelKind::char_autoencoder;
  CharStream all;
  for (const auto& f : forms) {
    const auto s = preprocess(f, true);
    if (s.empty()) throw DataError("empty form '" + f + "'");
    all.chars += s.chars;
  }
  Checkpoint ckpt = init_checkpoint(cfg, build_vocabulary(all, cfg.vocab_threshold));
  const RecurrentNet enc = ckpt.net("encoder.");
  const RecurrentNet dec = ckpt.net("decoder.");
  const int edge = boundary_id(ckpt);
  const DropoutRates drop{cfg.dropout_input, cfg.dropout_embedding, cfg.dropout_hidden};

  std::vector<std::vector<int>> encoded;
  for (const auto& f : forms) encoded.push_back(form_ids(ckpt, f));
  std::map<std::size_t, std::vector<std::size_t>> by_length;
  for (std::size_t i = 0; i < encoded.size(); ++i) by_length[encoded[i].size()].push_back(i);

  Rng rng(0);
  rng.restore(ckpt.rng_state);
  RecurrentNet::Tape enc_tape, dec_tape;
  const auto start = std::chrono::steady_clock::now();
  bool done = false;
  while (!done) {
    // Equal-length batches, in a fresh random order every epoch.
    std::vector<std::vector<std::size_t>> batches;
    for (auto& [len, members] : by_length) {
      rng.shuffle(members);
      for (std::size_t i = 0; i < members.size(); i += cfg.batch_size) {
        batches.emplace_back(members.begin() + static_cast<std::ptrdiff_t>(i),
                             members.begin() + static_cast<std::ptrdiff_t>(std::min(members.size(), i + cfg.batch_size)));
      }
    }
    rng.shuffle(batches);
    for (const auto& batch : batches) {
      if (ckpt.trained_chars >= cfg.char_budget ||
          (cfg.max_updates > 0 && ckpt.updates >= cfg.max_updates)) {
        done = true;
        break;
      }
      if (cfg.wall_clock_seconds > 0) {
        const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
        if (elapsed.count() >= cfg.wall_clock_seconds) {
          done = true;
          break;
        }
      }
      const std::size_t B = batch.size();
      const std::size_t len = encoded[batch.front()].size();
      std::vector<std::vector<int>> enc_in(len, std::vector<int>(B));
      std::vector<std::vector<int>> dec_in(len + 1, std::vector<int>(B));
      std::vector<std::vector<int>> dec_out(len + 1, std::vector<int>(B));
      for (std::size_t b = 0; b < B; ++b) {
        const auto& f = encoded[batch[b]];
        dec_in[0][b] = edge;
        for (std::size_t t = 0; t < len; ++t) {
          enc_in[t][b] = f[t];
          dec_in[t + 1][b] = f[t];
          dec_out[t][b] = f[t];
        }
        dec_out[len][b] = edge;
      }
      auto state = enc.zero_state(B);
      enc.forward(enc_in, nullptr, state, enc_tape, drop, &rng);
      const double nll = dec.forward(dec_in, &dec_out, state, dec_tape, drop, &rng);
      if (!std::isfinite(nll)) {
        throw NumericError("non-finite autoencoder loss at update " + std::to_string(ckpt.updates));
      }
      RecurrentNet::State d_code;
      dec.backward(dec_tape, 1.0 / static_cast<double>(B * (len + 1)), ckpt.params, nullptr, &d_code);
      enc.backward(enc_tape, 0.0, ckpt.params, &d_code);
      sgd_step(ckpt.params, ckpt.learning_rate, cfg.clip);
      ++ckpt.updates;
      ckpt.trained_chars += B * len;
    }
  }
  ckpt.rng_state = rng.state();
  return ckpt;
}

std::vector<double> autoencoder_repr(const Checkpoint& ckpt, std::string_view form) {
  require_autoencoder(ckpt);
  const auto state = encode(ckpt.net("encoder."), {form_ids(ckpt, form)});
  return state.h.back();
}

std::string reconstruct(const Checkpoint& ckpt, std::string_view form) {
  require_autoencoder(ckpt);
  const auto ids = form_ids(ckpt, form);
  const RecurrentNet dec = ckpt.net("decoder.");
  auto state = encode(ckpt.net("encoder."), {ids});
  const int edge = boundary_id(ckpt);
  std::string out;
  std::vector<double> logits;
  int prev = edge;
  for (std::size_t i = 0; i < 2 * ids.size() + 8; ++i) {
    dec.step(std::span<const int>(&prev, 1), state);
    dec.logits(state, logits);
    prev = static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    if (prev == edge) break;
    out += ckpt.vocab.symbol(prev);
  }
  return out;
}

}  // namespace cnlm
