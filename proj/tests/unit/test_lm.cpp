#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>

#include "cnlm/error.hpp"
#include "cnlm/io.hpp"
#include "cnlm/lm.hpp"

using namespace cnlm;

namespace {

LMConfig tiny_config() {
  LMConfig c;
  c.embedding_size = 6;
  c.hidden_size = 8;
  c.batch_size = 2;
  c.bptt_length = 5;
  c.learning_rate = 1.0;
  c.seed = 11;
  return c;
}

Vocabulary abc_vocab() { return Vocabulary({"a", "b", "c"}, 1); }

// Parameters shifted off zero so every logit matters.
Checkpoint random_model(LMConfig cfg, const Vocabulary& v, std::uint64_t seed) {
  auto ckpt = init_checkpoint(cfg, v);
  Rng rng(seed);
  for (auto& p : ckpt.params.params()) {
    for (auto& x : p.value.data) x += rng.uniform(-0.5, 0.5);
  }
  return ckpt;
}

std::vector<int> cycle_ids(std::size_t n) {
  std::vector<int> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<int>(i % 3);
  return ids;
}

}  // namespace

TEST_CASE("config map round-trips and rejects unknown keys") {
  LMConfig c = tiny_config();
  c.kind = ModelKind::char_rnn;
  c.nonlinearity = Nonlinearity::relu;
  c.learning_rate = 0.1;
  c.dropout_hidden = 0.25;
  c.reset_at_paragraph = true;
  CHECK(LMConfig::from_map(c.to_map()) == c);
  CHECK_THROWS_AS(c.set("hiden_size", "3"), ConfigError);
  CHECK_THROWS_AS(c.set("hidden_size", "three"), ConfigError);
  c.set("reset_at_paragraph", "no");
  CHECK_FALSE(c.reset_at_paragraph);
  LMConfig bad = tiny_config();
  bad.dropout_input = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK(parse_model_kind("char-autoencoder") == ModelKind::char_autoencoder);
  CHECK_THROWS_AS(parse_model_kind("gru"), ConfigError);
}

TEST_CASE("checkpoint bytes round-trip exactly") {
  auto cfg = tiny_config();
  cfg.char_budget = 200;
  const auto ckpt = train_lm(cycle_ids(300), abc_vocab(), cfg);
  const auto bytes = serialize_checkpoint(ckpt);
  const auto back = deserialize_checkpoint(bytes);
  CHECK(back == ckpt);
  CHECK(serialize_checkpoint(back) == bytes);

  const auto path = std::filesystem::temp_directory_path() / "cnlm_ckpt_roundtrip.bin";
  save_checkpoint(ckpt, path.string());
  CHECK(load_checkpoint(path.string()) == ckpt);
  std::filesystem::remove(path);
}

TEST_CASE("corrupted and foreign checkpoints are rejected with a reason") {
  const auto bytes = serialize_checkpoint(init_checkpoint(tiny_config(), abc_vocab()));
  auto flipped = bytes;
  flipped[flipped.size() / 2] ^= 0x01;
  CHECK_THROWS_WITH_AS(deserialize_checkpoint(flipped), doctest::Contains("checksum"), DataError);

  // A future version with a valid checksum.
  auto future = bytes;
  const std::uint32_t v = kCheckpointVersion + 1;
  std::memcpy(future.data() + 4, &v, 4);
  const auto body = std::string_view(future).substr(0, future.size() - 8);
  const std::uint64_t sum = io::fnv1a64(body);
  std::memcpy(future.data() + future.size() - 8, &sum, 8);
  CHECK_THROWS_WITH_AS(deserialize_checkpoint(future), doctest::Contains("version"), DataError);

  CHECK_THROWS_AS(deserialize_checkpoint("JUNKJUNKJUNKJUNKJUNK"), DataError);
  CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), DataError);
}

TEST_CASE("a zero budget returns the initial model") {
  auto cfg = tiny_config();
  cfg.char_budget = 0;
  const auto trained = train_lm(cycle_ids(100), abc_vocab(), cfg);
  CHECK(trained.updates == 0);
  CHECK(trained.trained_chars == 0);
  CHECK(trained.params == init_checkpoint(cfg, abc_vocab()).params);
}

TEST_CASE("scoring obeys the chain rule") {
  const auto m = random_model(tiny_config(), abc_vocab(), 3);
  const std::vector<int> ctx{2, 0};
  const std::vector<int> ids{1, 0, 3, 2};
  double parts = 0;
  std::vector<int> running = ctx;
  for (int id : ids) {
    parts += score_ids(m, {id}, running).nats;
    running.push_back(id);
  }
  CHECK(score_ids(m, ids, ctx).nats == doctest::Approx(parts).epsilon(1e-12));
  CHECK(score_ids(m, {}, ctx).nats == 0.0);
}

TEST_CASE("probabilities of all strings of a fixed length sum to one") {
  for (auto kind : {ModelKind::char_lstm, ModelKind::char_rnn}) {
    auto cfg = tiny_config();
    cfg.kind = kind;
    const auto m = random_model(cfg, abc_vocab(), 5);
    const int V = abc_vocab().size();
    double total = 0;
    for (int a = 0; a < V; ++a) {
      for (int b = 0; b < V; ++b) {
        for (int c = 0; c < V; ++c) total += std::exp(score_ids(m, {a, b, c}, {1}).nats);
      }
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("bpc is the negated mean of score bits and traces agree with scores") {
  const auto m = random_model(tiny_config(), abc_vocab(), 8);
  const std::vector<int> ids{0, 1, 2, 2, 1, 0, 3};
  CHECK(evaluate_bpc(m, ids) == doctest::Approx(-score_ids(m, ids).bits() / 7.0).epsilon(1e-12));
  const auto rec = trace_ids(m, ids, {0});
  double sum = 0;
  for (double lp : rec.log_prob) sum += lp;
  CHECK(sum == doctest::Approx(score_ids(m, ids, {0}).nats).epsilon(1e-12));
  CHECK(rec.positions == ids.size());
  CHECK(score(m, "ab", ".").nats == doctest::Approx(score_ids(m, encode_text(m.vocab, "ab"), {m.vocab.unk_id()}).nats));
  CHECK_THROWS_AS(evaluate_bpc(m, {}), DataError);
}

TEST_CASE("a model with zero output layer is uniform: 64 ids give 6 bits per character") {
  std::vector<std::string> symbols;
  for (int i = 0; i < 63; ++i) symbols.push_back(std::string(1, static_cast<char>('!' + i)));
  const Vocabulary v(symbols, 1);
  REQUIRE(v.size() == 64);
  auto m = random_model(tiny_config(), v, 2);
  for (auto* name : {"output.weight", "output.bias"}) {
    for (auto& x : m.params.get(name).value.data) x = 0;
  }
  std::vector<int> ids;
  for (int i = 0; i < 200; ++i) ids.push_back((i * 7) % 64);
  CHECK(evaluate_bpc(m, ids) == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("final_states matches window-at-a-time tracing for any batch size") {
  const auto m = random_model(tiny_config(), abc_vocab(), 4);
  std::vector<std::vector<int>> windows;
  Rng rng(9);
  for (int w = 0; w < 7; ++w) {
    std::vector<int> win(6);
    for (auto& x : win) x = static_cast<int>(rng.below(4));
    windows.push_back(win);
  }
  const auto all = final_states(m, windows, 256);
  for (std::size_t batch : {1, 3, 7}) CHECK(final_states(m, windows, batch) == all);
  const std::size_t H = m.config.hidden_size;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const auto rec = trace_ids(m, windows[w], {}, false);
    const auto h = rec.h_at(rec.positions - 1, 0);
    for (std::size_t k = 0; k < H; ++k) CHECK(all[w * H + k] == h[k]);
  }
}

TEST_CASE("training is deterministic, reduces loss and honours the progress callback") {
  auto cfg = tiny_config();
  cfg.char_budget = 3000;
  cfg.eval_interval = 500;
  TrainOptions opts;
  opts.dev = cycle_ids(60);
  const auto a = train_lm(cycle_ids(400), abc_vocab(), cfg, opts);
  const auto b = train_lm(cycle_ids(400), abc_vocab(), cfg, opts);
  CHECK(serialize_checkpoint(a) == serialize_checkpoint(b));
  REQUIRE(a.dev_bpc_history.size() >= 2);
  CHECK(a.dev_bpc_history.back() < a.dev_bpc_history.front());
  CHECK(evaluate_bpc(a, cycle_ids(60)) < 0.5);

  std::size_t calls = 0;
  opts.on_progress = [&](const TrainProgress&) { return ++calls < 2; };
  const auto stopped = train_lm(cycle_ids(400), abc_vocab(), cfg, opts);
  CHECK(calls == 2);
  // Stops at the second evaluation; lane-end windows may overshoot slightly.
  CHECK(stopped.trained_chars >= 1000);
  CHECK(stopped.trained_chars < 1500);
}

TEST_CASE("continue_training picks up budgets from the config") {
  auto cfg = tiny_config();
  cfg.max_updates = 10;
  cfg.char_budget = 1000000;
  auto ckpt = train_lm(cycle_ids(200), abc_vocab(), cfg);
  CHECK(ckpt.updates == 10);
  ckpt.config.max_updates = 25;
  continue_training(ckpt, cycle_ids(200));
  CHECK(ckpt.updates == 25);
}

TEST_CASE("training rejects short streams, bad ids and divergence") {
  auto cfg = tiny_config();
  cfg.char_budget = 100;
  CHECK_THROWS_AS(train_lm(cycle_ids(5), abc_vocab(), cfg), DataError);
  auto bad = cycle_ids(100);
  bad[3] = 17;
  CHECK_THROWS_AS(train_lm(bad, abc_vocab(), cfg), DataError);
  auto poisoned = init_checkpoint(cfg, abc_vocab());
  poisoned.params.get("output.bias").value.data[0] = std::nan("");
  CHECK_THROWS_WITH_AS(continue_training(poisoned, cycle_ids(400)), doctest::Contains("non-finite"), NumericError);
}

TEST_CASE("autoencoder memorizes ten words") {
  const std::vector<std::string> words{"haus", "baum", "kind", "tisch", "stuhl", "hund", "katze", "maus", "boot", "rad"};
  LMConfig cfg;
  cfg.kind = ModelKind::char_autoencoder;
  cfg.embedding_size = 16;
  cfg.hidden_size = 48;
  cfg.batch_size = 2;
  cfg.learning_rate = 1.0;
  cfg.char_budget = 150000;
  cfg.seed = 2;
  const auto ae = train_autoencoder(words, cfg);
  for (const auto& w : words) CHECK(reconstruct(ae, w) == w);
  CHECK(autoencoder_repr(ae, "haus").size() == 48);
  CHECK(deserialize_checkpoint(serialize_checkpoint(ae)) == ae);
}

TEST_CASE("word model vocabulary, embeddings and perplexity") {
  const std::vector<std::string> toks{"the", "cat", "the", "dog", "a", "cat", "the"};
  const auto v = build_word_vocabulary(toks, 2);
  CHECK(v.symbols() == std::vector<std::string>{"the", "cat"});

  std::vector<std::string> stream;
  for (int i = 0; i < 300; ++i) stream.insert(stream.end(), {"the", "cat", "sat", "."});
  LMConfig cfg = tiny_config();
  cfg.kind = ModelKind::word_lstm;
  cfg.vocab_limit = 10;
  cfg.char_budget = 2000;
  const auto m = train_wordnlm(stream, cfg);
  CHECK(m.vocab.size() == 5);
  CHECK(output_embedding(m, "cat")->size() == cfg.hidden_size);
  CHECK_FALSE(output_embedding(m, "zebra").has_value());
  CHECK(input_embedding(m, "cat").size() == cfg.embedding_size);
  const double ppl = evaluate_perplexity(m, m.vocab.encode_tokens({"the", "cat", "sat", "."}));
  CHECK(ppl >= 1.0);
  CHECK(ppl < 2.0);
}
