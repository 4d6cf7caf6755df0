// Parallel kernels against the serial reference at the shapes of one LSTM
// training step (batch 32, embedding 32, hidden 128, 4 gates), plus a whole
// forward/backward window.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "cnlm/kernels.hpp"
#include "cnlm/lm.hpp"

namespace {

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> v(n);
  for (auto& x : v) x = u(g);
  return v;
}

constexpr std::size_t kBatch = 32, kIn = 32 + 128, kGates = 4 * 128;

template <auto Kernel>
void gemm_forward(benchmark::State& state) {
  const std::size_t m = kBatch * static_cast<std::size_t>(state.range(0)), k = kIn, n = kGates;
  const auto a = random_vector(m * k, 1), b = random_vector(k * n, 2);
  std::vector<double> c(m * n);
  for (auto _ : state) {
    Kernel(a, b, c, m, k, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * m * k * n));
}

template <auto Kernel>
void gemm_input_grad(benchmark::State& state) {
  const std::size_t m = kBatch * static_cast<std::size_t>(state.range(0)), n = kGates, k = kIn;
  const auto a = random_vector(m * n, 3), b = random_vector(k * n, 4);
  std::vector<double> c(m * k);
  for (auto _ : state) {
    Kernel(a, b, c, m, n, k);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * m * k * n));
}

template <auto Kernel>
void gemm_weight_grad(benchmark::State& state) {
  const std::size_t m = kBatch * static_cast<std::size_t>(state.range(0)), k = kIn, n = kGates;
  const auto a = random_vector(m * k, 5), b = random_vector(m * n, 6);
  std::vector<double> c(k * n);
  for (auto _ : state) {
    Kernel(a, b, c, m, k, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * m * k * n));
}

namespace par = cnlm::kernels;
namespace ref = cnlm::kernels::reference;

// range(0): rows in units of the batch size (1 = one time step, 50 = a window).
BENCHMARK(gemm_forward<par::gemm_nn>)->Arg(1)->Arg(50);
BENCHMARK(gemm_forward<ref::gemm_nn>)->Arg(1)->Arg(50);
BENCHMARK(gemm_input_grad<par::gemm_nt>)->Arg(1)->Arg(50);
BENCHMARK(gemm_input_grad<ref::gemm_nt>)->Arg(1)->Arg(50);
BENCHMARK(gemm_weight_grad<par::gemm_tn>)->Arg(1)->Arg(50);
BENCHMARK(gemm_weight_grad<ref::gemm_tn>)->Arg(1)->Arg(50);

void training_window(benchmark::State& state) {
  cnlm::LMConfig cfg;
  cfg.batch_size = kBatch;
  cfg.bptt_length = 50;
  cfg.char_budget = kBatch * 50 * 4;
  std::vector<std::string> symbols;
  for (char c = 'a'; c <= 'z'; ++c) symbols.emplace_back(1, c);
  const cnlm::Vocabulary vocab(symbols, 1);
  std::mt19937_64 g(7);
  std::vector<int> ids(kBatch * 50 * 4 + kBatch);
  for (auto& id : ids) id = static_cast<int>(g() % symbols.size());
  for (auto _ : state) {
    const auto ckpt = cnlm::train_lm(ids, vocab, cfg);
    benchmark::DoNotOptimize(ckpt.updates);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * cfg.char_budget));
}
BENCHMARK(training_window)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
