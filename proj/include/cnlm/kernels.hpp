#pragma once

#include <cstddef>
#include <span>

// Dense row-major kernels used by the recurrent networks. Every output
// element is produced by exactly one thread and accumulated in a fixed
// order, so results do not depend on the thread count.
namespace cnlm::kernels {

// C[m x n] += A[m x k] * B[k x n]
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);

// C[m x k] += A[m x n] * B[k x n]^T
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t n, std::size_t k);

// C[k x n] += A[m x k]^T * B[m x n]
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);

// Each row of C[m x n] += bias[n].
void add_bias(std::span<double> c, std::span<const double> bias, std::size_t m, std::size_t n);

// out[n] += column sums of A[m x n].
void col_sums(std::span<const double> a, std::span<double> out, std::size_t m, std::size_t n);

void set_threads(int n);
int threads();

}  // namespace cnlm::kernels

// Straightforward serial versions, kept as the correctness baseline for the
// parallel kernels and for the benchmark.
namespace cnlm::kernels::reference {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t n, std::size_t k);
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
void add_bias(std::span<double> c, std::span<const double> bias, std::size_t m, std::size_t n);
void col_sums(std::span<const double> a, std::span<double> out, std::size_t m, std::size_t n);

}  // namespace cnlm::kernels::reference
