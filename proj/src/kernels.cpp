#include "cnlm/kernels.hpp"

#include <algorithm>
#include <cassert>

#include <omp.h>

namespace cnlm::kernels {
namespace {

constexpr std::size_t kColBlock = 256;
// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1u << 16;

std::size_t blocks(std::size_t n, std::size_t b) { return (n + b - 1) / b; }

}  // namespace

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  assert(a.size() >= m * k && b.size() >= k * n && c.size() >= m * n);
  const double* A = a.data();
  const double* B = b.data();
  double* C = c.data();
  const std::size_t nb = blocks(n, kColBlock);
  const auto nblocks = static_cast<long>(nb * blocks(m, 4));
#pragma omp parallel for schedule(static) if (m * k * n > kParallelWork)
  for (long blk = 0; blk < nblocks; ++blk) {
    const std::size_t j0 = (static_cast<std::size_t>(blk) % nb) * kColBlock;
    const std::size_t j1 = std::min(n, j0 + kColBlock);
    const std::size_t i0 = (static_cast<std::size_t>(blk) / nb) * 4;
    const std::size_t rows = std::min<std::size_t>(4, m - i0);
    if (rows == 4) {
      double* c0 = C + (i0 + 0) * n;
      double* c1 = C + (i0 + 1) * n;
      double* c2 = C + (i0 + 2) * n;
      double* c3 = C + (i0 + 3) * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double a0 = A[(i0 + 0) * k + p];
        const double a1 = A[(i0 + 1) * k + p];
        const double a2 = A[(i0 + 2) * k + p];
        const double a3 = A[(i0 + 3) * k + p];
        const double* br = B + p * n;
#pragma omp simd
        for (std::size_t j = j0; j < j1; ++j) {
          const double bj = br[j];
          c0[j] += a0 * bj;
          c1[j] += a1 * bj;
          c2[j] += a2 * bj;
          c3[j] += a3 * bj;
        }
      }
    } else {
      for (std::size_t i = i0; i < i0 + rows; ++i) {
        double* ci = C + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double ai = A[i * k + p];
          const double* br = B + p * n;
#pragma omp simd
          for (std::size_t j = j0; j < j1; ++j) ci[j] += ai * br[j];
        }
      }
    }
  }
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t n, std::size_t k) {
  assert(a.size() >= m * n && b.size() >= k * n && c.size() >= m * k);
  const double* A = a.data();
  const double* B = b.data();
  double* C = c.data();
  const auto kk = static_cast<long>(k);
#pragma omp parallel for schedule(static) if (m * k * n > kParallelWork)
  for (long q = 0; q < kk; ++q) {
    const double* bq = B + static_cast<std::size_t>(q) * n;
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
      const double* a0 = A + (i + 0) * n;
      const double* a1 = A + (i + 1) * n;
      const double* a2 = A + (i + 2) * n;
      const double* a3 = A + (i + 3) * n;
      double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
#pragma omp simd reduction(+ : s0, s1, s2, s3)
      for (std::size_t j = 0; j < n; ++j) {
        const double bj = bq[j];
        s0 += a0[j] * bj;
        s1 += a1[j] * bj;
        s2 += a2[j] * bj;
        s3 += a3[j] * bj;
      }
      C[(i + 0) * k + static_cast<std::size_t>(q)] += s0;
      C[(i + 1) * k + static_cast<std::size_t>(q)] += s1;
      C[(i + 2) * k + static_cast<std::size_t>(q)] += s2;
      C[(i + 3) * k + static_cast<std::size_t>(q)] += s3;
    }
    for (; i < m; ++i) {
      const double* ai = A + i * n;
      double s = 0;
#pragma omp simd reduction(+ : s)
      for (std::size_t j = 0; j < n; ++j) s += ai[j] * bq[j];
      C[i * k + static_cast<std::size_t>(q)] += s;
    }
  }
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  assert(a.size() >= m * k && b.size() >= m * n && c.size() >= k * n);
  const double* A = a.data();
  const double* B = b.data();
  double* C = c.data();
  const std::size_t nb = blocks(n, kColBlock);
  const auto nblocks = static_cast<long>(nb * blocks(k, 4));
#pragma omp parallel for schedule(static) if (m * k * n > kParallelWork)
  for (long blk = 0; blk < nblocks; ++blk) {
    const std::size_t j0 = (static_cast<std::size_t>(blk) % nb) * kColBlock;
    const std::size_t j1 = std::min(n, j0 + kColBlock);
    const std::size_t p0 = (static_cast<std::size_t>(blk) / nb) * 4;
    const std::size_t rows = std::min<std::size_t>(4, k - p0);
    if (rows == 4) {
      double* c0 = C + (p0 + 0) * n;
      double* c1 = C + (p0 + 1) * n;
      double* c2 = C + (p0 + 2) * n;
      double* c3 = C + (p0 + 3) * n;
      for (std::size_t i = 0; i < m; ++i) {
        const double* ai = A + i * k + p0;
        const double a0 = ai[0], a1 = ai[1], a2 = ai[2], a3 = ai[3];
        const double* bi = B + i * n;
#pragma omp simd
        for (std::size_t j = j0; j < j1; ++j) {
          const double bj = bi[j];
          c0[j] += a0 * bj;
          c1[j] += a1 * bj;
          c2[j] += a2 * bj;
          c3[j] += a3 * bj;
        }
      }
    } else {
      for (std::size_t p = p0; p < p0 + rows; ++p) {
        double* cp = C + p * n;
        for (std::size_t i = 0; i < m; ++i) {
          const double ap = A[i * k + p];
          const double* bi = B + i * n;
#pragma omp simd
          for (std::size_t j = j0; j < j1; ++j) cp[j] += ap * bi[j];
        }
      }
    }
  }
}

void add_bias(std::span<double> c, std::span<const double> bias, std::size_t m, std::size_t n) {
  assert(c.size() >= m * n && bias.size() >= n);
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c.data() + i * n;
#pragma omp simd
    for (std::size_t j = 0; j < n; ++j) ci[j] += bias[j];
  }
}

void col_sums(std::span<const double> a, std::span<double> out, std::size_t m, std::size_t n) {
  assert(a.size() >= m * n && out.size() >= n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a.data() + i * n;
#pragma omp simd
    for (std::size_t j = 0; j < n; ++j) out[j] += ai[j];
  }
}

void set_threads(int n) { omp_set_num_threads(n < 1 ? 1 : n); }

int threads() { return omp_get_max_threads(); }

}  // namespace cnlm::kernels
