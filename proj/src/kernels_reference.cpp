#include "cnlm/kernels.hpp"

namespace cnlm::kernels::reference {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = c[i * n + j];
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
      c[i * n + j] = s;
    }
  }
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t q = 0; q < k; ++q) {
      double s = 0;
      for (std::size_t j = 0; j < n; ++j) s += a[i * n + j] * b[q * n + j];
      c[i * k + q] += s;
    }
  }
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = c[p * n + j];
      for (std::size_t i = 0; i < m; ++i) s += a[i * k + p] * b[i * n + j];
      c[p * n + j] = s;
    }
  }
}

void add_bias(std::span<double> c, std::span<const double> bias, std::size_t m, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] += bias[j];
  }
}

void col_sums(std::span<const double> a, std::span<double> out, std::size_t m, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j] += a[i * n + j];
  }
}

}  // namespace cnlm::kernels::reference
