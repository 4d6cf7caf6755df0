#include "cnlm/nncore.hpp"

#include <algorithm>
#include <cmath>

#include "cnlm/error.hpp"
#include "cnlm/kernels.hpp"

namespace cnlm {
namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_cell_shapes(std::span<const double> x, const RecurrentState& state,
                       const Tensor& weight, const Tensor& bias, std::size_t gates) {
  const std::size_t hidden = state.h.size();
  if (weight.shape.size() != 2 || weight.shape[0] != x.size() + hidden ||
      weight.shape[1] != gates * hidden || bias.size() != gates * hidden) {
    throw ShapeError("recurrent cell: weight/bias shape does not match input " +
                     std::to_string(x.size()) + " and hidden " + std::to_string(hidden));
  }
}

}  // namespace

Nonlinearity parse_nonlinearity(std::string_view name) {
  if (name == "tanh") return Nonlinearity::tanh;
  if (name == "relu") return Nonlinearity::relu;
  throw ConfigError("unknown nonlinearity '" + std::string(name) + "'");
}

std::string to_string(Nonlinearity n) { return n == Nonlinearity::tanh ? "tanh" : "relu"; }

void lstm_gates_forward(std::span<double> gates, std::span<const double> c_prev,
                        std::span<double> c, std::span<double> tanh_c, std::span<double> h,
                        std::size_t batch, std::size_t hidden) {
  const std::size_t g4 = 4 * hidden;
  for (std::size_t b = 0; b < batch; ++b) {
    double* gr = gates.data() + b * g4;
    for (std::size_t j = 0; j < 3 * hidden; ++j) gr[j] = sigmoid(gr[j]);
    for (std::size_t j = 3 * hidden; j < g4; ++j) gr[j] = std::tanh(gr[j]);
    const double* cp = c_prev.data() + b * hidden;
    double* cr = c.data() + b * hidden;
    double* tr = tanh_c.data() + b * hidden;
    double* hr = h.data() + b * hidden;
    for (std::size_t j = 0; j < hidden; ++j) {
      const double i = gr[j], f = gr[hidden + j], o = gr[2 * hidden + j], g = gr[3 * hidden + j];
      cr[j] = f * cp[j] + i * g;
      tr[j] = std::tanh(cr[j]);
      hr[j] = o * tr[j];
    }
  }
}

void lstm_gates_backward(std::span<const double> gates, std::span<const double> c_prev,
                         std::span<const double> tanh_c, std::span<const double> dh,
                         std::span<double> dc, std::span<double> dgates, std::size_t batch,
                         std::size_t hidden) {
  const std::size_t g4 = 4 * hidden;
  for (std::size_t b = 0; b < batch; ++b) {
    const double* gr = gates.data() + b * g4;
    double* dg = dgates.data() + b * g4;
    for (std::size_t j = 0; j < hidden; ++j) {
      const std::size_t r = b * hidden + j;
      const double i = gr[j], f = gr[hidden + j], o = gr[2 * hidden + j], g = gr[3 * hidden + j];
      const double tc = tanh_c[r];
      const double dcell = dh[r] * o * (1.0 - tc * tc) + dc[r];
      dg[j] = dcell * g * i * (1.0 - i);
      dg[hidden + j] = dcell * c_prev[r] * f * (1.0 - f);
      dg[2 * hidden + j] = dh[r] * tc * o * (1.0 - o);
      dg[3 * hidden + j] = dcell * i * (1.0 - g * g);
      dc[r] = dcell * f;
    }
  }
}

void apply_nonlinearity(std::span<double> x, Nonlinearity nl) {
  if (nl == Nonlinearity::tanh) {
    for (double& v : x) v = std::tanh(v);
  } else {
    for (double& v : x) v = v > 0 ? v : 0.0;
  }
}

void nonlinearity_backward(std::span<const double> y, std::span<double> dx, Nonlinearity nl) {
  if (nl == Nonlinearity::tanh) {
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= 1.0 - y[i] * y[i];
  } else {
    for (std::size_t i = 0; i < dx.size(); ++i) {
      if (!(y[i] > 0)) dx[i] = 0.0;
    }
  }
}

std::vector<double> lstm_step(std::span<const double> x, RecurrentState& state,
                              const Tensor& weight, const Tensor& bias) {
  check_cell_shapes(x, state, weight, bias, 4);
  const std::size_t hidden = state.h.size();
  if (state.c.size() != hidden) throw ShapeError("lstm_step: cell state size mismatch");
  std::vector<double> z(x.begin(), x.end());
  z.insert(z.end(), state.h.begin(), state.h.end());
  std::vector<double> gates(bias.data);
  kernels::gemm_nn(z, weight.span(), gates, 1, z.size(), 4 * hidden);
  std::vector<double> c(hidden), tc(hidden), h(hidden);
  lstm_gates_forward(gates, state.c, c, tc, h, 1, hidden);
  state.c = std::move(c);
  state.h = h;
  return h;
}

std::vector<double> rnn_step(std::span<const double> x, RecurrentState& state,
                             const Tensor& weight, const Tensor& bias, Nonlinearity nl) {
  check_cell_shapes(x, state, weight, bias, 1);
  std::vector<double> z(x.begin(), x.end());
  z.insert(z.end(), state.h.begin(), state.h.end());
  std::vector<double> h(bias.data);
  kernels::gemm_nn(z, weight.span(), h, 1, z.size(), h.size());
  apply_nonlinearity(h, nl);
  state.h = h;
  return h;
}

void softmax(std::span<double> v) {
  if (v.empty()) return;
  const double mx = *std::max_element(v.begin(), v.end());
  double s = 0;
  for (double& x : v) {
    x = std::exp(x - mx);
    s += x;
  }
  const double inv = 1.0 / s;
  for (double& x : v) x *= inv;
}

double log_softmax_at(std::span<const double> logits, int target) {
  if (target < 0 || static_cast<std::size_t>(target) >= logits.size()) {
    throw std::out_of_range("softmax target " + std::to_string(target) + " out of range");
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double s = 0;
  for (double x : logits) s += std::exp(x - mx);
  return logits[static_cast<std::size_t>(target)] - mx - std::log(s);
}

XentResult softmax_xent(std::span<const double> logits, int target) {
  XentResult r;
  r.loss = -log_softmax_at(logits, target);
  r.grad.assign(logits.begin(), logits.end());
  softmax(r.grad);
  r.grad[static_cast<std::size_t>(target)] -= 1.0;
  return r;
}

std::vector<double> dropout(std::span<const double> x, double p, Rng& rng, bool training) {
  if (!(p >= 0 && p < 1)) throw ConfigError("dropout rate must lie in [0,1)");
  std::vector<double> out(x.begin(), x.end());
  if (!training || p == 0) return out;
  const double scale = 1.0 / (1.0 - p);
  for (double& v : out) v = rng.uniform() < p ? 0.0 : v * scale;
  return out;
}

void sgd_step(ParamSet& params, double lr, double clip) {
  double sq = 0;
  for (const auto& p : params.params()) {
    for (double g : p.grad.data) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter " + p.name);
      sq += g * g;
    }
  }
  const double norm = std::sqrt(sq);
  const double scale = norm > clip ? clip / norm : 1.0;
  for (auto& p : params.params()) {
    auto& v = p.value.data;
    auto& g = p.grad.data;
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * (scale * g[i]);
    std::fill(g.begin(), g.end(), 0.0);
  }
}

void init_uniform(Tensor& t, double bound, Rng& rng) {
  for (double& v : t.data) v = rng.uniform(-bound, bound);
}

GradCheckReport grad_check(ParamSet& params, const std::function<double()>& loss,
                           const std::function<void()>& compute_grad, double eps,
                           std::size_t per_param, std::uint64_t seed) {
  params.zero_grad();
  compute_grad();
  Rng rng(seed);
  GradCheckReport report;
  for (auto& p : params.params()) {
    std::vector<std::size_t> idx(p.value.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    rng.shuffle(idx);
    if (idx.size() > per_param) idx.resize(per_param);
    for (std::size_t i : idx) {
      const double saved = p.value.data[i];
      p.value.data[i] = saved + eps;
      const double up = loss();
      p.value.data[i] = saved - eps;
      const double down = loss();
      p.value.data[i] = saved;
      const double numeric = (up - down) / (2 * eps);
      const double analytic = p.grad.data[i];
      const double rel = std::abs(analytic - numeric) /
                         std::max(std::abs(analytic) + std::abs(numeric), 1e-8);
      ++report.checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = p.name;
        report.worst_index = i;
      }
    }
  }
  return report;
}

}  // namespace cnlm
