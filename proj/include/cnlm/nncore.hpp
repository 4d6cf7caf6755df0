#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cnlm/rng.hpp"
#include "cnlm/tensor.hpp"

namespace cnlm {

enum class Nonlinearity { tanh, relu };

Nonlinearity parse_nonlinearity(std::string_view name);
std::string to_string(Nonlinearity n);

struct RecurrentState {
  std::vector<double> h;
  std::vector<double> c;  // empty for vanilla RNN cells
};

// One LSTM step. `weight` is [(in + hidden) x 4*hidden] with gate blocks
// ordered input, forget, output, candidate; `bias` is [4*hidden].
std::vector<double> lstm_step(std::span<const double> x, RecurrentState& state,
                              const Tensor& weight, const Tensor& bias);

// One vanilla RNN step; `weight` is [(in + hidden) x hidden].
std::vector<double> rnn_step(std::span<const double> x, RecurrentState& state,
                             const Tensor& weight, const Tensor& bias, Nonlinearity nl);

// Batched gate math shared with the networks. `gates` holds pre-activations
// on entry and activations on exit ([batch x 4*hidden]).
void lstm_gates_forward(std::span<double> gates, std::span<const double> c_prev,
                        std::span<double> c, std::span<double> tanh_c, std::span<double> h,
                        std::size_t batch, std::size_t hidden);

// Given dh and the carry dc (gradient w.r.t. this step's cell state, from
// the next step), writes pre-activation gate gradients and replaces dc by
// the gradient w.r.t. the previous cell state.
void lstm_gates_backward(std::span<const double> gates, std::span<const double> c_prev,
                         std::span<const double> tanh_c, std::span<const double> dh,
                         std::span<double> dc, std::span<double> dgates, std::size_t batch,
                         std::size_t hidden);

void apply_nonlinearity(std::span<double> x, Nonlinearity nl);
// dx *= phi'(.) expressed through the activation output y.
void nonlinearity_backward(std::span<const double> y, std::span<double> dx, Nonlinearity nl);

// In-place numerically stable softmax.
void softmax(std::span<double> v);

struct XentResult {
  double loss = 0;  // nats
  std::vector<double> grad;
};

XentResult softmax_xent(std::span<const double> logits, int target);

// log softmax(logits)[target], computed with max subtraction.
double log_softmax_at(std::span<const double> logits, int target);

// Inverted dropout; identity at inference or p == 0.
std::vector<double> dropout(std::span<const double> x, double p, Rng& rng, bool training);

// Global-norm clipping followed by a plain SGD update; gradients are zeroed.
// Throws NumericError naming the parameter when a gradient is not finite.
void sgd_step(ParamSet& params, double lr, double clip);

void init_uniform(Tensor& t, double bound, Rng& rng);

struct GradCheckReport {
  double max_rel_error = 0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

// Central differences on a random subset of coordinates (at most
// `per_param` per parameter) against the analytic gradients that
// `compute_grad` leaves in params.grad. Relative error is
// |a - n| / max(|a| + |n|, 1e-8).
GradCheckReport grad_check(ParamSet& params, const std::function<double()>& loss,
                           const std::function<void()>& compute_grad, double eps,
                           std::size_t per_param, std::uint64_t seed);

}  // namespace cnlm
