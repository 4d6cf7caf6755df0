#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cnlm/nncore.hpp"
#include "cnlm/rng.hpp"
#include "cnlm/tensor.hpp"

namespace cnlm {

enum class CellKind { lstm, rnn };

struct NetShape {
  CellKind cell = CellKind::lstm;
  Nonlinearity nonlinearity = Nonlinearity::tanh;
  std::size_t vocab = 0;
  std::size_t embedding = 0;
  std::size_t hidden = 0;
  std::size_t layers = 1;
  bool output_layer = true;

  std::size_t gate_count() const { return cell == CellKind::lstm ? 4 : 1; }
  std::size_t layer_input(std::size_t l) const { return l == 0 ? embedding : hidden; }
};

struct DropoutRates {
  double input = 0;      // elementwise, on the embedding fed to the first layer
  double embedding = 0;  // whole embedding rows, resampled per window
  double hidden = 0;     // elementwise, between stacked layers
  bool any() const { return input > 0 || embedding > 0 || hidden > 0; }
};

// Embedding -> stacked LSTM/RNN layers -> optional softmax output layer.
// Parameters live in a ParamSet under `prefix`:
//   embedding [V x E], layer<l>.weight [(in + H) x G*H], layer<l>.bias [G*H],
//   output.weight [H x V], output.bias [V].
class RecurrentNet {
 public:
  struct State {
    std::size_t batch = 0;
    std::vector<std::vector<double>> h;  // per layer, [batch x hidden]
    std::vector<std::vector<double>> c;  // per layer (LSTM only)
  };

  struct Tape;

  RecurrentNet(const NetShape& shape, const ParamSet& params, std::string prefix = "");

  // Adds freshly initialized parameters: uniform(+-1/sqrt(fan_in)) weights,
  // zero biases except forget-gate biases of 1.
  static void create_params(ParamSet& params, const NetShape& shape, const std::string& prefix,
                            Rng& rng);

  const NetShape& shape() const { return shape_; }
  State zero_state(std::size_t batch) const;

  // Consumes one symbol per batch row.
  void step(std::span<const int> ids, State& state) const;
  // Output logits [batch x vocab] computed from the top layer of `state`.
  void logits(const State& state, std::vector<double>& out) const;

  // Forward over a window of T steps (inputs[t][b]); state is carried in and
  // out. With targets (negative ids are ignored), returns the summed
  // negative log-likelihood in nats and records probabilities for backward.
  double forward(const std::vector<std::vector<int>>& inputs,
                 const std::vector<std::vector<int>>* targets, State& state, Tape& tape,
                 const DropoutRates& dropout, Rng* rng,
                 const std::vector<std::vector<char>>* resets = nullptr) const;

  // Accumulates gradients of loss_scale * NLL (plus <d_final, final state>)
  // into `grads`, which must be the ParamSet this net was built on.
  // Optionally returns the gradient with respect to the initial state.
  void backward(const Tape& tape, double loss_scale, ParamSet& grads,
                const State* d_final = nullptr, State* d_initial = nullptr) const;

 private:
  struct LayerParams {
    const Tensor* weight;
    const Tensor* bias;
  };

  NetShape shape_;
  std::string prefix_;
  const Tensor* embedding_;
  std::vector<LayerParams> layers_;
  const Tensor* out_weight_ = nullptr;
  const Tensor* out_bias_ = nullptr;
};

struct RecurrentNet::Tape {
  struct Layer {
    std::vector<double> z;       // [T x B x (in + H)]
    std::vector<double> act;     // gate activations (LSTM) or h (RNN), [T x B x G*H]
    std::vector<double> c_prev;  // [T x B x H]
    std::vector<double> tanh_c;  // [T x B x H]
    std::vector<double> h;       // [T x B x H]
    std::vector<double> mask;    // hidden dropout mask applied to h before the next layer
  };
  std::size_t steps = 0;
  std::size_t batch = 0;
  bool has_targets = false;
  std::vector<int> inputs;        // [T x B]
  std::vector<int> targets;       // [T x B]
  std::vector<char> resets;       // [T x B]
  std::vector<double> probs;      // [T x B x V]
  std::vector<double> emb_scale;  // [V], embedding-dropout row scale
  std::vector<double> in_mask;    // [T x B x E]
  std::vector<Layer> layers;
};

// Finite-difference check of every parameter group (embedding, recurrent
// layers, output layer) on a randomly initialized net unrolled for `steps`
// steps over a batch of 2 with random inputs and targets.
GradCheckReport check_network_gradients(const NetShape& shape, std::uint64_t seed, std::size_t steps = 3,
                                        double eps = 1e-3, std::size_t per_param = 25);

}  // namespace cnlm
