#include "cnlm/network.hpp"

#include <algorithm>
#include <cmath>

#include "cnlm/error.hpp"
#include "cnlm/kernels.hpp"

namespace cnlm {
namespace {

std::string layer_name(const std::string& prefix, std::size_t l, const char* what) {
  return prefix + "layer" + std::to_string(l) + "." + what;
}

template <typename T>
std::span<T> slice(std::vector<T>& v, std::size_t offset, std::size_t n) {
  return std::span<T>(v.data() + offset, n);
}

template <typename T>
std::span<const T> slice(const std::vector<T>& v, std::size_t offset, std::size_t n) {
  return std::span<const T>(v.data() + offset, n);
}

}  // namespace

RecurrentNet::RecurrentNet(const NetShape& shape, const ParamSet& params, std::string prefix)
    : shape_(shape), prefix_(std::move(prefix)) {
  const std::size_t gh = shape_.gate_count() * shape_.hidden;
  embedding_ = &params.get(prefix_ + "embedding").value;
  if (embedding_->shape != std::vector<std::size_t>{shape_.vocab, shape_.embedding}) {
    throw ShapeError(prefix_ + "embedding shape does not match the network configuration");
  }
  for (std::size_t l = 0; l < shape_.layers; ++l) {
    const auto& w = params.get(layer_name(prefix_, l, "weight")).value;
    const auto& b = params.get(layer_name(prefix_, l, "bias")).value;
    if (w.shape != std::vector<std::size_t>{shape_.layer_input(l) + shape_.hidden, gh} ||
        b.size() != gh) {
      throw ShapeError(layer_name(prefix_, l, "weight") + " shape does not match configuration");
    }
    layers_.push_back({&w, &b});
  }
  if (shape_.output_layer) {
    out_weight_ = &params.get(prefix_ + "output.weight").value;
    out_bias_ = &params.get(prefix_ + "output.bias").value;
    if (out_weight_->shape != std::vector<std::size_t>{shape_.hidden, shape_.vocab}) {
      throw ShapeError(prefix_ + "output.weight shape does not match configuration");
    }
  }
}

void RecurrentNet::create_params(ParamSet& params, const NetShape& shape,
                                 const std::string& prefix, Rng& rng) {
  const std::size_t gh = shape.gate_count() * shape.hidden;
  // A one-hot lookup has fan-in 1.
  init_uniform(params.add(prefix + "embedding", {shape.vocab, shape.embedding}).value, 1.0, rng);
  for (std::size_t l = 0; l < shape.layers; ++l) {
    const std::size_t fan_in = shape.layer_input(l) + shape.hidden;
    init_uniform(params.add(layer_name(prefix, l, "weight"), {fan_in, gh}).value,
                 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
    auto& bias = params.add(layer_name(prefix, l, "bias"), {gh}).value;
    if (shape.cell == CellKind::lstm) {
      std::fill(bias.data.begin() + static_cast<std::ptrdiff_t>(shape.hidden),
                bias.data.begin() + static_cast<std::ptrdiff_t>(2 * shape.hidden), 1.0);
    }
  }
  if (shape.output_layer) {
    init_uniform(params.add(prefix + "output.weight", {shape.hidden, shape.vocab}).value,
                 1.0 / std::sqrt(static_cast<double>(shape.hidden)), rng);
    params.add(prefix + "output.bias", {shape.vocab});
  }
}

RecurrentNet::State RecurrentNet::zero_state(std::size_t batch) const {
  State s;
  s.batch = batch;
  s.h.assign(shape_.layers, std::vector<double>(batch * shape_.hidden, 0.0));
  if (shape_.cell == CellKind::lstm) {
    s.c.assign(shape_.layers, std::vector<double>(batch * shape_.hidden, 0.0));
  }
  return s;
}

void RecurrentNet::step(std::span<const int> ids, State& state) const {
  const std::size_t B = ids.size();
  const std::size_t H = shape_.hidden;
  const std::size_t E = shape_.embedding;
  if (state.batch != B) throw ShapeError("state batch does not match input batch");
  std::vector<double> x(B * E);
  for (std::size_t b = 0; b < B; ++b) {
    const auto id = static_cast<std::size_t>(ids[b]);
    if (id >= shape_.vocab) throw std::out_of_range("symbol id out of range");
    std::copy_n(embedding_->data.begin() + static_cast<std::ptrdiff_t>(id * E), E,
                x.begin() + static_cast<std::ptrdiff_t>(b * E));
  }
  std::vector<double> z, act, tc(B * H);
  for (std::size_t l = 0; l < shape_.layers; ++l) {
    const std::size_t in = shape_.layer_input(l);
    const std::size_t zw = in + H;
    const std::size_t gh = shape_.gate_count() * H;
    z.resize(B * zw);
    for (std::size_t b = 0; b < B; ++b) {
      std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(b * in), in,
                  z.begin() + static_cast<std::ptrdiff_t>(b * zw));
      std::copy_n(state.h[l].begin() + static_cast<std::ptrdiff_t>(b * H), H,
                  z.begin() + static_cast<std::ptrdiff_t>(b * zw + in));
    }
    act.assign(B * gh, 0.0);
    kernels::add_bias(act, layers_[l].bias->span(), B, gh);
    kernels::gemm_nn(z, layers_[l].weight->span(), act, B, zw, gh);
    if (shape_.cell == CellKind::lstm) {
      const std::vector<double> c_prev = state.c[l];
      lstm_gates_forward(act, c_prev, state.c[l], tc, state.h[l], B, H);
    } else {
      apply_nonlinearity(act, shape_.nonlinearity);
      state.h[l] = act;
    }
    x = state.h[l];
  }
}

void RecurrentNet::logits(const State& state, std::vector<double>& out) const {
  if (!shape_.output_layer) throw std::logic_error("network has no output layer");
  const std::size_t B = state.batch;
  out.assign(B * shape_.vocab, 0.0);
  kernels::add_bias(out, out_bias_->span(), B, shape_.vocab);
  kernels::gemm_nn(state.h.back(), out_weight_->span(), out, B, shape_.hidden, shape_.vocab);
}

double RecurrentNet::forward(const std::vector<std::vector<int>>& inputs,
                             const std::vector<std::vector<int>>* targets, State& state,
                             Tape& tape, const DropoutRates& dropout, Rng* rng,
                             const std::vector<std::vector<char>>* resets) const {
  const std::size_t T = inputs.size();
  const std::size_t B = state.batch;
  const std::size_t H = shape_.hidden;
  const std::size_t E = shape_.embedding;
  const std::size_t V = shape_.vocab;
  const std::size_t L = shape_.layers;
  const bool lstm = shape_.cell == CellKind::lstm;
  if (dropout.any() && rng == nullptr) throw std::logic_error("dropout requires an RNG");
  if (targets && !shape_.output_layer) throw std::logic_error("targets need an output layer");

  tape.steps = T;
  tape.batch = B;
  tape.has_targets = targets != nullptr;
  tape.inputs.assign(T * B, 0);
  tape.targets.assign(targets ? T * B : 0, -1);
  tape.resets.assign(T * B, 0);
  for (std::size_t t = 0; t < T; ++t) {
    if (inputs[t].size() != B) throw ShapeError("input row size does not match batch");
    for (std::size_t b = 0; b < B; ++b) {
      tape.inputs[t * B + b] = inputs[t][b];
      if (targets) tape.targets[t * B + b] = (*targets)[t][b];
      if (resets) tape.resets[t * B + b] = (*resets)[t][b];
    }
  }

  tape.emb_scale.assign(V, 1.0);
  if (dropout.embedding > 0) {
    const double keep = 1.0 / (1.0 - dropout.embedding);
    for (auto& s : tape.emb_scale) s = rng->uniform() < dropout.embedding ? 0.0 : keep;
  }
  tape.in_mask.assign(dropout.input > 0 ? T * B * E : 0, 1.0);
  if (dropout.input > 0) {
    const double keep = 1.0 / (1.0 - dropout.input);
    for (auto& m : tape.in_mask) m = rng->uniform() < dropout.input ? 0.0 : keep;
  }

  tape.layers.resize(L);
  for (std::size_t l = 0; l < L; ++l) {
    auto& lt = tape.layers[l];
    const std::size_t zw = shape_.layer_input(l) + H;
    lt.z.resize(T * B * zw);
    lt.act.resize(T * B * shape_.gate_count() * H);
    lt.c_prev.resize(lstm ? T * B * H : 0);
    lt.tanh_c.resize(lstm ? T * B * H : 0);
    lt.h.resize(T * B * H);
    const bool masked = dropout.hidden > 0 && l + 1 < L;
    lt.mask.assign(masked ? T * B * H : 0, 1.0);
    if (masked) {
      const double keep = 1.0 / (1.0 - dropout.hidden);
      for (auto& m : lt.mask) m = rng->uniform() < dropout.hidden ? 0.0 : keep;
    }
  }
  if (targets) tape.probs.resize(T * B * V);

  double nll = 0;
  std::vector<double> x;
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t b = 0; b < B; ++b) {
      if (!tape.resets[t * B + b]) continue;
      for (std::size_t l = 0; l < L; ++l) {
        std::fill_n(state.h[l].begin() + static_cast<std::ptrdiff_t>(b * H), H, 0.0);
        if (lstm) std::fill_n(state.c[l].begin() + static_cast<std::ptrdiff_t>(b * H), H, 0.0);
      }
    }
    x.resize(B * E);
    for (std::size_t b = 0; b < B; ++b) {
      const int id = tape.inputs[t * B + b];
      if (id < 0 || static_cast<std::size_t>(id) >= V) throw std::out_of_range("symbol id out of range");
      const double s = tape.emb_scale[static_cast<std::size_t>(id)];
      const double* row = embedding_->data.data() + static_cast<std::size_t>(id) * E;
      for (std::size_t e = 0; e < E; ++e) {
        double v = row[e] * s;
        if (!tape.in_mask.empty()) v *= tape.in_mask[(t * B + b) * E + e];
        x[b * E + e] = v;
      }
    }
    for (std::size_t l = 0; l < L; ++l) {
      auto& lt = tape.layers[l];
      const std::size_t in = shape_.layer_input(l);
      const std::size_t zw = in + H;
      const std::size_t gh = shape_.gate_count() * H;
      auto z = slice(lt.z, t * B * zw, B * zw);
      for (std::size_t b = 0; b < B; ++b) {
        std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(b * in), in, z.begin() + static_cast<std::ptrdiff_t>(b * zw));
        std::copy_n(state.h[l].begin() + static_cast<std::ptrdiff_t>(b * H), H,
                    z.begin() + static_cast<std::ptrdiff_t>(b * zw + in));
      }
      auto act = slice(lt.act, t * B * gh, B * gh);
      std::fill(act.begin(), act.end(), 0.0);
      kernels::add_bias(act, layers_[l].bias->span(), B, gh);
      kernels::gemm_nn(z, layers_[l].weight->span(), act, B, zw, gh);
      auto h = slice(lt.h, t * B * H, B * H);
      if (lstm) {
        auto c_prev = slice(lt.c_prev, t * B * H, B * H);
        std::copy(state.c[l].begin(), state.c[l].end(), c_prev.begin());
        lstm_gates_forward(act, c_prev, state.c[l], slice(lt.tanh_c, t * B * H, B * H), h, B, H);
      } else {
        apply_nonlinearity(act, shape_.nonlinearity);
        std::copy(act.begin(), act.end(), h.begin());
      }
      std::copy(h.begin(), h.end(), state.h[l].begin());
      x.assign(h.begin(), h.end());
      if (!lt.mask.empty()) {
        for (std::size_t i = 0; i < B * H; ++i) x[i] *= lt.mask[t * B * H + i];
      }
    }
    if (targets) {
      auto p = slice(tape.probs, t * B * V, B * V);
      std::fill(p.begin(), p.end(), 0.0);
      kernels::add_bias(p, out_bias_->span(), B, V);
      kernels::gemm_nn(x, out_weight_->span(), p, B, H, V);
      for (std::size_t b = 0; b < B; ++b) {
        auto row = p.subspan(b * V, V);
        const int target = tape.targets[t * B + b];
        if (target >= 0) nll -= log_softmax_at(row, target);
        softmax(row);
      }
    }
  }
  return nll;
}

void RecurrentNet::backward(const Tape& tape, double loss_scale, ParamSet& grads,
                            const State* d_final, State* d_initial) const {
  const std::size_t T = tape.steps;
  const std::size_t B = tape.batch;
  const std::size_t H = shape_.hidden;
  const std::size_t E = shape_.embedding;
  const std::size_t V = shape_.vocab;
  const std::size_t L = shape_.layers;
  const bool lstm = shape_.cell == CellKind::lstm;

  auto& g_emb = grads.get(prefix_ + "embedding").grad.data;
  std::vector<std::vector<double>*> g_w(L), g_b(L);
  for (std::size_t l = 0; l < L; ++l) {
    g_w[l] = &grads.get(layer_name(prefix_, l, "weight")).grad.data;
    g_b[l] = &grads.get(layer_name(prefix_, l, "bias")).grad.data;
  }
  std::vector<double>* g_ow = nullptr;
  std::vector<double>* g_ob = nullptr;
  if (tape.has_targets) {
    g_ow = &grads.get(prefix_ + "output.weight").grad.data;
    g_ob = &grads.get(prefix_ + "output.bias").grad.data;
  }

  std::vector<std::vector<double>> dh_carry(L, std::vector<double>(B * H, 0.0));
  std::vector<std::vector<double>> dc_carry(L, std::vector<double>(lstm ? B * H : 0, 0.0));
  if (d_final) {
    for (std::size_t l = 0; l < L; ++l) {
      dh_carry[l] = d_final->h[l];
      if (lstm) dc_carry[l] = d_final->c[l];
    }
  }

  std::vector<double> dlogits(B * V), d_above(B * H), dh(B * H), dgates, dz, top_in(B * H);
  for (std::size_t t = T; t-- > 0;) {
    std::fill(d_above.begin(), d_above.end(), 0.0);
    if (tape.has_targets) {
      for (std::size_t b = 0; b < B; ++b) {
        const int target = tape.targets[t * B + b];
        double* dl = dlogits.data() + b * V;
        const double* p = tape.probs.data() + (t * B + b) * V;
        if (target < 0) {
          std::fill_n(dl, V, 0.0);
          continue;
        }
        for (std::size_t v = 0; v < V; ++v) dl[v] = p[v] * loss_scale;
        dl[static_cast<std::size_t>(target)] -= loss_scale;
      }
      // Input to the output layer is the (unmasked) top hidden state.
      const auto& top = tape.layers[L - 1];
      std::copy_n(top.h.begin() + static_cast<std::ptrdiff_t>(t * B * H), B * H, top_in.begin());
      kernels::gemm_tn(top_in, dlogits, *g_ow, B, H, V);
      kernels::col_sums(dlogits, *g_ob, B, V);
      kernels::gemm_nt(dlogits, out_weight_->span(), d_above, B, V, H);
    }
    for (std::size_t l = L; l-- > 0;) {
      const auto& lt = tape.layers[l];
      const std::size_t in = shape_.layer_input(l);
      const std::size_t zw = in + H;
      const std::size_t gh = shape_.gate_count() * H;
      for (std::size_t i = 0; i < B * H; ++i) dh[i] = d_above[i] + dh_carry[l][i];
      dgates.resize(B * gh);
      const auto act = slice(lt.act, t * B * gh, B * gh);
      if (lstm) {
        lstm_gates_backward(act, slice(lt.c_prev, t * B * H, B * H),
                            slice(lt.tanh_c, t * B * H, B * H), dh, dc_carry[l], dgates, B, H);
      } else {
        std::copy(dh.begin(), dh.end(), dgates.begin());
        nonlinearity_backward(act, dgates, shape_.nonlinearity);
      }
      const auto z = slice(lt.z, t * B * zw, B * zw);
      kernels::gemm_tn(z, dgates, *g_w[l], B, zw, gh);
      kernels::col_sums(dgates, *g_b[l], B, gh);
      dz.assign(B * zw, 0.0);
      kernels::gemm_nt(dgates, layers_[l].weight->span(), dz, B, gh, zw);
      for (std::size_t b = 0; b < B; ++b) {
        const bool reset = tape.resets[t * B + b] != 0;
        for (std::size_t j = 0; j < H; ++j) {
          dh_carry[l][b * H + j] = reset ? 0.0 : dz[b * zw + in + j];
        }
        if (reset && lstm) std::fill_n(dc_carry[l].begin() + static_cast<std::ptrdiff_t>(b * H), H, 0.0);
      }
      if (l > 0) {
        const auto& below = tape.layers[l - 1];
        for (std::size_t b = 0; b < B; ++b) {
          for (std::size_t j = 0; j < in; ++j) {
            double d = dz[b * zw + j];
            if (!below.mask.empty()) d *= below.mask[(t * B + b) * H + j];
            d_above[b * H + j] = d;
          }
        }
      } else {
        for (std::size_t b = 0; b < B; ++b) {
          const auto id = static_cast<std::size_t>(tape.inputs[t * B + b]);
          const double s = tape.emb_scale[id];
          if (s == 0.0) continue;
          double* ge = g_emb.data() + id * E;
          for (std::size_t e = 0; e < E; ++e) {
            double d = dz[b * zw + e] * s;
            if (!tape.in_mask.empty()) d *= tape.in_mask[(t * B + b) * E + e];
            ge[e] += d;
          }
        }
      }
    }
  }
  if (d_initial) {
    d_initial->batch = B;
    d_initial->h = dh_carry;
    d_initial->c = dc_carry;
  }
}

GradCheckReport check_network_gradients(const NetShape& shape, std::uint64_t seed, std::size_t steps,
                                        double eps, std::size_t per_param) {
  Rng rng(seed);
  ParamSet params;
  RecurrentNet::create_params(params, shape, "", rng);
  // Shift every value off its initial grid so no gradient is structurally tiny.
  for (auto& p : params.params()) {
    for (auto& v : p.value.data) v += rng.uniform(-0.3, 0.3);
  }
  const RecurrentNet net(shape, params);
  const std::size_t batch = 2;
  std::vector<std::vector<int>> in(steps, std::vector<int>(batch)), out = in;
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t b = 0; b < batch; ++b) {
      in[t][b] = static_cast<int>(rng.below(shape.vocab));
      out[t][b] = static_cast<int>(rng.below(shape.vocab));
    }
  }
  RecurrentNet::Tape tape;
  auto loss = [&] {
    auto state = net.zero_state(batch);
    return net.forward(in, &out, state, tape, {}, nullptr);
  };
  auto grad = [&] {
    loss();
    net.backward(tape, 1.0, params);
  };
  return grad_check(params, loss, grad, eps, per_param, rng.next());
}

}  // namespace cnlm
