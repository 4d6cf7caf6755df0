#include "cnlm/tensor.hpp"

#include <cmath>
#include <stdexcept>

#include "cnlm/error.hpp"

namespace cnlm {

bool Tensor::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Param& ParamSet::add(std::string name, std::vector<std::size_t> shape) {
  if (contains(name)) throw ShapeError("duplicate parameter " + name);
  Param p;
  p.name = std::move(name);
  p.value = Tensor(shape);
  p.grad = Tensor(std::move(shape));
  params_.push_back(std::move(p));
  return params_.back();
}

Param& ParamSet::get(std::string_view name) {
  for (auto& p : params_) {
    if (p.name == name) return p;
  }
  throw std::out_of_range("no parameter named " + std::string(name));
}

const Param& ParamSet::get(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p;
  }
  throw std::out_of_range("no parameter named " + std::string(name));
}

bool ParamSet::contains(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name == name) return true;
  }
  return false;
}

void ParamSet::zero_grad() {
  for (auto& p : params_) std::fill(p.grad.data.begin(), p.grad.data.end(), 0.0);
}

double ParamSet::grad_norm() const {
  double s = 0;
  for (const auto& p : params_) {
    for (double g : p.grad.data) s += g * g;
  }
  return std::sqrt(s);
}

std::size_t ParamSet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

bool operator==(const ParamSet& a, const ParamSet& b) {
  if (a.params_.size() != b.params_.size()) return false;
  for (std::size_t i = 0; i < a.params_.size(); ++i) {
    if (a.params_[i].name != b.params_[i].name || !(a.params_[i].value == b.params_[i].value)) {
      return false;
    }
  }
  return true;
}

}  // namespace cnlm
