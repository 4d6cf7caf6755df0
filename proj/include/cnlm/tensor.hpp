#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace cnlm {

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s)
      : shape(std::move(s)), data(element_count(shape), 0.0) {}

  static std::size_t element_count(const std::vector<std::size_t>& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
  }

  std::size_t size() const { return data.size(); }
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }
  std::span<double> span() { return data; }
  std::span<const double> span() const { return data; }
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
};

// Named parameters in insertion order, each with a gradient of equal shape.
class ParamSet {
 public:
  Param& add(std::string name, std::vector<std::size_t> shape);
  Param& get(std::string_view name);
  const Param& get(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }

  void zero_grad();
  double grad_norm() const;
  std::size_t parameter_count() const;

  friend bool operator==(const ParamSet& a, const ParamSet& b);

 private:
  std::vector<Param> params_;
};

}  // namespace cnlm
