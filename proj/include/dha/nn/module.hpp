#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dha/nn/conv.hpp"
#include "dha/nn/ops.hpp"

namespace dha::nn {

/// Ordered, named list of trainable tensors belonging to one network.
template <typename T>
class ParamSet {
 public:
  ParamSet() = default;
  ParamSet(const ParamSet&) = delete;
  ParamSet& operator=(const ParamSet&) = delete;
  ParamSet(ParamSet&&) noexcept = default;
  ParamSet& operator=(ParamSet&&) noexcept = default;

  Var<T> add(std::string name, Tensor<T> init) {
    for (const auto& [n, _] : params_) {
      if (n == name) throw std::logic_error("duplicate parameter name " + name);
    }
    auto v = leaf(std::move(init), true);
    params_.emplace_back(std::move(name), v);
    return v;
  }

  const std::vector<std::pair<std::string, Var<T>>>& entries() const { return params_; }

  std::vector<Var<T>> vars() const {
    std::vector<Var<T>> out;
    out.reserve(params_.size());
    for (const auto& [_, v] : params_) out.push_back(v);
    return out;
  }

  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& [_, v] : params_) n += v->value.size();
    return n;
  }

  void set_trainable(bool on) {
    for (auto& [_, v] : params_) {
      v->requires_grad = on;
      v->zero_grad();
    }
  }

  void zero_grad() {
    for (auto& [_, v] : params_) v->zero_grad();
  }

  /// Copies values from another set with the same layout (possibly another scalar type).
  template <typename U>
  void copy_from(const ParamSet<U>& other) {
    const auto& src = other.entries();
    if (src.size() != params_.size()) throw std::invalid_argument("parameter layout mismatch");
    for (std::size_t i = 0; i < src.size(); ++i) {
      if (src[i].first != params_[i].first ||
          !(src[i].second->value.shape() == params_[i].second->value.shape())) {
        throw std::invalid_argument("parameter layout mismatch at " + src[i].first);
      }
      params_[i].second->value = src[i].second->value.template cast<T>();
    }
  }

 private:
  std::vector<std::pair<std::string, Var<T>>> params_;
};

/// Convolution layer with He-uniform initialised weights and zero bias.
template <typename T>
struct Conv2d {
  Var<T> weight;
  Var<T> bias;
  ConvGeometry geometry;

  Conv2d() = default;
  Conv2d(ParamSet<T>& params, const std::string& name, int in_ch, int out_ch, int kernel,
         int stride, int pad, std::mt19937_64& rng, double gain = std::sqrt(2.0)) {
    geometry = {stride, pad};
    const int fan_in = in_ch * kernel * kernel;
    const double bound = gain * std::sqrt(3.0 / fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor<T> w(Shape{out_ch, in_ch, kernel, kernel});
    for (auto& v : w.span()) v = static_cast<T>(dist(rng));
    weight = params.add(name + ".weight", std::move(w));
    bias = params.add(name + ".bias", Tensor<T>(Shape{1, out_ch, 1, 1}));
  }

  Var<T> operator()(const Var<T>& x) const { return conv2d(x, weight, bias, geometry); }
  int out_channels() const { return weight->value.shape().n; }
};

}  // namespace dha::nn
