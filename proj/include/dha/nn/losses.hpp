#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "dha/nn/ops.hpp"

namespace dha::nn {

/// Discriminator logits are clamped to this magnitude before entering a loss, so
/// a saturated discriminator yields a large but finite loss.
inline constexpr double kLogitBound = 40.0;

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename T>
void require_finite(const Var<T>& x, const char* what) {
  for (T v : x->value.span()) {
    if (!std::isfinite(static_cast<double>(v))) {
      throw DivergenceError(std::string(what) + ": non-finite value");
    }
  }
}

template <typename T>
Var<T> bounded(const Var<T>& logits, const char* what) {
  require_finite(logits, what);
  return clamp(logits, T(-kLogitBound), T(kLogitBound));
}

/// mean log(sigmoid(l)) = -mean softplus(-l)
template <typename T>
Var<T> mean_log_prob_real(const Var<T>& logits) {
  return scale(mean(softplus(scale(logits, T(-1)))), T(-1));
}

/// mean log(1 - sigmoid(l)) = -mean softplus(l)
template <typename T>
Var<T> mean_log_prob_fake(const Var<T>& logits) {
  return scale(mean(softplus(logits)), T(-1));
}

/// mean (sigmoid(l) - target)^2
template <typename T>
Var<T> mean_squared_to(const Var<T>& logits, T target) {
  return mean(square(add_scalar(sigmoid(logits), -target)));
}

}  // namespace dha::nn
