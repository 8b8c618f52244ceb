#pragma once

#include <cmath>
#include <vector>

#include "dha/nn/autograd.hpp"

namespace dha::nn {

struct AdamOptions {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
};

/// Adam with bias correction. With beta1 = 0 this is a momentum-free adaptive step.
template <typename T>
class Adam {
 public:
  Adam(std::vector<Var<T>> params, AdamOptions opts) : params_(std::move(params)), opts_(opts) {
    for (const auto& p : params_) {
      m_.emplace_back(p->value.size(), 0.0);
      v_.emplace_back(p->value.size(), 0.0);
    }
  }

  void set_lr(double lr) { opts_.lr = lr; }
  double lr() const { return opts_.lr; }
  long steps() const { return t_; }

  /// Applies accumulated gradients and clears them.
  void step() {
    ++t_;
    const double c1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& p = *params_[k];
      if (p.grad.empty()) continue;
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double g = static_cast<double>(p.grad[i]);
        m[i] = opts_.beta1 * m[i] + (1.0 - opts_.beta1) * g;
        v[i] = opts_.beta2 * v[i] + (1.0 - opts_.beta2) * g * g;
        const double update = opts_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + opts_.eps);
        p.value[i] = static_cast<T>(static_cast<double>(p.value[i]) - update);
      }
      p.zero_grad();
    }
  }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

 private:
  std::vector<Var<T>> params_;
  AdamOptions opts_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  long t_ = 0;
};

struct SgdOptions {
  double lr = 2.5e-4;
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

/// SGD with heavy-ball momentum and L2 weight decay folded into the gradient.
template <typename T>
class Sgd {
 public:
  Sgd(std::vector<Var<T>> params, SgdOptions opts) : params_(std::move(params)), opts_(opts) {
    for (const auto& p : params_) buf_.emplace_back(p->value.size(), 0.0);
  }

  void set_lr(double lr) { opts_.lr = lr; }
  double lr() const { return opts_.lr; }

  void step() {
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& p = *params_[k];
      if (p.grad.empty()) continue;
      auto& b = buf_[k];
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double w = static_cast<double>(p.value[i]);
        const double g = static_cast<double>(p.grad[i]) + opts_.weight_decay * w;
        b[i] = opts_.momentum * b[i] + g;
        p.value[i] = static_cast<T>(w - opts_.lr * b[i]);
      }
      p.zero_grad();
    }
  }

 private:
  std::vector<Var<T>> params_;
  SgdOptions opts_;
  std::vector<std::vector<double>> buf_;
};

/// (1 - iter/max_iter)^power learning-rate schedule.
inline double poly_lr(double base, long iter, long max_iter, double power = 0.9) {
  if (max_iter <= 0) return base;
  const double frac = std::max(0.0, 1.0 - static_cast<double>(iter) / max_iter);
  return base * std::pow(frac, power);
}

}  // namespace dha::nn
