#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "dha/nn/autograd.hpp"

namespace dha::nn {

namespace detail {

inline void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (!(a == b)) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.str() + " vs " + b.str());
  }
}

// y = f(x) elementwise, dy/dx expressed through (x, y).
template <typename T, typename F, typename DF>
Var<T> unary(const Var<T>& x, F f, DF df) {
  Tensor<T> out(x->value.shape());
  const T* xv = x->value.data();
  T* yv = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) yv[i] = f(xv[i]);
  return make_result<T>(std::move(out), {x}, [x, df](Node<T>& self) {
    if (!x->requires_grad) return;
    T* gx = x->grad_buffer().data();
    const T* xv = x->value.data();
    const T* yv = self.value.data();
    const T* gy = self.grad.data();
    for (std::size_t i = 0; i < self.value.size(); ++i) gx[i] += gy[i] * df(xv[i], yv[i]);
  });
}

}  // namespace detail

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  detail::require_same_shape(a->value.shape(), b->value.shape(), "add");
  Tensor<T> out(a->value.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] + b->value[i];
  return detail::make_result<T>(std::move(out), {a, b}, [a, b](Node<T>& self) {
    for (const auto& p : {a, b}) {
      if (!p->requires_grad) continue;
      auto& g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  detail::require_same_shape(a->value.shape(), b->value.shape(), "sub");
  Tensor<T> out(a->value.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] - b->value[i];
  return detail::make_result<T>(std::move(out), {a, b}, [a, b](Node<T>& self) {
    if (a->requires_grad) {
      auto& g = a->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (b->requires_grad) {
      auto& g = b->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  detail::require_same_shape(a->value.shape(), b->value.shape(), "mul");
  Tensor<T> out(a->value.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] * b->value[i];
  return detail::make_result<T>(std::move(out), {a, b}, [a, b](Node<T>& self) {
    if (a->requires_grad) {
      auto& g = a->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * b->value[i];
    }
    if (b->requires_grad) {
      auto& g = b->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * a->value[i];
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& x, T s) {
  return detail::unary(x, [s](T v) { return v * s; }, [s](T, T) { return s; });
}

template <typename T>
Var<T> add_scalar(const Var<T>& x, T s) {
  return detail::unary(x, [s](T v) { return v + s; }, [](T, T) { return T(1); });
}

template <typename T>
Var<T> operator+(const Var<T>& a, const Var<T>& b) { return add(a, b); }
template <typename T>
Var<T> operator-(const Var<T>& a, const Var<T>& b) { return sub(a, b); }
template <typename T>
Var<T> operator*(T s, const Var<T>& x) { return scale(x, s); }

template <typename T>
Var<T> relu(const Var<T>& x) {
  return detail::unary(
      x, [](T v) { return v > T(0) ? v : T(0); }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope = T(0.2)) {
  return detail::unary(
      x, [slope](T v) { return v > T(0) ? v : slope * v; },
      [slope](T v, T) { return v > T(0) ? T(1) : slope; });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  return detail::unary(
      x, [](T v) { return T(1) / (T(1) + std::exp(-v)); }, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var<T> tanh(const Var<T>& x) {
  return detail::unary(
      x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Var<T> exp(const Var<T>& x) {
  return detail::unary(
      x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Var<T> square(const Var<T>& x) {
  return detail::unary(
      x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

/// log(1 + e^x), evaluated without overflow.
template <typename T>
Var<T> softplus(const Var<T>& x) {
  return detail::unary(
      x,
      [](T v) { return v > T(0) ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); },
      [](T v, T) { return T(1) / (T(1) + std::exp(-v)); });
}

template <typename T>
Var<T> clamp(const Var<T>& x, T lo, T hi) {
  return detail::unary(
      x, [lo, hi](T v) { return std::min(std::max(v, lo), hi); },
      [lo, hi](T v, T) { return (v >= lo && v <= hi) ? T(1) : T(0); });
}

/// log(p / (1 - p)); inputs must lie strictly inside (0, 1).
template <typename T>
Var<T> logit(const Var<T>& x) {
  return detail::unary(
      x, [](T v) { return std::log(v / (T(1) - v)); }, [](T v, T) { return T(1) / (v * (T(1) - v)); });
}

/// Per-sample colour matrix: out[n,c] = sum_k m[n, 3c+k] * x[n,k] + m[n, 9+c].
/// x is [N,3,H,W], m is [N,12,1,1].
template <typename T>
Var<T> color_transform(const Var<T>& x, const Var<T>& m) {
  const auto s = x->value.shape();
  const auto ms = m->value.shape();
  if (s.c != 3 || ms.n != s.n || ms.c != 12 || ms.h != 1 || ms.w != 1) {
    throw std::invalid_argument("color_transform: expected [N,3,H,W] and [N,12,1,1], got " + s.str() + " and " +
                                ms.str());
  }
  const std::size_t plane = s.plane();
  Tensor<T> out(s);
  for (int n = 0; n < s.n; ++n) {
    const T* mv = m->value.data() + n * 12;
    const T* xv = x->value.data() + n * 3 * plane;
    T* yv = out.data() + n * 3 * plane;
    for (int c = 0; c < 3; ++c) {
      for (std::size_t p = 0; p < plane; ++p) {
        yv[c * plane + p] = mv[3 * c] * xv[p] + mv[3 * c + 1] * xv[plane + p] + mv[3 * c + 2] * xv[2 * plane + p] +
                            mv[9 + c];
      }
    }
  }
  return detail::make_result<T>(std::move(out), {x, m}, [x, m, plane](Node<T>& self) {
    const auto s = x->value.shape();
    for (int n = 0; n < s.n; ++n) {
      const T* mv = m->value.data() + n * 12;
      const T* xv = x->value.data() + n * 3 * plane;
      const T* gy = self.grad.data() + n * 3 * plane;
      if (x->requires_grad) {
        T* gx = x->grad_buffer().data() + n * 3 * plane;
        for (int c = 0; c < 3; ++c) {
          for (int k = 0; k < 3; ++k) {
            const T w = mv[3 * c + k];
            for (std::size_t p = 0; p < plane; ++p) gx[k * plane + p] += w * gy[c * plane + p];
          }
        }
      }
      if (m->requires_grad) {
        T* gm = m->grad_buffer().data() + n * 12;
        for (int c = 0; c < 3; ++c) {
          T bias = T(0);
          T acc[3] = {T(0), T(0), T(0)};
          for (std::size_t p = 0; p < plane; ++p) {
            const T g = gy[c * plane + p];
            bias += g;
            acc[0] += g * xv[p];
            acc[1] += g * xv[plane + p];
            acc[2] += g * xv[2 * plane + p];
          }
          for (int k = 0; k < 3; ++k) gm[3 * c + k] += acc[k];
          gm[9 + c] += bias;
        }
      }
    }
  });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
  T acc = T(0);
  for (T v : x->value.span()) acc += v;
  return detail::make_result<T>(Tensor<T>::scalar(acc), {x}, [x](Node<T>& self) {
    if (!x->requires_grad) return;
    const T g = self.grad[0];
    for (T& v : x->grad_buffer().span()) v += g;
  });
}

template <typename T>
Var<T> mean(const Var<T>& x) {
  return scale(sum(x), T(1) / static_cast<T>(x->value.size()));
}

/// Per-sample, per-channel spatial mean: [N,C,H,W] -> [N,C,1,1].
template <typename T>
Var<T> spatial_mean(const Var<T>& x) {
  const Shape s = x->value.shape();
  const std::size_t hw = s.plane();
  Tensor<T> out(Shape{s.n, s.c, 1, 1});
  for (std::size_t p = 0; p < static_cast<std::size_t>(s.n) * s.c; ++p) {
    T acc = T(0);
    for (std::size_t i = 0; i < hw; ++i) acc += x->value[p * hw + i];
    out[p] = acc / static_cast<T>(hw);
  }
  return detail::make_result<T>(std::move(out), {x}, [x, hw](Node<T>& self) {
    if (!x->requires_grad) return;
    auto& g = x->grad_buffer();
    for (std::size_t p = 0; p < self.value.size(); ++p) {
      const T gp = self.grad[p] / static_cast<T>(hw);
      for (std::size_t i = 0; i < hw; ++i) g[p * hw + i] += gp;
    }
  });
}

/// y = x * scale + shift with scale/shift of shape [N,C,1,1] broadcast over space.
template <typename T>
Var<T> channel_affine(const Var<T>& x, const Var<T>& scale_nc, const Var<T>& shift_nc) {
  const Shape s = x->value.shape();
  const Shape p{s.n, s.c, 1, 1};
  detail::require_same_shape(scale_nc->value.shape(), p, "channel_affine(scale)");
  detail::require_same_shape(shift_nc->value.shape(), p, "channel_affine(shift)");
  const std::size_t hw = s.plane();
  Tensor<T> out(s);
  for (std::size_t q = 0; q < p.numel(); ++q) {
    const T a = scale_nc->value[q];
    const T b = shift_nc->value[q];
    for (std::size_t i = 0; i < hw; ++i) out[q * hw + i] = x->value[q * hw + i] * a + b;
  }
  return detail::make_result<T>(
      std::move(out), {x, scale_nc, shift_nc}, [x, scale_nc, shift_nc, hw](Node<T>& self) {
        const std::size_t planes = scale_nc->value.size();
        for (std::size_t q = 0; q < planes; ++q) {
          const T* gy = self.grad.data() + q * hw;
          if (x->requires_grad) {
            T* gx = x->grad_buffer().data() + q * hw;
            const T a = scale_nc->value[q];
            for (std::size_t i = 0; i < hw; ++i) gx[i] += gy[i] * a;
          }
          if (scale_nc->requires_grad) {
            const T* xv = x->value.data() + q * hw;
            T acc = T(0);
            for (std::size_t i = 0; i < hw; ++i) acc += gy[i] * xv[i];
            scale_nc->grad_buffer()[q] += acc;
          }
          if (shift_nc->requires_grad) {
            T acc = T(0);
            for (std::size_t i = 0; i < hw; ++i) acc += gy[i];
            shift_nc->grad_buffer()[q] += acc;
          }
        }
      });
}

/// Per-sample, per-channel normalization to zero mean and unit variance.
template <typename T>
Var<T> instance_norm(const Var<T>& x, T eps = T(1e-5)) {
  const Shape s = x->value.shape();
  const std::size_t hw = s.plane();
  const std::size_t planes = static_cast<std::size_t>(s.n) * s.c;
  Tensor<T> out(s);
  std::vector<T> inv_std(planes);
  for (std::size_t q = 0; q < planes; ++q) {
    const T* xv = x->value.data() + q * hw;
    T m = T(0);
    for (std::size_t i = 0; i < hw; ++i) m += xv[i];
    m /= static_cast<T>(hw);
    T var = T(0);
    for (std::size_t i = 0; i < hw; ++i) var += (xv[i] - m) * (xv[i] - m);
    var /= static_cast<T>(hw);
    inv_std[q] = T(1) / std::sqrt(var + eps);
    for (std::size_t i = 0; i < hw; ++i) out[q * hw + i] = (xv[i] - m) * inv_std[q];
  }
  return detail::make_result<T>(std::move(out), {x}, [x, hw, inv_std](Node<T>& self) {
    if (!x->requires_grad) return;
    auto& g = x->grad_buffer();
    const T n = static_cast<T>(hw);
    for (std::size_t q = 0; q < inv_std.size(); ++q) {
      const T* gy = self.grad.data() + q * hw;
      const T* y = self.value.data() + q * hw;
      T sum_g = T(0), sum_gy = T(0);
      for (std::size_t i = 0; i < hw; ++i) {
        sum_g += gy[i];
        sum_gy += gy[i] * y[i];
      }
      for (std::size_t i = 0; i < hw; ++i) {
        g[q * hw + i] += inv_std[q] * (gy[i] - sum_g / n - y[i] * sum_gy / n);
      }
    }
  });
}

/// Concatenates along channels; batch and spatial sizes must agree.
template <typename T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b) {
  const Shape sa = a->value.shape(), sb = b->value.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    throw std::invalid_argument("concat_channels: shape mismatch " + sa.str() + " vs " + sb.str());
  }
  const Shape so{sa.n, sa.c + sb.c, sa.h, sa.w};
  Tensor<T> out(so);
  const std::size_t na = sa.sample(), nb = sb.sample();
  for (int n = 0; n < sa.n; ++n) {
    std::copy_n(a->value.data() + n * na, na, out.data() + n * (na + nb));
    std::copy_n(b->value.data() + n * nb, nb, out.data() + n * (na + nb) + na);
  }
  return detail::make_result<T>(std::move(out), {a, b}, [a, b, na, nb](Node<T>& self) {
    const int batch = self.value.shape().n;
    for (int n = 0; n < batch; ++n) {
      const T* g = self.grad.data() + n * (na + nb);
      if (a->requires_grad) {
        T* ga = a->grad_buffer().data() + n * na;
        for (std::size_t i = 0; i < na; ++i) ga[i] += g[i];
      }
      if (b->requires_grad) {
        T* gb = b->grad_buffer().data() + n * nb;
        for (std::size_t i = 0; i < nb; ++i) gb[i] += g[na + i];
      }
    }
  });
}

/// Stacks equally shaped tensors along the batch axis.
template <typename T>
Var<T> concat_batch(const std::vector<Var<T>>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_batch: empty input");
  Shape s = xs.front()->value.shape();
  int total = 0;
  for (const auto& x : xs) {
    const Shape sx = x->value.shape();
    if (sx.c != s.c || sx.h != s.h || sx.w != s.w) {
      throw std::invalid_argument("concat_batch: shape mismatch " + s.str() + " vs " + sx.str());
    }
    total += sx.n;
  }
  Tensor<T> out(Shape{total, s.c, s.h, s.w});
  std::size_t off = 0;
  for (const auto& x : xs) {
    std::copy(x->value.vec().begin(), x->value.vec().end(), out.data() + off);
    off += x->value.size();
  }
  return detail::make_result<T>(std::move(out), xs, [xs](Node<T>& self) {
    std::size_t off = 0;
    for (const auto& x : xs) {
      if (x->requires_grad) {
        auto& g = x->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[off + i];
      }
      off += x->value.size();
    }
  });
}

/// Batch slice [begin, begin+count).
template <typename T>
Var<T> slice_batch(const Var<T>& x, int begin, int count) {
  const Shape s = x->value.shape();
  if (begin < 0 || count <= 0 || begin + count > s.n) {
    throw std::out_of_range("slice_batch: range outside batch of " + std::to_string(s.n));
  }
  const std::size_t per = s.sample();
  Tensor<T> out(Shape{count, s.c, s.h, s.w});
  std::copy_n(x->value.data() + begin * per, count * per, out.data());
  return detail::make_result<T>(std::move(out), {x}, [x, begin, per](Node<T>& self) {
    if (!x->requires_grad) return;
    T* g = x->grad_buffer().data() + begin * per;
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

/// Log-softmax over the channel axis at every pixel.
template <typename T>
Var<T> log_softmax_channels(const Var<T>& x) {
  const Shape s = x->value.shape();
  const std::size_t hw = s.plane();
  Tensor<T> out(s);
  for (int n = 0; n < s.n; ++n) {
    for (std::size_t i = 0; i < hw; ++i) {
      T mx = -std::numeric_limits<T>::infinity();
      for (int c = 0; c < s.c; ++c) mx = std::max(mx, x->value[(n * s.c + c) * hw + i]);
      T acc = T(0);
      for (int c = 0; c < s.c; ++c) acc += std::exp(x->value[(n * s.c + c) * hw + i] - mx);
      const T lse = mx + std::log(acc);
      for (int c = 0; c < s.c; ++c) {
        out[(n * s.c + c) * hw + i] = x->value[(n * s.c + c) * hw + i] - lse;
      }
    }
  }
  return detail::make_result<T>(std::move(out), {x}, [x, hw](Node<T>& self) {
    if (!x->requires_grad) return;
    const Shape s = self.value.shape();
    auto& g = x->grad_buffer();
    for (int n = 0; n < s.n; ++n) {
      for (std::size_t i = 0; i < hw; ++i) {
        T gsum = T(0);
        for (int c = 0; c < s.c; ++c) gsum += self.grad[(n * s.c + c) * hw + i];
        for (int c = 0; c < s.c; ++c) {
          const std::size_t k = (n * s.c + c) * hw + i;
          g[k] += self.grad[k] - std::exp(self.value[k]) * gsum;
        }
      }
    }
  });
}

/// Pixel-mean negative log-likelihood of `labels` (one per pixel, N*H*W of them)
/// under per-pixel log-probabilities [N,C,H,W].
template <typename T>
Var<T> nll_loss(const Var<T>& log_probs, std::span<const int> labels) {
  const Shape s = log_probs->value.shape();
  const std::size_t hw = s.plane();
  if (labels.size() != static_cast<std::size_t>(s.n) * hw) {
    throw std::invalid_argument("nll_loss: " + std::to_string(labels.size()) +
                                " labels for prediction " + s.str());
  }
  std::vector<int> lab(labels.begin(), labels.end());
  T acc = T(0);
  for (int n = 0; n < s.n; ++n) {
    for (std::size_t i = 0; i < hw; ++i) {
      const int y = lab[n * hw + i];
      if (y < 0 || y >= s.c) {
        throw std::out_of_range("nll_loss: label " + std::to_string(y) + " outside [0," +
                                std::to_string(s.c) + ")");
      }
      acc -= log_probs->value[(n * s.c + y) * hw + i];
    }
  }
  const T count = static_cast<T>(lab.size());
  return detail::make_result<T>(
      Tensor<T>::scalar(acc / count), {log_probs}, [log_probs, lab, hw, count](Node<T>& self) {
        if (!log_probs->requires_grad) return;
        const Shape s = log_probs->value.shape();
        auto& g = log_probs->grad_buffer();
        const T gy = self.grad[0] / count;
        for (int n = 0; n < s.n; ++n) {
          for (std::size_t i = 0; i < hw; ++i) {
            g[(n * s.c + lab[n * hw + i]) * hw + i] -= gy;
          }
        }
      });
}

}  // namespace dha::nn
