#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "dha/nn/autograd.hpp"

namespace dha::nn {

struct ConvGeometry {
  int stride = 1;
  int pad = 0;
};

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

template <typename T>
void im2col(const T* img, int channels, int h, int w, int k, ConvGeometry g, int ho, int wo,
            T* col) {
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = col + ((c * k + ky) * k + kx) * static_cast<std::size_t>(ho) * wo;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          T* dst = row + static_cast<std::size_t>(oy) * wo;
          if (iy < 0 || iy >= h) {
            std::fill_n(dst, wo, T(0));
            continue;
          }
          const T* src = img + (static_cast<std::size_t>(c) * h + iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            dst[ox] = (ix >= 0 && ix < w) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, int channels, int h, int w, int k, ConvGeometry g, int ho, int wo,
            T* img) {
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = col + ((c * k + ky) * k + kx) * static_cast<std::size_t>(ho) * wo;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= h) continue;
          const T* src = row + static_cast<std::size_t>(oy) * wo;
          T* dst = img + (static_cast<std::size_t>(c) * h + iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace detail

/// 2-D cross-correlation. x: [N,Ci,H,W], weight: [Co,Ci,k,k], bias: [1,Co,1,1].
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, ConvGeometry g) {
  const Shape sx = x->value.shape();
  const Shape sw = weight->value.shape();
  if (sw.c != sx.c || sw.h != sw.w) {
    throw std::invalid_argument("conv2d: weight " + sw.str() + " incompatible with input " +
                                sx.str());
  }
  if (bias->value.size() != static_cast<std::size_t>(sw.n)) {
    throw std::invalid_argument("conv2d: bias size mismatch");
  }
  const int k = sw.h;
  const int ho = (sx.h + 2 * g.pad - k) / g.stride + 1;
  const int wo = (sx.w + 2 * g.pad - k) / g.stride + 1;
  if (ho <= 0 || wo <= 0) throw std::invalid_argument("conv2d: input too small " + sx.str());
  const int kdim = sx.c * k * k;
  const int odim = ho * wo;
  const bool direct = (k == 1 && g.stride == 1 && g.pad == 0);

  Tensor<T> out(Shape{sx.n, sw.n, ho, wo});
  Buffer<T> col(direct ? 0 : static_cast<std::size_t>(kdim) * odim);
  detail::ConstMapMat<T> wm(weight->value.data(), sw.n, kdim);
  for (int n = 0; n < sx.n; ++n) {
    const T* xn = x->value.data() + n * sx.sample();
    if (!direct) detail::im2col(xn, sx.c, sx.h, sx.w, k, g, ho, wo, col.data());
    detail::ConstMapMat<T> cm(direct ? xn : col.data(), kdim, odim);
    detail::MapMat<T> om(out.data() + static_cast<std::size_t>(n) * sw.n * odim, sw.n, odim);
    om.noalias() = wm * cm;
    for (int co = 0; co < sw.n; ++co) om.row(co).array() += bias->value[co];
  }

  return detail::make_result<T>(
      std::move(out), {x, weight, bias}, [x, weight, bias, g, k, ho, wo, kdim, odim, direct](Node<T>& self) {
        const Shape sx = x->value.shape();
        const int co_n = weight->value.shape().n;
        Buffer<T> col(direct ? 0 : static_cast<std::size_t>(kdim) * odim);
        Buffer<T> gcol(static_cast<std::size_t>(kdim) * odim);
        detail::ConstMapMat<T> wm(weight->value.data(), co_n, kdim);
        for (int n = 0; n < sx.n; ++n) {
          detail::ConstMapMat<T> gy(self.grad.data() + static_cast<std::size_t>(n) * co_n * odim,
                                    co_n, odim);
          const T* xn = x->value.data() + n * sx.sample();
          if (weight->requires_grad) {
            if (!direct) detail::im2col(xn, sx.c, sx.h, sx.w, k, g, ho, wo, col.data());
            detail::ConstMapMat<T> cm(direct ? xn : col.data(), kdim, odim);
            detail::MapMat<T> gw(weight->grad_buffer().data(), co_n, kdim);
            gw.noalias() += gy * cm.transpose();
          }
          if (bias->requires_grad) {
            auto& gb = bias->grad_buffer();
            for (int co = 0; co < co_n; ++co) gb[co] += gy.row(co).sum();
          }
          if (x->requires_grad) {
            T* gx = x->grad_buffer().data() + n * sx.sample();
            if (direct) {
              detail::MapMat<T> gxm(gx, kdim, odim);
              gxm.noalias() += wm.transpose() * gy;
            } else {
              detail::MapMat<T> gc(gcol.data(), kdim, odim);
              gc.noalias() = wm.transpose() * gy;
              detail::col2im(gcol.data(), sx.c, sx.h, sx.w, k, g, ho, wo, gx);
            }
          }
        }
      });
}

/// Nearest-neighbour upsampling by an integer factor.
template <typename T>
Var<T> upsample_nearest(const Var<T>& x, int factor) {
  const Shape s = x->value.shape();
  const Shape so{s.n, s.c, s.h * factor, s.w * factor};
  Tensor<T> out(so);
  const std::size_t planes = static_cast<std::size_t>(s.n) * s.c;
  for (std::size_t q = 0; q < planes; ++q) {
    for (int oy = 0; oy < so.h; ++oy) {
      for (int ox = 0; ox < so.w; ++ox) {
        out[(q * so.h + oy) * so.w + ox] = x->value[(q * s.h + oy / factor) * s.w + ox / factor];
      }
    }
  }
  return detail::make_result<T>(std::move(out), {x}, [x, factor](Node<T>& self) {
    if (!x->requires_grad) return;
    const Shape s = x->value.shape();
    const Shape so = self.value.shape();
    auto& g = x->grad_buffer();
    const std::size_t planes = static_cast<std::size_t>(s.n) * s.c;
    for (std::size_t q = 0; q < planes; ++q) {
      for (int oy = 0; oy < so.h; ++oy) {
        for (int ox = 0; ox < so.w; ++ox) {
          g[(q * s.h + oy / factor) * s.w + ox / factor] += self.grad[(q * so.h + oy) * so.w + ox];
        }
      }
    }
  });
}

namespace detail {

struct LerpTap {
  int lo = 0;
  int hi = 0;
  double frac = 0.0;
};

// Half-pixel-centre sampling (align_corners = false).
inline std::vector<LerpTap> bilinear_taps(int in, int out) {
  std::vector<LerpTap> taps(out);
  const double ratio = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * ratio - 0.5;
    if (src < 0) src = 0;
    const int lo = std::min(static_cast<int>(std::floor(src)), in - 1);
    taps[o] = {lo, std::min(lo + 1, in - 1), src - lo};
  }
  return taps;
}

}  // namespace detail

/// Bilinear resize of every channel to (out_h, out_w).
template <typename T>
Var<T> upsample_bilinear(const Var<T>& x, int out_h, int out_w) {
  const Shape s = x->value.shape();
  const auto ty = detail::bilinear_taps(s.h, out_h);
  const auto tx = detail::bilinear_taps(s.w, out_w);
  Tensor<T> out(Shape{s.n, s.c, out_h, out_w});
  const std::size_t planes = static_cast<std::size_t>(s.n) * s.c;
  for (std::size_t q = 0; q < planes; ++q) {
    const T* in = x->value.data() + q * s.plane();
    T* o = out.data() + q * static_cast<std::size_t>(out_h) * out_w;
    for (int oy = 0; oy < out_h; ++oy) {
      const T fy = static_cast<T>(ty[oy].frac);
      const T* r0 = in + static_cast<std::size_t>(ty[oy].lo) * s.w;
      const T* r1 = in + static_cast<std::size_t>(ty[oy].hi) * s.w;
      for (int ox = 0; ox < out_w; ++ox) {
        const T fx = static_cast<T>(tx[ox].frac);
        const T top = r0[tx[ox].lo] * (T(1) - fx) + r0[tx[ox].hi] * fx;
        const T bot = r1[tx[ox].lo] * (T(1) - fx) + r1[tx[ox].hi] * fx;
        o[oy * out_w + ox] = top * (T(1) - fy) + bot * fy;
      }
    }
  }
  return detail::make_result<T>(std::move(out), {x}, [x, ty, tx](Node<T>& self) {
    if (!x->requires_grad) return;
    const Shape s = x->value.shape();
    const Shape so = self.value.shape();
    auto& gbuf = x->grad_buffer();
    const std::size_t planes = static_cast<std::size_t>(s.n) * s.c;
    for (std::size_t q = 0; q < planes; ++q) {
      T* g = gbuf.data() + q * s.plane();
      const T* gy = self.grad.data() + q * so.plane();
      for (int oy = 0; oy < so.h; ++oy) {
        const T fy = static_cast<T>(ty[oy].frac);
        T* r0 = g + static_cast<std::size_t>(ty[oy].lo) * s.w;
        T* r1 = g + static_cast<std::size_t>(ty[oy].hi) * s.w;
        for (int ox = 0; ox < so.w; ++ox) {
          const T fx = static_cast<T>(tx[ox].frac);
          const T v = gy[oy * so.w + ox];
          r0[tx[ox].lo] += v * (T(1) - fy) * (T(1) - fx);
          r0[tx[ox].hi] += v * (T(1) - fy) * fx;
          r1[tx[ox].lo] += v * fy * (T(1) - fx);
          r1[tx[ox].hi] += v * fy * fx;
        }
      }
    }
  });
}

}  // namespace dha::nn
