#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "dha/nn/module.hpp"

namespace dha::nn {

/// Shared shape of every discriminator here: three stride-2 3x3 convs with
/// leaky ReLU between them; the 1-channel patch logits are averaged into one
/// logit per sample ([N,1,1,1]). The probability is sigmoid(logit).
template <typename T>
class PatchDiscriminator {
 public:
  PatchDiscriminator() = default;
  PatchDiscriminator(int in_channels, std::uint64_t seed, int width = 32) {
    std::mt19937_64 rng(seed);
    c1_ = Conv2d<T>(params_, "d1", in_channels, width, 3, 2, 1, rng);
    c2_ = Conv2d<T>(params_, "d2", width, 2 * width, 3, 2, 1, rng);
    c3_ = Conv2d<T>(params_, "d3", 2 * width, 1, 3, 2, 1, rng, 1.0);
  }

  Var<T> logits(const Var<T>& x) const {
    const T slope = T(0.2);
    auto h = leaky_relu(c1_(x), slope);
    h = leaky_relu(c2_(h), slope);
    return spatial_mean(c3_(h));
  }

  int in_channels() const { return c1_.weight->value.shape().c; }
  ParamSet<T>& params() { return params_; }
  const ParamSet<T>& params() const { return params_; }

 private:
  ParamSet<T> params_;
  Conv2d<T> c1_, c2_, c3_;
};

/// D_I: real target vs translated source, on RGB images.
template <typename T>
class ImageDiscriminator : public PatchDiscriminator<T> {
 public:
  ImageDiscriminator() = default;
  explicit ImageDiscriminator(std::uint64_t seed) : PatchDiscriminator<T>(3, seed) {}
};

/// D_Sty: ordered image pair, channel-concatenated (first, second).
template <typename T>
class StyleDiscriminator : public PatchDiscriminator<T> {
 public:
  StyleDiscriminator() = default;
  explicit StyleDiscriminator(std::uint64_t seed) : PatchDiscriminator<T>(6, seed) {}

  Var<T> pair_logits(const Var<T>& first, const Var<T>& second) const {
    return this->logits(concat_channels(first, second));
  }
};

/// D_O: over per-pixel class probability maps.
template <typename T>
class OutputDiscriminator : public PatchDiscriminator<T> {
 public:
  OutputDiscriminator() = default;
  OutputDiscriminator(int num_classes, std::uint64_t seed) : PatchDiscriminator<T>(num_classes, seed) {}
};

/// Segmentation network: four 3x3 convs (two of them stride 2), a 1x1 class
/// head, bilinear resize back to the input resolution.
template <typename T>
class SegNetwork {
 public:
  SegNetwork() = default;
  SegNetwork(int num_classes, std::uint64_t seed) : num_classes_(num_classes) {
    std::mt19937_64 rng(seed);
    c1_ = Conv2d<T>(params_, "conv1", 3, 32, 3, 1, 1, rng);
    c2_ = Conv2d<T>(params_, "conv2", 32, 64, 3, 2, 1, rng);
    c3_ = Conv2d<T>(params_, "conv3", 64, 64, 3, 2, 1, rng);
    c4_ = Conv2d<T>(params_, "conv4", 64, 64, 3, 1, 1, rng);
    head_ = Conv2d<T>(params_, "head", 64, num_classes, 1, 1, 0, rng, 1.0);
  }

  /// Penultimate activations (input to the class head), [N,64,H/4,W/4].
  Var<T> features(const Var<T>& x) const {
    auto h = relu(c1_(x));
    h = relu(c2_(h));
    h = relu(c3_(h));
    return relu(c4_(h));
  }

  /// Per-pixel class logits at input resolution. The 1x1 head and the bilinear
  /// resize commute, so the head runs at low resolution.
  Var<T> logits(const Var<T>& x) const {
    const auto s = x->value.shape();
    return upsample_bilinear(head_(features(x)), s.h, s.w);
  }

  Var<T> log_probs(const Var<T>& x) const { return log_softmax_channels(logits(x)); }
  Var<T> probs(const Var<T>& x) const { return exp(log_probs(x)); }

  int num_classes() const { return num_classes_; }
  ParamSet<T>& params() { return params_; }
  const ParamSet<T>& params() const { return params_; }

 private:
  int num_classes_ = 0;
  ParamSet<T> params_;
  Conv2d<T> c1_, c2_, c3_, c4_, head_;
};

/// Exemplar-conditioned translator. A content encoder takes the source image to
/// quarter resolution; the decoder (two residual blocks, two upsampling stages)
/// has its instance-normalised activations modulated per channel by affine
/// parameters predicted from the exemplar's style code. The style code also sets
/// a per-image 3x3 colour matrix and offset applied to the source, and the decoder
/// adds its output to that in logit space.
template <typename T>
class Generator {
 public:
  static constexpr int kWidth = 64;

  Generator() = default;
  Generator(int style_dim, std::uint64_t seed) : style_dim_(style_dim) {
    std::mt19937_64 rng(seed);
    e1_ = Conv2d<T>(params_, "enc1", 3, 32, 3, 1, 1, rng);
    e2_ = Conv2d<T>(params_, "enc2", 32, kWidth, 3, 2, 1, rng);
    e3_ = Conv2d<T>(params_, "enc3", kWidth, kWidth, 3, 2, 1, rng);
    for (int r = 0; r < 2; ++r) {
      res_a_[r] = Conv2d<T>(params_, "res" + std::to_string(r) + ".a", kWidth, kWidth, 3, 1, 1, rng);
      res_b_[r] = Conv2d<T>(params_, "res" + std::to_string(r) + ".b", kWidth, kWidth, 3, 1, 1, rng);
    }
    up1_ = Conv2d<T>(params_, "up1", kWidth, 32, 3, 1, 1, rng);
    up2_ = Conv2d<T>(params_, "up2", 32 + 32, 16, 3, 1, 1, rng);
    out_ = Conv2d<T>(params_, "out", 16, 3, 3, 1, 1, rng, 0.1);
    mlp1_ = Conv2d<T>(params_, "style.fc1", style_dim, 128, 1, 1, 0, rng);
    mlp2_ = Conv2d<T>(params_, "style.fc2", 128, 2 * modulated_channels(), 1, 1, 0, rng, 0.1);
    color_ = Conv2d<T>(params_, "style.color", 128, 12, 1, 1, 0, rng, 0.1);
    code_mean_ = buffers_.add("style.code_mean", Tensor<T>(Shape{1, style_dim, 1, 1}, T(0)));
    code_scale_ = buffers_.add("style.code_scale", Tensor<T>(Shape{1, style_dim, 1, 1}, T(1)));
    buffers_.set_trainable(false);
  }

  static constexpr int modulated_channels() { return 4 * kWidth + 32 + 16; }

  /// Sets the per-dimension standardisation applied to incoming style codes.
  void set_code_normalization(const std::vector<double>& mean, const std::vector<double>& stddev) {
    if (mean.size() != static_cast<std::size_t>(style_dim_) || stddev.size() != mean.size()) {
      throw std::invalid_argument("Generator: normalisation width mismatch");
    }
    for (int i = 0; i < style_dim_; ++i) {
      code_mean_->value[i] = static_cast<T>(mean[i]);
      code_scale_->value[i] = static_cast<T>(1.0 / std::max(stddev[i], 1e-6));
    }
  }

  /// source: [N,3,H,W] in [0,1]; codes: [N,style_dim,1,1]. Output [N,3,H,W] in (0,1).
  Var<T> translate(const Var<T>& source, const Var<T>& codes) const {
    const auto ss = source->value.shape();
    const auto cs = codes->value.shape();
    if (ss.c != 3 || ss.h % 4 != 0 || ss.w % 4 != 0) {
      throw std::invalid_argument("Generator: source must be [N,3,H,W] with H,W divisible by 4, got " +
                                  ss.str());
    }
    if (cs.n != ss.n || cs.c != style_dim_ || cs.h != 1 || cs.w != 1) {
      throw std::invalid_argument("Generator: style codes " + cs.str() + " do not match source " + ss.str());
    }
    auto z = relu(mlp1_(normalize_codes(codes)));
    auto mod = mlp2_(z);  // [N, 2*M, 1, 1]
    auto base = color_transform(source, add(color_(z), identity_color(ss.n)));

    int offset = 0;
    auto modulate = [&](const Var<T>& h) {
      const int c = h->value.shape().c;
      auto gamma = add_scalar(take_channels(mod, offset, c), T(1));
      auto beta = take_channels(mod, offset + modulated_channels(), c);
      offset += c;
      return channel_affine(instance_norm(h), gamma, beta);
    };

    auto skip = relu(e1_(source));
    auto h = relu(e2_(skip));
    h = relu(e3_(h));
    for (int r = 0; r < 2; ++r) {
      auto y = relu(modulate(res_a_[r](h)));
      y = modulate(res_b_[r](y));
      h = add(h, y);
    }
    h = relu(modulate(up1_(upsample_nearest(h, 2))));
    h = relu(modulate(up2_(concat_channels(upsample_nearest(h, 2), skip))));
    // The decoder output is a correction on top of a global colour transform of the source.
    return sigmoid(add(out_(h), logit(clamp(base, T(0.01), T(0.99)))));
  }

  int style_dim() const { return style_dim_; }
  ParamSet<T>& params() { return params_; }
  const ParamSet<T>& params() const { return params_; }
  ParamSet<T>& buffers() { return buffers_; }
  const ParamSet<T>& buffers() const { return buffers_; }

 private:
  Var<T> normalize_codes(const Var<T>& codes) const {
    const auto s = codes->value.shape();
    Tensor<T> shift(s), scl(s);
    for (int n = 0; n < s.n; ++n) {
      for (int c = 0; c < s.c; ++c) {
        shift[n * s.c + c] = -code_mean_->value[c] * code_scale_->value[c];
        scl[n * s.c + c] = code_scale_->value[c];
      }
    }
    // Viewed as [N,C,1,1] planes, channel_affine is exactly a per-element affine map.
    return channel_affine(codes, constant(std::move(scl)), constant(std::move(shift)));
  }

  static Var<T> identity_color(int n) {
    Tensor<T> t(Shape{n, 12, 1, 1}, T(0));
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < 3; ++c) t[i * 12 + 4 * c] = T(1);
    }
    return constant(std::move(t));
  }

  static Var<T> take_channels(const Var<T>& x, int begin, int count) {
    const auto s = x->value.shape();
    Tensor<T> out(Shape{s.n, count, 1, 1});
    for (int n = 0; n < s.n; ++n) {
      for (int c = 0; c < count; ++c) out[n * count + c] = x->value[n * s.c + begin + c];
    }
    return detail::make_result<T>(std::move(out), {x}, [x, begin, count](Node<T>& self) {
      if (!x->requires_grad) return;
      const auto s = x->value.shape();
      auto& g = x->grad_buffer();
      for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < count; ++c) g[n * s.c + begin + c] += self.grad[n * count + c];
      }
    });
  }

  int style_dim_ = 0;
  ParamSet<T> params_;
  ParamSet<T> buffers_;
  Var<T> code_mean_, code_scale_;
  Conv2d<T> e1_, e2_, e3_;
  Conv2d<T> res_a_[2], res_b_[2];
  Conv2d<T> up1_, up2_, out_;
  Conv2d<T> mlp1_, mlp2_, color_;
};

}  // namespace dha::nn
