#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <stdexcept>
#include <vector>

#include "dha/data/image.hpp"
#include "dha/nn/module.hpp"

namespace dha::discovery {

/// Per-channel spatial mean followed by per-channel population standard deviation.
struct StyleCode {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  friend bool operator==(const StyleCode&, const StyleCode&) = default;
};

inline double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("distance between vectors of unequal length");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return d;
}

inline double distance(const StyleCode& a, const StyleCode& b) {
  return std::sqrt(squared_distance(a.values, b.values));
}

/// Statistics of batch element `n` of a feature map [N,C,H,W].
template <typename T>
StyleCode feature_statistics(const nn::Tensor<T>& fmap, int n = 0) {
  const auto s = fmap.shape();
  const std::size_t hw = s.plane();
  StyleCode code;
  code.values.resize(2 * static_cast<std::size_t>(s.c));
  for (int c = 0; c < s.c; ++c) {
    const T* p = fmap.data() + (static_cast<std::size_t>(n) * s.c + c) * hw;
    double m = 0.0;
    for (std::size_t i = 0; i < hw; ++i) m += p[i];
    m /= static_cast<double>(hw);
    double var = 0.0;
    for (std::size_t i = 0; i < hw; ++i) var += (p[i] - m) * (p[i] - m);
    code.values[c] = m;
    code.values[s.c + c] = std::sqrt(var / static_cast<double>(hw));
  }
  return code;
}

/// Frozen feature extractor whose activation statistics define image style.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual nn::Tensor<float> features(const data::Image& image) const = 0;
  virtual int channels() const = 0;
};

/// Two 3x3 conv + ReLU layers (3 -> 16 -> 32) with seeded random weights that never change.
class StyleEncoder final : public FeatureExtractor {
 public:
  static constexpr int kHidden = 16;
  static constexpr int kChannels = 32;

  explicit StyleEncoder(std::uint64_t seed = 7) {
    std::mt19937_64 rng(seed);
    conv1_ = nn::Conv2d<float>(params_, "conv1", 3, kHidden, 3, 1, 1, rng);
    conv2_ = nn::Conv2d<float>(params_, "conv2", kHidden, kChannels, 3, 1, 1, rng);
    params_.set_trainable(false);
  }

  nn::Tensor<float> features(const data::Image& image) const override {
    return features(data::to_tensor<float>(image));
  }
  int channels() const override { return kChannels; }

  /// Batched feature maps for an [N,3,H,W] tensor.
  nn::Tensor<float> features(const nn::Tensor<float>& batch) const {
    auto x = nn::constant(batch);
    return nn::relu(conv2_(nn::relu(conv1_(x))))->value;
  }

  const nn::ParamSet<float>& params() const { return params_; }

 private:
  nn::ParamSet<float> params_;
  nn::Conv2d<float> conv1_;
  nn::Conv2d<float> conv2_;
};

/// Bilinear resize so the shorter side equals `target`; returns the input unchanged
/// when it already matches.
inline data::Image resize_shorter_side(const data::Image& img, int target) {
  const int shorter = std::min(img.height(), img.width());
  if (shorter == target) return img;
  const double s = static_cast<double>(target) / shorter;
  const int h = static_cast<int>(std::lround(img.height() * s));
  const int w = static_cast<int>(std::lround(img.width() * s));
  auto x = nn::constant(data::to_tensor<float>(img));
  return data::from_tensor(nn::upsample_bilinear(x, h, w)->value);
}

inline StyleCode extract_style_code(const data::Image& image, const FeatureExtractor& encoder,
                                    int native_side = 64) {
  return feature_statistics(encoder.features(resize_shorter_side(image, native_side)));
}

/// Codes for many same-sized images, encoded in batches.
inline std::vector<StyleCode> extract_style_codes(const std::vector<const data::Image*>& images,
                                                  const StyleEncoder& encoder, int batch = 16) {
  std::vector<StyleCode> codes;
  codes.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); i += batch) {
    const std::size_t end = std::min(images.size(), i + batch);
    std::vector<const data::Image*> chunk(images.begin() + i, images.begin() + end);
    const auto fmap = encoder.features(data::to_tensor<float>(chunk));
    for (std::size_t k = 0; k < chunk.size(); ++k) codes.push_back(feature_statistics(fmap, static_cast<int>(k)));
  }
  return codes;
}

}  // namespace dha::discovery
