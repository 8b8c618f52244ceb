#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "dha/io/png.hpp"
#include "dha/nn/tensor.hpp"

namespace dha::data {

inline constexpr int kMinSide = 16;

/// RGB image with values in [0,1], stored channel-planar (R plane, G plane, B plane).
class Image {
 public:
  Image() = default;
  Image(int height, int width, float fill = 0.0f)
      : height_(height), width_(width), pixels_(static_cast<std::size_t>(3) * height * width, fill) {
    check_dims(height, width);
  }
  Image(int height, int width, std::vector<float> planar)
      : height_(height), width_(width), pixels_(std::move(planar)) {
    check_dims(height, width);
    if (pixels_.size() != static_cast<std::size_t>(3) * height * width) {
      throw std::invalid_argument("Image: pixel buffer size mismatch");
    }
    for (float v : pixels_) {
      if (!(v >= 0.0f && v <= 1.0f)) throw std::invalid_argument("Image: value outside [0,1]");
    }
  }

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t plane() const { return static_cast<std::size_t>(height_) * width_; }

  float& at(int y, int x, int c) { return pixels_[c * plane() + static_cast<std::size_t>(y) * width_ + x]; }
  float at(int y, int x, int c) const {
    return pixels_[c * plane() + static_cast<std::size_t>(y) * width_ + x];
  }

  const std::vector<float>& pixels() const { return pixels_; }
  std::vector<float>& pixels() { return pixels_; }

  float channel_mean(int c) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < plane(); ++i) acc += pixels_[c * plane() + i];
    return static_cast<float>(acc / plane());
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  static void check_dims(int h, int w) {
    if (h < kMinSide || w < kMinSide) {
      throw std::invalid_argument("Image: canvas " + std::to_string(h) + "x" + std::to_string(w) +
                                  " below minimum " + std::to_string(kMinSide));
    }
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<float> pixels_;
};

/// Per-pixel class indices in [0, num_classes).
class SegMask {
 public:
  SegMask() = default;
  SegMask(int height, int width, int num_classes, int fill = 0)
      : height_(height), width_(width), num_classes_(num_classes),
        labels_(static_cast<std::size_t>(height) * width, fill) {
    if (num_classes <= 0) throw std::invalid_argument("SegMask: num_classes must be positive");
    if (fill < 0 || fill >= num_classes) throw std::invalid_argument("SegMask: fill out of range");
  }
  SegMask(int height, int width, int num_classes, std::vector<int> labels)
      : height_(height), width_(width), num_classes_(num_classes), labels_(std::move(labels)) {
    if (labels_.size() != static_cast<std::size_t>(height) * width) {
      throw std::invalid_argument("SegMask: label buffer size mismatch");
    }
    for (int v : labels_) {
      if (v < 0 || v >= num_classes) {
        throw std::invalid_argument("SegMask: label " + std::to_string(v) + " outside [0," +
                                    std::to_string(num_classes) + ")");
      }
    }
  }

  int height() const { return height_; }
  int width() const { return width_; }
  int num_classes() const { return num_classes_; }
  int& at(int y, int x) { return labels_[static_cast<std::size_t>(y) * width_ + x]; }
  int at(int y, int x) const { return labels_[static_cast<std::size_t>(y) * width_ + x]; }
  const std::vector<int>& labels() const { return labels_; }

  std::vector<long> histogram() const {
    std::vector<long> h(num_classes_, 0);
    for (int v : labels_) ++h[v];
    return h;
  }

  friend bool operator==(const SegMask&, const SegMask&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int num_classes_ = 0;
  std::vector<int> labels_;
};

inline std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

inline void save_image(const Image& img, const std::filesystem::path& path) {
  io::RawImage raw{img.width(), img.height(), 3, {}};
  raw.bytes.resize(static_cast<std::size_t>(3) * img.plane());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        raw.bytes[(static_cast<std::size_t>(y) * img.width() + x) * 3 + c] = to_byte(img.at(y, x, c));
      }
    }
  }
  io::write_png(path, raw);
}

inline Image load_image(const std::filesystem::path& path) {
  const auto raw = io::read_png(path, 3);
  Image img(raw.height, raw.width);
  for (int y = 0; y < raw.height; ++y) {
    for (int x = 0; x < raw.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        img.at(y, x, c) = raw.bytes[(static_cast<std::size_t>(y) * raw.width + x) * 3 + c] / 255.0f;
      }
    }
  }
  return img;
}

inline void save_mask(const SegMask& mask, const std::filesystem::path& path) {
  io::RawImage raw{mask.width(), mask.height(), 1, {}};
  raw.bytes.reserve(mask.labels().size());
  for (int v : mask.labels()) raw.bytes.push_back(static_cast<std::uint8_t>(v));
  io::write_png(path, raw);
}

inline SegMask load_mask(const std::filesystem::path& path, int num_classes) {
  const auto raw = io::read_png(path, 1);
  std::vector<int> labels(raw.bytes.begin(), raw.bytes.end());
  return SegMask(raw.height, raw.width, num_classes, std::move(labels));
}

/// Quantises to 8 bits per channel, matching what a save/load round trip yields.
inline Image quantize(const Image& img) {
  Image out = img;
  for (float& v : out.pixels()) v = to_byte(v) / 255.0f;
  return out;
}

/// Stacks images into an [N,3,H,W] tensor.
template <typename T>
nn::Tensor<T> to_tensor(const std::vector<const Image*>& images) {
  if (images.empty()) throw std::invalid_argument("to_tensor: no images");
  const int h = images.front()->height(), w = images.front()->width();
  nn::Tensor<T> t(nn::Shape{static_cast<int>(images.size()), 3, h, w});
  std::size_t off = 0;
  for (const Image* img : images) {
    if (img->height() != h || img->width() != w) {
      throw std::invalid_argument("to_tensor: images differ in size");
    }
    for (float v : img->pixels()) t[off++] = static_cast<T>(v);
  }
  return t;
}

template <typename T>
nn::Tensor<T> to_tensor(const Image& img) {
  return to_tensor<T>(std::vector<const Image*>{&img});
}

/// Extracts batch element `n` of an [N,3,H,W] tensor, clamping into [0,1].
template <typename T>
Image from_tensor(const nn::Tensor<T>& t, int n = 0) {
  const auto s = t.shape();
  if (s.c != 3) throw std::invalid_argument("from_tensor: expected 3 channels, got " + s.str());
  std::vector<float> px(s.sample());
  for (std::size_t i = 0; i < px.size(); ++i) {
    px[i] = std::clamp(static_cast<float>(t[n * s.sample() + i]), 0.0f, 1.0f);
  }
  return Image(s.h, s.w, std::move(px));
}

}  // namespace dha::data
