#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "dha/data/image.hpp"

namespace dha::data {

/// Photometric appearance transform. Never moves pixels.
struct StyleParams {
  double hue_shift = 0.0;   // radians, rotation of chroma in YIQ space
  double saturation = 1.0;  // chroma scale, 0 = grayscale
  double brightness = 1.0;  // multiplicative
  double contrast = 1.0;    // scale about mid-gray
  std::array<double, 3> color_cast{0.0, 0.0, 0.0};
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(brightness > 0.0) || !(contrast > 0.0) || !(saturation >= 0.0) || !(noise_sigma >= 0.0) ||
        !std::isfinite(hue_shift)) {
      throw std::invalid_argument("StyleParams: brightness/contrast must be > 0, "
                                  "saturation/noise_sigma >= 0, hue finite");
    }
  }
};

inline float luminance(float r, float g, float b) { return 0.299f * r + 0.587f * g + 0.114f * b; }

/// Applies hue rotation, saturation, contrast, brightness, cast and noise in that
/// order, then clips to [0,1]. Identity stages are skipped so identity params are exact.
inline Image apply_style(const Image& image, const StyleParams& p) {
  p.validate();
  Image out = image;
  const std::size_t n = image.plane();
  float* r = out.pixels().data();
  float* g = r + n;
  float* b = g + n;

  if (p.hue_shift != 0.0 || p.saturation != 1.0) {
    const double cs = std::cos(p.hue_shift) * p.saturation;
    const double sn = std::sin(p.hue_shift) * p.saturation;
    for (std::size_t i = 0; i < n; ++i) {
      const double y = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
      const double ci = 0.596 * r[i] - 0.274 * g[i] - 0.322 * b[i];
      const double cq = 0.211 * r[i] - 0.523 * g[i] + 0.312 * b[i];
      const double i2 = cs * ci - sn * cq;
      const double q2 = sn * ci + cs * cq;
      r[i] = static_cast<float>(y + 0.956 * i2 + 0.621 * q2);
      g[i] = static_cast<float>(y - 0.272 * i2 - 0.647 * q2);
      b[i] = static_cast<float>(y - 1.106 * i2 + 1.703 * q2);
    }
  }
  auto& px = out.pixels();
  if (p.contrast != 1.0) {
    for (float& v : px) v = static_cast<float>((v - 0.5) * p.contrast + 0.5);
  }
  if (p.brightness != 1.0) {
    for (float& v : px) v = static_cast<float>(v * p.brightness);
  }
  for (int c = 0; c < 3; ++c) {
    if (p.color_cast[c] == 0.0) continue;
    for (std::size_t i = 0; i < n; ++i) px[c * n + i] = static_cast<float>(px[c * n + i] + p.color_cast[c]);
  }
  if (p.noise_sigma > 0.0) {
    std::mt19937_64 rng(p.seed);
    std::normal_distribution<double> d(0.0, p.noise_sigma);
    for (float& v : px) v = static_cast<float>(v + d(rng));
  }
  for (float& v : px) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

/// Named appearance family plus per-image jitter amplitude.
struct StyleFamily {
  std::string name;
  StyleParams base;
  double jitter = 0.06;
};

/// Draws one member of a family: base parameters with mild multiplicative jitter.
inline StyleParams sample_style(const StyleFamily& fam, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-fam.jitter, fam.jitter);
  StyleParams p = fam.base;
  p.brightness *= 1.0 + u(rng);
  p.contrast *= 1.0 + u(rng);
  p.saturation = std::max(0.0, p.saturation * (1.0 + u(rng)));
  p.hue_shift += u(rng) * 0.5;
  for (double& c : p.color_cast) c += u(rng) * 0.25;
  p.noise_sigma *= 1.0 + u(rng);
  p.seed = rng();
  return p;
}

inline StyleFamily night_style() {
  return {"night", {0.0, 0.75, 0.38, 0.80, {0.0, 0.03, 0.14}, 0.015, 0}, 0.06};
}
inline StyleFamily rain_style() {
  return {"rain", {0.0, 0.25, 0.85, 0.60, {0.0, 0.02, 0.05}, 0.08, 0}, 0.06};
}
inline StyleFamily cloudy_style() {
  return {"cloudy", {0.0, 0.55, 1.0, 0.50, {0.14, 0.14, 0.14}, 0.0, 0}, 0.06};
}
inline StyleFamily sunset_style() {
  return {"sunset", {0.15, 1.05, 0.65, 0.85, {0.15, 0.04, -0.08}, 0.01, 0}, 0.06};
}

inline std::vector<StyleFamily> builtin_styles() {
  return {night_style(), rain_style(), cloudy_style(), sunset_style()};
}

inline StyleFamily style_family(const std::string& name) {
  for (auto& f : builtin_styles()) {
    if (f.name == name) return f;
  }
  throw std::invalid_argument("unknown style family '" + name + "' (expected night, rain, cloudy or sunset)");
}

}  // namespace dha::data
