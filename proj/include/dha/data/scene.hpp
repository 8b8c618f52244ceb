#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

#include "dha/data/image.hpp"

namespace dha::data {

enum SceneClass : int { kSky = 0, kGround = 1, kBuilding = 2, kVegetation = 3, kVehicle = 4 };
inline constexpr int kNumClasses = 5;
inline constexpr std::array<const char*, kNumClasses> kClassNames = {"sky", "ground", "building",
                                                                     "vegetation", "vehicle"};

struct SceneConfig {
  int height = 64;
  int width = 64;
  int num_classes = kNumClasses;
};

namespace detail {

using Rgb = std::array<float, 3>;

inline Rgb jitter(const Rgb& base, float amount, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> d(-amount, amount);
  Rgb out;
  for (int c = 0; c < 3; ++c) out[c] = std::clamp(base[c] + d(rng), 0.0f, 1.0f);
  return out;
}

struct Canvas {
  Image& image;
  SegMask& mask;

  void paint(int y, int x, int cls, const Rgb& color) {
    mask.at(y, x) = cls;
    for (int c = 0; c < 3; ++c) image.at(y, x, c) = color[c];
  }
};

}  // namespace detail

/// Procedural street scene: sky above a horizon, ground below, then buildings,
/// vegetation and vehicles painted back to front. Pure function of `seed`.
inline std::pair<Image, SegMask> generate_scene(std::uint64_t seed, const SceneConfig& cfg = {}) {
  if (cfg.height < kMinSide || cfg.width < kMinSide) {
    throw std::invalid_argument("generate_scene: canvas " + std::to_string(cfg.height) + "x" +
                                std::to_string(cfg.width) + " below " + std::to_string(kMinSide) +
                                "x" + std::to_string(kMinSide));
  }
  if (cfg.num_classes != kNumClasses) {
    throw std::invalid_argument("generate_scene: default layout needs exactly 5 classes, got " +
                                std::to_string(cfg.num_classes));
  }
  const int H = cfg.height, W = cfg.width;
  std::mt19937_64 rng(seed);
  auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

  Image image(H, W);
  SegMask mask(H, W, kNumClasses);
  detail::Canvas canvas{image, mask};

  const int horizon = static_cast<int>(std::lround(H * uni(0.38, 0.58)));
  const detail::Rgb sky_top = detail::jitter({0.35f, 0.58f, 0.92f}, 0.06f, rng);
  const detail::Rgb sky_bottom = detail::jitter({0.72f, 0.84f, 0.97f}, 0.05f, rng);
  const detail::Rgb ground = detail::jitter({0.42f, 0.40f, 0.38f}, 0.06f, rng);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      if (y < horizon) {
        const float t = static_cast<float>(y) / std::max(1, horizon - 1);
        detail::Rgb c;
        for (int k = 0; k < 3; ++k) c[k] = sky_top[k] * (1 - t) + sky_bottom[k] * t;
        canvas.paint(y, x, kSky, c);
      } else {
        // Lane stripes give the ground some structure.
        const bool stripe = ((x + 2 * y) / 6) % 5 == 0 && y > horizon + 3;
        detail::Rgb c = ground;
        if (stripe) {
          for (float& v : c) v = std::min(1.0f, v + 0.12f);
        }
        canvas.paint(y, x, kGround, c);
      }
    }
  }

  static constexpr std::array<detail::Rgb, 4> kFacades = {
      detail::Rgb{0.62f, 0.55f, 0.46f}, {0.55f, 0.55f, 0.57f}, {0.58f, 0.36f, 0.30f},
      {0.75f, 0.70f, 0.60f}};
  const int n_buildings = pick(1, 4);
  for (int b = 0; b < n_buildings; ++b) {
    const int bw = pick(W / 8, W * 3 / 8);
    const int x0 = pick(-bw / 3, W - bw * 2 / 3);
    const int top = pick(std::max(1, horizon / 8), std::max(2, horizon - 4));
    const int bottom = std::min(H - 1, horizon + pick(0, 3));
    const detail::Rgb facade = detail::jitter(kFacades[pick(0, 3)], 0.05f, rng);
    detail::Rgb window = facade;
    for (float& v : window) v *= 0.55f;
    for (int y = top; y <= bottom; ++y) {
      for (int x = std::max(0, x0); x < std::min(W, x0 + bw); ++x) {
        const bool is_window = (y - top) % 5 >= 2 && (x - x0) % 4 >= 2 && y < bottom - 2;
        canvas.paint(y, x, kBuilding, is_window ? window : facade);
      }
    }
  }

  const int n_vegetation = pick(0, 3);
  for (int v = 0; v < n_vegetation; ++v) {
    const double cx = uni(0.0, W - 1.0);
    const double cy = horizon + uni(-H * 0.12, H * 0.06);
    const int lobes = pick(2, 3);
    std::array<std::array<double, 3>, 3> circles{};
    for (int l = 0; l < lobes; ++l) {
      circles[l] = {cx + uni(-W * 0.07, W * 0.07), cy + uni(-H * 0.06, H * 0.04),
                    uni(W * 0.05, W * 0.11)};
    }
    const detail::Rgb leaf = detail::jitter({0.20f, 0.52f, 0.18f}, 0.06f, rng);
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        for (int l = 0; l < lobes; ++l) {
          const double dx = x - circles[l][0], dy = y - circles[l][1];
          if (dx * dx + dy * dy <= circles[l][2] * circles[l][2]) {
            detail::Rgb c = leaf;
            if ((x * 7 + y * 3) % 5 == 0) c[1] = std::min(1.0f, c[1] + 0.10f);
            canvas.paint(y, x, kVegetation, c);
            break;
          }
        }
      }
    }
  }

  static constexpr std::array<detail::Rgb, 4> kPaints = {
      detail::Rgb{0.80f, 0.12f, 0.10f}, {0.15f, 0.25f, 0.70f}, {0.90f, 0.80f, 0.15f},
      {0.92f, 0.92f, 0.90f}};
  const int n_vehicles = pick(0, 3);
  for (int v = 0; v < n_vehicles; ++v) {
    const double cy = uni(horizon + H * 0.08, H - H * 0.06);
    // Nearer (lower) vehicles are drawn larger.
    const double depth = (cy - horizon) / std::max(1.0, static_cast<double>(H - horizon));
    const double rx = W * (0.06 + 0.10 * depth) * uni(0.8, 1.2);
    const double ry = rx * uni(0.45, 0.65);
    const double cx = uni(rx * 0.5, W - 1 - rx * 0.5);
    const detail::Rgb paint = detail::jitter(kPaints[pick(0, 3)], 0.05f, rng);
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        const double dx = (x - cx) / rx, dy = (y - cy) / ry;
        if (dx * dx + dy * dy <= 1.0) {
          detail::Rgb c = paint;
          if (dy < -0.2 && std::abs(dx) < 0.55) {
            for (float& k : c) k = k * 0.5f + 0.15f;  // windshield band
          }
          canvas.paint(y, x, kVehicle, c);
        }
      }
    }
  }

  std::normal_distribution<float> grain(0.0f, 0.012f);
  for (float& p : image.pixels()) p = std::clamp(p + grain(rng), 0.0f, 1.0f);
  return {std::move(image), std::move(mask)};
}

}  // namespace dha::data
