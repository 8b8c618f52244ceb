#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dha/evaluation/segmentation_eval.hpp"
#include "dha/io/checkpoint.hpp"
#include "dha/io/png.hpp"

namespace dha::evaluation {

struct CurvePoint {
  int iteration = 0;
  std::string style;
  double miou = 0.0;
};

template <typename T>
std::vector<CurvePoint> evaluate_checkpoint(const adaptation::SegNetwork<T>& net, int iteration,
                                            const std::vector<EvalSet>& sets) {
  std::vector<CurvePoint> out;
  for (const auto& s : sets) out.push_back({iteration, s.style, evaluate_set(net, s).miou});
  return out;
}

/// Per-style mIoU at every checkpoint; `checkpoints` pairs an iteration with an F checkpoint
/// file whose tensors live under `prefix`.
inline std::vector<CurvePoint> biased_alignment_curves(
    const std::vector<std::pair<int, std::filesystem::path>>& checkpoints, const std::string& prefix,
    int num_classes, const std::vector<EvalSet>& sets) {
  if (checkpoints.size() < 2) {
    throw std::invalid_argument("biased_alignment_curves: need at least 2 checkpoints, got " +
                                std::to_string(checkpoints.size()));
  }
  std::vector<CurvePoint> out;
  for (const auto& [iteration, path] : checkpoints) {
    adaptation::SegNetwork<float> net(num_classes, 0);
    io::load_checkpoint(path).get(prefix, net.params());
    const auto pts = evaluate_checkpoint(net, iteration, sets);
    out.insert(out.end(), pts.begin(), pts.end());
  }
  return out;
}

inline std::vector<CurvePoint> curve_for(const std::vector<CurvePoint>& points, const std::string& style) {
  std::vector<CurvePoint> out;
  for (const auto& p : points) {
    if (p.style == style) out.push_back(p);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.iteration < b.iteration; });
  return out;
}

struct CurveSummary {
  double peak = 0.0;
  double final = 0.0;
  int peak_iteration = 0;
  double drop() const { return peak - final; }
};

inline CurveSummary summarize(const std::vector<CurvePoint>& curve) {
  if (curve.empty()) throw std::invalid_argument("summarize: empty curve");
  CurveSummary s;
  s.peak = -1.0;
  for (const auto& p : curve) {
    if (p.miou > s.peak) {
      s.peak = p.miou;
      s.peak_iteration = p.iteration;
    }
  }
  s.final = curve.back().miou;
  return s;
}

inline void write_curves_csv(const std::filesystem::path& path, const std::vector<CurvePoint>& points) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "iteration,style,miou\n";
  for (const auto& p : points) out << p.iteration << ',' << p.style << ',' << format_value(p.miou) << '\n';
}

namespace detail {

struct Canvas {
  int w, h;
  std::vector<std::uint8_t> px;
  Canvas(int w_, int h_) : w(w_), h(h_), px(static_cast<std::size_t>(w_) * h_ * 3, 255) {}
  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    if (x < 0 || y < 0 || x >= w || y >= h) return;
    auto* p = &px[(static_cast<std::size_t>(y) * w + x) * 3];
    p[0] = r;
    p[1] = g;
    p[2] = b;
  }
  void line(int x0, int y0, int x1, int y1, std::uint8_t r, std::uint8_t g, std::uint8_t b, int thick = 1) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
      for (int oy = 0; oy < thick; ++oy) {
        for (int ox = 0; ox < thick; ++ox) set(x0 + ox, y0 + oy, r, g, b);
      }
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }
  void box(int cx, int cy, int half, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    for (int y = cy - half; y <= cy + half; ++y) {
      for (int x = cx - half; x <= cx + half; ++x) set(x, y, r, g, b);
    }
  }
};

}  // namespace detail

/// Line plot of one style's curve: x = iteration, y = mIoU on [0, 1] with gridlines every 0.1.
/// The peak checkpoint is marked in red.
inline void plot_curve_png(const std::filesystem::path& path, const std::vector<CurvePoint>& curve) {
  if (curve.empty()) throw std::invalid_argument("plot_curve_png: empty curve");
  constexpr int kW = 480, kH = 320, kMargin = 30;
  detail::Canvas c(kW, kH);
  const int x0 = kMargin, x1 = kW - kMargin, y0 = kH - kMargin, y1 = kMargin;
  for (int g = 0; g <= 10; ++g) {
    const int y = y0 - (y0 - y1) * g / 10;
    c.line(x0, y, x1, y, 225, 225, 225);
  }
  c.line(x0, y0, x1, y0, 0, 0, 0);
  c.line(x0, y0, x0, y1, 0, 0, 0);
  const int lo = curve.front().iteration, hi = curve.back().iteration;
  auto px = [&](const CurvePoint& p) {
    const double t = hi > lo ? static_cast<double>(p.iteration - lo) / (hi - lo) : 0.5;
    return std::pair<int, int>{x0 + static_cast<int>(std::lround(t * (x1 - x0))),
                               y0 - static_cast<int>(std::lround(std::clamp(p.miou, 0.0, 1.0) * (y0 - y1)))};
  };
  for (std::size_t i = 1; i < curve.size(); ++i) {
    const auto [ax, ay] = px(curve[i - 1]);
    const auto [bx, by] = px(curve[i]);
    c.line(ax, ay, bx, by, 30, 90, 200, 2);
  }
  const auto s = summarize(curve);
  for (const auto& p : curve) {
    const auto [x, y] = px(p);
    if (p.iteration == s.peak_iteration) {
      c.box(x, y, 4, 210, 30, 30);
    } else {
      c.box(x, y, 2, 30, 90, 200);
    }
  }
  io::write_png(path, {kW, kH, 3, std::move(c.px)});
}

}  // namespace dha::evaluation
