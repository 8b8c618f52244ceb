#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "dha/discovery/style_code.hpp"

namespace dha::discovery {

using Point = std::vector<double>;

struct KMeansOptions {
  int max_iterations = 300;
  int restarts = 10;
};

struct KMeansResult {
  std::vector<int> labels;  // 0-based cluster per point
  std::vector<Point> centroids;
  double inertia = 0.0;
  int iterations = 0;
  // Inertia after every Lloyd iteration of the winning restart.
  std::vector<double> inertia_history;
};

namespace detail {

inline double inertia_of(const std::vector<Point>& pts, const std::vector<int>& labels,
                         const std::vector<Point>& centroids) {
  double s = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) s += squared_distance(pts[i], centroids[labels[i]]);
  return s;
}

inline std::vector<Point> kmeans_plus_plus(const std::vector<Point>& pts, int k, std::mt19937_64& rng) {
  std::vector<Point> centers;
  centers.push_back(pts[std::uniform_int_distribution<std::size_t>(0, pts.size() - 1)(rng)]);
  std::vector<double> d2(pts.size(), std::numeric_limits<double>::infinity());
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      d2[i] = std::min(d2[i], squared_distance(pts[i], centers.back()));
      total += d2[i];
    }
    std::size_t chosen = 0;
    if (total > 0.0) {
      double r = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (chosen = 0; chosen + 1 < pts.size(); ++chosen) {
        r -= d2[chosen];
        if (r < 0.0) break;
      }
    } else {
      chosen = std::uniform_int_distribution<std::size_t>(0, pts.size() - 1)(rng);
    }
    centers.push_back(pts[chosen]);
  }
  return centers;
}

inline std::vector<Point> compute_centroids(const std::vector<Point>& pts, const std::vector<int>& labels,
                                            int k, std::vector<int>& counts) {
  const std::size_t dim = pts.front().size();
  std::vector<Point> c(k, Point(dim, 0.0));
  counts.assign(k, 0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    ++counts[labels[i]];
    for (std::size_t d = 0; d < dim; ++d) c[labels[i]][d] += pts[i][d];
  }
  for (int j = 0; j < k; ++j) {
    if (counts[j] == 0) continue;
    for (double& v : c[j]) v /= counts[j];
  }
  return c;
}

// Moves the point farthest from its centroid into each empty cluster.
inline void repair_empty(const std::vector<Point>& pts, std::vector<int>& labels,
                         std::vector<Point>& centroids, std::vector<int>& counts) {
  const int k = static_cast<int>(centroids.size());
  for (int j = 0; j < k; ++j) {
    if (counts[j] > 0) continue;
    std::size_t far = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (counts[labels[i]] <= 1) continue;
      const double d = squared_distance(pts[i], centroids[labels[i]]);
      if (d > best) {
        best = d;
        far = i;
      }
    }
    --counts[labels[far]];
    labels[far] = j;
    counts[j] = 1;
    centroids = compute_centroids(pts, labels, k, counts);
  }
}

inline KMeansResult lloyd(const std::vector<Point>& pts, std::vector<Point> centroids, int max_iter) {
  const int k = static_cast<int>(centroids.size());
  KMeansResult r;
  r.labels.assign(pts.size(), -1);
  std::vector<int> counts;
  double previous = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (int j = 0; j < k; ++j) {
        const double d = squared_distance(pts[i], centroids[j]);
        if (d < bd) {
          bd = d;
          best = j;
        }
      }
      if (best != r.labels[i]) {
        r.labels[i] = best;
        changed = true;
      }
    }
    r.iterations = it + 1;
    if (!changed) break;
    centroids = compute_centroids(pts, r.labels, k, counts);
    repair_empty(pts, r.labels, centroids, counts);
    const double inertia = inertia_of(pts, r.labels, centroids);
    if (inertia > previous * (1.0 + 1e-12) + 1e-12) {
      throw std::logic_error("kmeans: inertia increased between Lloyd iterations");
    }
    previous = inertia;
    r.inertia_history.push_back(inertia);
  }
  r.centroids = std::move(centroids);
  r.inertia = inertia_of(pts, r.labels, r.centroids);
  return r;
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding; the restart with lowest inertia wins.
inline KMeansResult kmeans(const std::vector<Point>& points, int k, std::uint64_t seed,
                           KMeansOptions opts = {}) {
  if (k < 1) throw std::invalid_argument("kmeans: K must be >= 1, got " + std::to_string(k));
  if (static_cast<std::size_t>(k) > points.size()) {
    throw std::invalid_argument("kmeans: K=" + std::to_string(k) + " exceeds number of points " +
                                std::to_string(points.size()));
  }
  for (const auto& p : points) {
    if (p.size() != points.front().size()) throw std::invalid_argument("kmeans: ragged points");
  }
  std::mt19937_64 rng(seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, opts.restarts); ++r) {
    auto res = detail::lloyd(points, detail::kmeans_plus_plus(points, k, rng), opts.max_iterations);
    if (res.inertia < best.inertia) best = std::move(res);
  }
  return best;
}

/// Mean silhouette over all points (Euclidean). Singleton clusters score 0, as does
/// any point with a = b = 0.
inline double silhouette_score(const std::vector<Point>& points, const std::vector<int>& labels) {
  if (points.size() != labels.size()) throw std::invalid_argument("silhouette: size mismatch");
  if (points.empty()) throw std::invalid_argument("silhouette: no points");
  const int k = *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<int> counts(k, 0);
  for (int l : labels) {
    if (l < 0) throw std::invalid_argument("silhouette: negative label");
    ++counts[l];
  }
  int nonempty = 0;
  for (int c : counts) nonempty += c > 0;
  if (nonempty < 2) throw std::invalid_argument("silhouette: undefined for a single cluster");
  if (nonempty != k) throw std::invalid_argument("silhouette: empty cluster");

  const std::size_t n = points.size();
  double total = 0.0;
  std::vector<double> sums(k);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) sums[labels[j]] += std::sqrt(squared_distance(points[i], points[j]));
    }
    const int own = labels[i];
    if (counts[own] == 1) continue;
    const double a = sums[own] / (counts[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      if (c != own) b = std::min(b, sums[c] / counts[c]);
    }
    const double m = std::max(a, b);
    if (m > 0.0) total += (b - a) / m;
  }
  return total / static_cast<double>(n);
}

struct KSelection {
  int k = 0;
  std::vector<std::pair<int, double>> scores;  // (K, silhouette)
};

/// Picks the K in [k_min, k_max] maximising silhouette; ties go to the smaller K.
inline KSelection select_k(const std::vector<Point>& points, int k_min, int k_max, std::uint64_t seed) {
  if (k_min < 2 || k_max < k_min || static_cast<std::size_t>(k_max) > points.size() - 1) {
    throw std::invalid_argument("select_k: range [" + std::to_string(k_min) + "," +
                                std::to_string(k_max) + "] must lie within [2, N-1]");
  }
  KSelection sel;
  double best = -std::numeric_limits<double>::infinity();
  for (int k = k_min; k <= k_max; ++k) {
    const auto res = kmeans(points, k, seed);
    const double s = silhouette_score(points, res.labels);
    sel.scores.emplace_back(k, s);
    if (s > best) {
      best = s;
      sel.k = k;
    }
  }
  return sel;
}

inline std::vector<Point> to_points(const std::vector<StyleCode>& codes) {
  std::vector<Point> pts;
  pts.reserve(codes.size());
  for (const auto& c : codes) pts.push_back(c.values);
  return pts;
}

}  // namespace dha::discovery
