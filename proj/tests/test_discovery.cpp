#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "dha/data/benchmark.hpp"
#include "dha/discovery/assignment.hpp"
#include "dha/discovery/clustering.hpp"
#include "dha/discovery/style_code.hpp"
#include "test_util.hpp"

using namespace dha;
using namespace dha::discovery;

namespace {

// Encoder stub: the image itself as a 3-channel feature map (a 1x1 identity conv).
class IdentityEncoder final : public FeatureExtractor {
 public:
  nn::Tensor<float> features(const data::Image& image) const override { return data::to_tensor<float>(image); }
  int channels() const override { return 3; }
};

double inertia(const std::vector<Point>& pts, const std::vector<int>& labels, int k) {
  double total = 0.0;
  for (int c = 0; c < k; ++c) {
    Point mean(pts[0].size(), 0.0);
    int n = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (labels[i] != c) continue;
      ++n;
      for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += pts[i][d];
    }
    for (auto& m : mean) m /= n;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (labels[i] == c) total += squared_distance(pts[i], mean);
    }
  }
  return total;
}

// Best inertia over every split of the points into two non-empty groups.
double exhaustive_two_means(const std::vector<Point>& pts) {
  const std::size_t n = pts.size();
  double best = INFINITY;
  for (unsigned mask = 1; mask < (1u << (n - 1)); ++mask) {
    std::vector<int> labels(n, 0);
    for (std::size_t i = 0; i + 1 < n; ++i) labels[i] = (mask >> i) & 1u;
    best = std::min(best, inertia(pts, labels, 2));
  }
  return best;
}

// Silhouette straight from its definition.
double silhouette_oracle(const std::vector<Point>& pts, const std::vector<int>& labels) {
  const std::size_t n = pts.size();
  std::set<int> clusters(labels.begin(), labels.end());
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double a_sum = 0.0;
    int a_n = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && labels[j] == labels[i]) {
        a_sum += std::sqrt(squared_distance(pts[i], pts[j]));
        ++a_n;
      }
    }
    if (a_n == 0) continue;
    const double a = a_sum / a_n;
    double b = INFINITY;
    for (int c : clusters) {
      if (c == labels[i]) continue;
      double s = 0.0;
      int m = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (labels[j] == c) {
          s += std::sqrt(squared_distance(pts[i], pts[j]));
          ++m;
        }
      }
      b = std::min(b, s / m);
    }
    if (std::max(a, b) > 0) total += (b - a) / std::max(a, b);
  }
  return total / n;
}

std::vector<Point> blobs(int per, const std::vector<Point>& centers, double spread, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, spread);
  std::vector<Point> out;
  for (const auto& c : centers) {
    for (int i = 0; i < per; ++i) {
      Point p = c;
      for (auto& v : p) v += g(rng);
      out.push_back(p);
    }
  }
  return out;
}

}  // namespace

TEST(StyleCode, HandComputedStatistics) {
  nn::Tensor<float> f(nn::Shape{1, 1, 2, 2}, std::vector<float>{1, 3, 5, 7});
  const auto code = feature_statistics(f);
  ASSERT_EQ(code.size(), 2u);
  EXPECT_NEAR(code.values[0], 4.0, 1e-12);
  EXPECT_NEAR(code.values[1], std::sqrt(5.0), 1e-12);
}

TEST(StyleCode, ConstantImageHasZeroStd) {
  const data::Image img(32, 32, 0.4f);
  const auto code = extract_style_code(img, IdentityEncoder{});
  const std::size_t c = code.size() / 2;
  for (std::size_t i = c; i < code.size(); ++i) EXPECT_NEAR(code.values[i], 0.0, 1e-6);
}

TEST(StyleCode, RotationInvariantUnderPointwiseEncoder) {
  const auto [img, mask] = data::generate_scene(4);
  data::Image rot(img.height(), img.width());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < 3; ++c) rot.at(x, img.height() - 1 - y, c) = img.at(y, x, c);
  const auto a = extract_style_code(img, IdentityEncoder{});
  const auto b = extract_style_code(rot, IdentityEncoder{});
  ASSERT_EQ(a.size(), 6u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.values[i], b.values[i], 1e-6);
}

TEST(StyleCode, BatchedMatchesSingle) {
  std::vector<data::Image> imgs;
  for (int i = 0; i < 5; ++i) imgs.push_back(data::generate_scene(i).first);
  std::vector<const data::Image*> ptrs;
  for (const auto& im : imgs) ptrs.push_back(&im);
  StyleEncoder enc;
  const auto batch = extract_style_codes(ptrs, enc, 2);
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    const auto one = extract_style_code(imgs[i], enc);
    for (std::size_t d = 0; d < one.size(); ++d) EXPECT_NEAR(batch[i].values[d], one.values[d], 1e-5);
  }
}

TEST(KMeans, SingleClusterIsGlobalMean) {
  const std::vector<Point> pts{{0.0, 1.0}, {2.0, 3.0}, {4.0, -1.0}};
  const auto r = kmeans(pts, 1, 0);
  for (int l : r.labels) EXPECT_EQ(l, 0);
  EXPECT_NEAR(r.centroids[0][0], 2.0, 1e-12);
  EXPECT_NEAR(r.centroids[0][1], 1.0, 1e-12);
}

TEST(KMeans, FourPointsTwoClusters) {
  const std::vector<Point> pts{{0.0}, {0.1}, {10.0}, {10.1}};
  const auto r = kmeans(pts, 2, 0);
  EXPECT_EQ(r.labels[0], r.labels[1]);
  EXPECT_EQ(r.labels[2], r.labels[3]);
  EXPECT_NE(r.labels[0], r.labels[2]);
  EXPECT_NEAR(r.inertia, exhaustive_two_means(pts), 1e-12);
}

TEST(KMeans, KEqualsNHasZeroInertia) {
  const std::vector<Point> pts{{0.0, 0.0}, {1.0, 0.0}, {0.0, 5.0}, {3.0, 3.0}};
  const auto r = kmeans(pts, 4, 0);
  EXPECT_NEAR(r.inertia, 0.0, 1e-12);
  EXPECT_EQ(std::set<int>(r.labels.begin(), r.labels.end()).size(), 4u);
}

TEST(KMeans, MatchesExhaustiveOptimumOnSmallInstances) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int inst = 0; inst < 40; ++inst) {
    const int n = 3 + inst % 6;
    std::vector<Point> pts(n, Point(2));
    for (auto& p : pts)
      for (auto& v : p) v = u(rng);
    const auto r = kmeans(pts, 2, inst);
    EXPECT_NEAR(r.inertia, exhaustive_two_means(pts), 1e-9) << "instance " << inst;
    EXPECT_NEAR(r.inertia, inertia(pts, r.labels, 2), 1e-9);
  }
}

TEST(KMeans, RejectsBadK) {
  const std::vector<Point> pts{{0.0}, {1.0}};
  EXPECT_THROW(kmeans(pts, 3, 0), std::invalid_argument);
  EXPECT_THROW(kmeans(pts, 0, 0), std::invalid_argument);
}

TEST(KMeans, DeterministicForSeed) {
  const auto pts = blobs(20, {{0, 0}, {3, 3}, {0, 4}}, 1.0, 5);
  const auto a = kmeans(pts, 3, 9), b = kmeans(pts, 3, 9);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(a.inertia, b.inertia);
}

TEST(Silhouette, FourPointExample) {
  const std::vector<Point> pts{{0.0}, {0.1}, {10.0}, {10.1}};
  const std::vector<int> labels{0, 0, 1, 1};
  const double s = silhouette_score(pts, labels);
  // a = 0.1 for every point; b = 10.05 or 9.95; s_i = 1 - a/b.
  const double hand = (2 * (1 - 0.1 / 10.05) + 2 * (1 - 0.1 / 9.95)) / 4;
  EXPECT_NEAR(s, hand, 1e-12);
  EXPECT_NEAR(s, 0.990, 1e-3);
}

TEST(Silhouette, MatchesDefinitionOracle) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int inst = 0; inst < 20; ++inst) {
    const int n = 6 + inst, k = 2 + inst % 3;
    std::vector<Point> pts(n, Point(3));
    for (auto& p : pts)
      for (auto& v : p) v = u(rng);
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) labels[i] = i % k;
    std::shuffle(labels.begin(), labels.end(), rng);
    EXPECT_NEAR(silhouette_score(pts, labels), silhouette_oracle(pts, labels), 1e-9);
  }
}

TEST(Silhouette, CoincidentPointsScoreZero) {
  const std::vector<Point> pts(6, Point{1.0, 1.0});
  EXPECT_DOUBLE_EQ(silhouette_score(pts, {0, 0, 0, 1, 1, 1}), 0.0);
}

TEST(Silhouette, SeparatedBlobsScoreHigh) {
  const auto pts = blobs(25, {{0, 0}, {50, 0}}, 0.5, 7);
  std::vector<int> labels(50, 0);
  for (int i = 25; i < 50; ++i) labels[i] = 1;
  EXPECT_GT(silhouette_score(pts, labels), 0.9);
}

TEST(SelectK, TwoBlobsGiveTwo) {
  const auto pts = blobs(30, {{0, 0}, {20, 20}}, 1.0, 8);
  EXPECT_EQ(select_k(pts, 2, 5, 0).k, 2);
}

TEST(SelectK, SingletonRange) {
  const auto pts = blobs(10, {{0, 0}, {5, 0}, {0, 5}}, 1.0, 9);
  const auto sel = select_k(pts, 2, 2, 0);
  EXPECT_EQ(sel.k, 2);
  EXPECT_EQ(sel.scores.size(), 1u);
  EXPECT_THROW(select_k(pts, 1, 3, 0), std::invalid_argument);
}

TEST(Assignment, PartitionProperties) {
  data::DatasetManifest m{{}, "."};
  std::vector<std::string> ids;
  for (int i = 0; i < 9; ++i) {
    const auto id = "cmp_" + std::to_string(i);
    m.entries.push_back({id, "i", "m", data::Split::kCompound, i % 3});
    ids.push_back(id);
  }
  m.entries.push_back({"src_0", "i", "m", data::Split::kSource, std::nullopt});
  KMeansResult km;
  km.labels = {0, 1, 2, 0, 1, 2, 2, 2, 0};
  km.centroids = {{0.0}, {1.0}, {2.0}};
  const auto a = make_assignment(ids, km);
  const auto parts = partition_manifest(m, a);
  ASSERT_EQ(parts.size(), 3u);
  std::set<std::string> seen;
  std::size_t total = 0;
  for (const auto& p : parts) {
    total += p.entries.size();
    for (const auto& e : p.entries) EXPECT_TRUE(seen.insert(e.image_id).second);
  }
  EXPECT_EQ(total, 9u);
  EXPECT_EQ(a.sizes(), (std::vector<int>{3, 2, 4}));

  KMeansResult one{{0, 0, 0, 0, 0, 0, 0, 0, 0}, {{0.0}}};
  const auto single = partition_manifest(m, make_assignment(ids, one));
  ASSERT_EQ(single.size(), 1u);
  EXPECT_EQ(single[0], m.filter(data::Split::kCompound));
}

TEST(Assignment, FileRoundTrip) {
  const auto dir = testutil::scratch_dir();
  KMeansResult km{{0, 1, 1}, {{0.5, -1.25}, {1e-17, 3.0}}};
  const auto a = make_assignment({"x", "y", "z"}, km);
  write_assignment(a, dir / "a.tsv");
  write_centroids(a.centroids, dir / "c.txt");
  const auto b = read_assignment(dir / "a.tsv", dir / "c.txt");
  EXPECT_EQ(b.image_ids, a.image_ids);
  EXPECT_EQ(b.domains, a.domains);
  EXPECT_EQ(b.centroids, a.centroids);
  EXPECT_EQ(b.nearest({0.4, -1.0}), 0);
}
