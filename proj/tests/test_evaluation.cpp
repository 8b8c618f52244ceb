#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dha/data/benchmark.hpp"
#include "dha/evaluation/alignment.hpp"
#include "dha/evaluation/clustering_quality.hpp"
#include "dha/evaluation/domain_metrics.hpp"
#include "dha/evaluation/features.hpp"
#include "dha/evaluation/miou.hpp"
#include "dha/evaluation/segmentation_eval.hpp"
#include "dha/io/checkpoint.hpp"
#include "test_util.hpp"

using namespace dha;
using namespace dha::evaluation;

namespace {

// Per-pixel counting with no confusion matrix: for each class, count pixels in the
// intersection and in the union directly.
double brute_force_miou(const std::vector<data::SegMask>& pred, const std::vector<data::SegMask>& truth, int C) {
  double acc = 0.0;
  int used = 0;
  for (int c = 0; c < C; ++c) {
    long inter = 0, uni = 0;
    for (std::size_t m = 0; m < pred.size(); ++m) {
      for (int y = 0; y < pred[m].height(); ++y) {
        for (int x = 0; x < pred[m].width(); ++x) {
          const bool p = pred[m].at(y, x) == c, t = truth[m].at(y, x) == c;
          inter += p && t;
          uni += p || t;
        }
      }
    }
    if (uni == 0) continue;
    acc += static_cast<double>(inter) / uni;
    ++used;
  }
  return acc / used;
}

// ARI from the four pair-agreement counts, enumerating every pair of items.
double pair_counting_ari(const std::vector<int>& a, const std::vector<int>& b) {
  double ss = 0, sd = 0, ds = 0, dd = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const bool sa = a[i] == a[j], sb = b[i] == b[j];
      ss += sa && sb;
      sd += sa && !sb;
      ds += !sa && sb;
      dd += !sa && !sb;
    }
  }
  const double num = 2.0 * (ss * dd - sd * ds);
  const double den = (ss + sd) * (sd + dd) + (ss + ds) * (ds + dd);
  return den == 0.0 ? 1.0 : num / den;
}

data::SegMask random_mask(std::mt19937_64& rng, int h, int w, int C) {
  std::vector<int> labels(h * w);
  for (auto& l : labels) l = std::uniform_int_distribution<int>(0, C - 1)(rng);
  return {h, w, C, labels};
}

}  // namespace

TEST(Miou, HandCase) {
  const data::SegMask gt(2, 2, 2, std::vector<int>{0, 0, 1, 1});
  const data::SegMask pred(2, 2, 2, std::vector<int>{0, 1, 1, 1});
  const auto r = compute_miou({pred}, {gt}, 2);
  EXPECT_NEAR(r.per_class_iou[0], 0.5, 1e-15);
  EXPECT_NEAR(r.per_class_iou[1], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.miou, 7.0 / 12.0, 1e-15);
}

TEST(Miou, PerfectAndAllWrong) {
  const data::SegMask gt(2, 2, 2, std::vector<int>{0, 0, 1, 1});
  EXPECT_DOUBLE_EQ(compute_miou({gt}, {gt}, 2).miou, 1.0);
  const data::SegMask wrong(2, 2, 2, std::vector<int>{1, 1, 0, 0});
  EXPECT_DOUBLE_EQ(compute_miou({wrong}, {gt}, 2).miou, 0.0);
}

TEST(Miou, MatchesBruteForceOnRandomPairs) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const int C = 2 + trial % 5, n = 1 + trial % 3;
    const int h = 1 + trial % 4, w = 2 + trial % 3;
    std::vector<data::SegMask> p, t;
    for (int i = 0; i < n; ++i) {
      p.push_back(random_mask(rng, h, w, C));
      t.push_back(random_mask(rng, h, w, C));
    }
    EXPECT_EQ(compute_miou(p, t, C).miou, brute_force_miou(p, t, C)) << "trial " << trial;
  }
}

TEST(Miou, AbsentClassesExcluded) {
  const data::SegMask gt(1, 2, 5, std::vector<int>{0, 1});
  const auto r = compute_miou({gt}, {gt}, 5);
  EXPECT_TRUE(std::isnan(r.per_class_iou[4]));
  EXPECT_DOUBLE_EQ(r.miou, 1.0);
  EXPECT_THROW(compute_miou({}, {}, 5), std::invalid_argument);
}

TEST(Aggregate, SourceOnlyRow) {
  const auto m = aggregate_domains({{"rainy", false, 16.2, 0}, {"snowy", false, 18.0, 0}, {"cloudy", false, 20.9, 0},
                                    {"overcast", true, 21.2, 0}});
  EXPECT_NEAR(m.compound_open, 19.075, 1e-12);
  EXPECT_NEAR(m.compound, (16.2 + 18.0 + 20.9) / 3, 1e-12);
  EXPECT_TRUE(std::isnan(m.compound_weighted));
}

TEST(Aggregate, IdenticalAndSingle) {
  const auto m = aggregate_domains({{"a", false, 0.3, 10}, {"b", false, 0.3, 20}, {"o", true, 0.3, 5}});
  EXPECT_NEAR(m.compound, 0.3, 1e-15);
  EXPECT_NEAR(m.compound_open, 0.3, 1e-15);
  EXPECT_NEAR(m.compound_weighted, 0.3, 1e-15);
  const auto one = aggregate_domains({{"a", false, 0.42, 1}, {"o", true, 0.1, 1}});
  EXPECT_DOUBLE_EQ(one.compound, 0.42);
  EXPECT_THROW(aggregate_domains({{"o", true, 0.1, 1}}), std::invalid_argument);
}

TEST(Aggregate, WeightedByImageCount) {
  const auto m = aggregate_domains({{"a", false, 0.2, 30}, {"b", false, 0.5, 10}, {"o", true, 0.8, 10}});
  EXPECT_NEAR(m.compound_weighted, (0.2 * 30 + 0.5 * 10) / 40, 1e-15);
  EXPECT_NEAR(m.compound_open_weighted, (0.2 * 30 + 0.5 * 10 + 0.8 * 10) / 50, 1e-15);
}

TEST(Ari, IdentityAndPermutation) {
  EXPECT_DOUBLE_EQ(adjusted_rand_index({1, 1, 2, 2}, {1, 1, 2, 2}), 1.0);
  EXPECT_NEAR(adjusted_rand_index({0, 0, 1, 1, 2, 2}, {2, 2, 0, 0, 1, 1}), 1.0, 1e-12);
}

TEST(Ari, PairCountingOracle) {
  EXPECT_NEAR(adjusted_rand_index({1, 2, 1, 2}, {1, 1, 2, 2}), pair_counting_ari({1, 2, 1, 2}, {1, 1, 2, 2}), 1e-9);
  EXPECT_NEAR(adjusted_rand_index({1, 2, 1, 2}, {1, 1, 2, 2}), -0.5, 1e-12);
  std::mt19937_64 rng(5);
  for (int t = 0; t < 50; ++t) {
    const int n = 5 + t, ka = 2 + t % 4, kb = 2 + (t / 4) % 3;
    std::vector<int> a(n), b(n);
    for (auto& v : a) v = std::uniform_int_distribution<int>(0, ka - 1)(rng);
    for (auto& v : b) v = std::uniform_int_distribution<int>(0, kb - 1)(rng);
    EXPECT_NEAR(adjusted_rand_index(a, b), pair_counting_ari(a, b), 1e-9);
  }
}

namespace {

struct EvalWorld {
  std::vector<data::Image> images;
  std::vector<data::SegMask> masks;
  std::vector<EvalSet> sets;

  EvalWorld() {
    data::SceneConfig sc;
    sc.height = sc.width = 16;
    for (int i = 0; i < 6; ++i) {
      auto [img, mask] = data::generate_scene(i, sc);
      images.push_back(img);
      masks.push_back(mask);
    }
    sets = {{"compound", "night", false, {}, {}}, {"compound", "rain", false, {}, {}}, {"open", "sunset", true, {}, {}}};
    for (int i = 0; i < 6; ++i) {
      sets[i % 3].images.push_back(&images[i]);
      sets[i % 3].masks.push_back(&masks[i]);
    }
  }
};

}  // namespace

TEST(Alignment, CurvesHaveOneRowPerStylePerCheckpoint) {
  EvalWorld w;
  const auto dir = testutil::scratch_dir();
  std::vector<std::pair<int, std::filesystem::path>> ckpts;
  for (int it : {100, 200, 300}) {
    nn::SegNetwork<float> net(5, it);
    io::Checkpoint ck;
    ck.put("", net.params());
    io::save_checkpoint(ck, dir / (std::to_string(it) + ".ckpt"));
    ckpts.emplace_back(it, dir / (std::to_string(it) + ".ckpt"));
  }
  const auto curves = biased_alignment_curves(ckpts, "", 5, w.sets);
  EXPECT_EQ(curves.size(), 9u);
  const auto night = curve_for(curves, "night");
  ASSERT_EQ(night.size(), 3u);
  EXPECT_EQ(night[2].iteration, 300);
  write_curves_csv(dir / "curves.csv", curves);
  plot_curve_png(dir / "night.png", night);
  EXPECT_TRUE(std::filesystem::file_size(dir / "night.png") > 0);
  const auto png = io::read_png(dir / "night.png", 3);
  EXPECT_EQ(png.width, 480);
  EXPECT_THROW(biased_alignment_curves({ckpts[0]}, "", 5, w.sets), std::invalid_argument);
}

TEST(Alignment, Summary) {
  const std::vector<CurvePoint> c{{1, "n", 0.2}, {2, "n", 0.35}, {3, "n", 0.3}};
  const auto s = summarize(c);
  EXPECT_DOUBLE_EQ(s.peak, 0.35);
  EXPECT_EQ(s.peak_iteration, 2);
  EXPECT_NEAR(s.drop(), 0.05, 1e-15);
}

TEST(SegmentationEval, AggregateFollowsSets) {
  EvalWorld w;
  nn::SegNetwork<float> net(5, 1);
  const auto ev = evaluate_sets(net, w.sets);
  ASSERT_EQ(ev.size(), 3u);
  const auto m = aggregate(ev, w.sets);
  EXPECT_NEAR(m.compound, (ev[0].result.miou + ev[1].result.miou) / 2, 1e-15);
  EXPECT_TRUE(m.styles[2].open);
  EXPECT_EQ(m.styles[0].num_images, 2);
}

TEST(MetricsCsv, Layout) {
  EvalWorld w;
  const auto dir = testutil::scratch_dir();
  nn::SegNetwork<float> net(5, 1);
  const auto ev = evaluate_sets(net, w.sets);
  const std::vector<std::string> names(data::kClassNames.begin(), data::kClassNames.end());
  write_metrics_csv(dir / "m.csv", "run", 10, ev, names);
  write_metrics_csv(dir / "m.csv", "run", 20, ev, names, true);
  const auto text = testutil::slurp(dir / "m.csv");
  EXPECT_EQ(text.rfind("run_id,iteration,split,style,class,iou,miou\n", 0), 0u);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1 + 2 * 3 * 5);
  write_domain_metrics_csv(dir / "d.csv", "run", aggregate(ev, w.sets));
  const auto d = testutil::slurp(dir / "d.csv");
  EXPECT_NE(d.find("run,C+O,"), std::string::npos);
  EXPECT_NE(d.find("run,C_weighted,"), std::string::npos);
}

TEST(Features, RowsWidthAndTags) {
  EvalWorld w;
  const auto dir = testutil::scratch_dir();
  data::DatasetManifest m{{}, "."};
  std::vector<const data::Image*> imgs;
  for (int i = 0; i < 6; ++i) {
    m.entries.push_back({"id" + std::to_string(i), "", "", i < 2 ? data::Split::kSource : data::Split::kCompound,
                         i < 2 ? std::nullopt : std::optional<int>(i % 3)});
    imgs.push_back(&w.images[i]);
  }
  nn::SegNetwork<float> net(5, 1);
  const auto rows = export_features(net, m, imgs);
  ASSERT_EQ(rows.size(), 6u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].values.size(), rows[0].values.size());
    EXPECT_EQ(rows[i].style, m.entries[i].true_style_id ? std::to_string(*m.entries[i].true_style_id) : "");
    EXPECT_EQ(rows[i].image_id, m.entries[i].image_id);
  }
  EXPECT_EQ(export_features(net, m, imgs)[3].values, rows[3].values);
  EXPECT_THROW(export_features(net, m, imgs, "logits"), std::invalid_argument);
  write_features(dir / "f.tsv", rows);
  EXPECT_EQ(testutil::slurp(dir / "f.tsv").rfind("width " + std::to_string(rows[0].values.size()) + "\n", 0), 0u);
}
