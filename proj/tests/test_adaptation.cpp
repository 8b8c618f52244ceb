#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "dha/adaptation/trainer.hpp"
#include "dha/data/benchmark.hpp"
#include "gradcheck.hpp"

using namespace dha;
using namespace dha::adaptation;
using nn::Var;

namespace {

Var<double> stub(double p) { return nn::constant(nn::Tensor<double>(nn::Shape{1, 1, 1, 1}, std::log(p / (1 - p)))); }

double value(const Var<double>& v) { return v->value[0]; }

nn::Tensor<double> random_images(int n, int side, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  nn::Tensor<double> t(nn::Shape{n, 3, side, side});
  for (auto& v : t.vec()) v = u(rng);
  return t;
}

struct World {
  std::vector<data::Image> images, targets;
  std::vector<data::SegMask> masks;
  AdaptData data;

  explicit World(int k = 2) {
    data::SceneConfig sc;
    sc.height = sc.width = 16;
    for (int i = 0; i < 6; ++i) {
      auto [img, mask] = data::generate_scene(i, sc);
      images.push_back(img);
      masks.push_back(mask);
    }
    for (int i = 0; i < 3 * k; ++i) {
      data::StyleParams p;
      p.brightness = 0.5 + 0.3 * (i % k);
      targets.push_back(data::apply_style(data::generate_scene(50 + i, sc).first, p));
    }
    for (int i = 0; i < 2; ++i) data.raw_source.push_back({&images[i], &masks[i]});
    data.translated.resize(k);
    data.targets.resize(k);
    for (int j = 0; j < k; ++j) {
      for (int i = 0; i < 2; ++i) data.translated[j].push_back({&images[2 + (2 * j + i) % 4], &masks[2 + (2 * j + i) % 4]});
      for (int i = 0; i < 3; ++i) data.targets[j].push_back(&targets[3 * j + i]);
    }
  }
};

std::vector<std::vector<float>> snapshot(const nn::ParamSet<float>& p) {
  std::vector<std::vector<float>> out;
  for (const auto& [_, v] : p.entries()) out.emplace_back(v->value.vec().begin(), v->value.vec().end());
  return out;
}

}  // namespace

TEST(OutLoss, LogFormHalfStub) {
  EXPECT_NEAR(value(out_objective(stub(0.5), stub(0.5))), 2 * std::log(0.5), 1e-6);
  EXPECT_NEAR(value(out_objective(stub(0.5), stub(0.5))), -1.3863, 1e-4);
  EXPECT_NEAR(value(out_discriminator_loss(stub(0.5), stub(0.5), GanForm::kLog)), 1.3863, 1e-4);
  EXPECT_NEAR(value(out_adversarial_loss(stub(0.5), GanForm::kLog)), std::log(2.0), 1e-6);
}

TEST(OutLoss, LeastSquaresHalfStub) {
  EXPECT_NEAR(value(out_discriminator_loss(stub(0.5), stub(0.5), GanForm::kLeastSquares)), 0.5, 1e-6);
  EXPECT_NEAR(value(out_adversarial_loss(stub(0.5), GanForm::kLeastSquares)), 0.25, 1e-6);
  EXPECT_NEAR(value(out_discriminator_loss(stub(0.8), stub(0.3), GanForm::kLeastSquares)), 0.04 + 0.09, 1e-6);
}

TEST(TaskLoss, HandCases) {
  nn::Tensor<double> lp(nn::Shape{1, 2, 1, 1}, std::vector<double>{std::log(0.9), std::log(0.1)});
  std::vector<int> y{0};
  EXPECT_NEAR(value(task_loss(nn::constant(lp), y)), -std::log(0.9), 1e-12);
  EXPECT_NEAR(value(task_loss(nn::constant(lp), y)), 0.10536, 1e-5);
  nn::Tensor<double> uni(nn::Shape{1, 5, 2, 2}, std::log(0.2));
  std::vector<int> y4{0, 1, 2, 4};
  EXPECT_NEAR(value(task_loss(nn::constant(uni), y4)), std::log(5.0), 1e-6);
}

TEST(TotalLoss, WeightedSum) {
  const LossWeights w;
  const std::vector<LossComponents> zero(3);
  EXPECT_EQ(total_loss(zero, w), 0.0);
  const std::vector<LossComponents> one{{1, 1, 1, 1, 1}};
  EXPECT_NEAR(total_loss(one, w), 22.01, 1e-12);
  const std::vector<LossComponents> two{{1, 2, 3, 4, 5}, {1, 2, 3, 4, 5}};
  EXPECT_NEAR(total_loss(two, w), 2 * total_loss(std::vector<LossComponents>{{1, 2, 3, 4, 5}}, w), 1e-12);
  LossWeights bad;
  bad.out = -1;
  EXPECT_THROW(total_loss(one, bad), std::invalid_argument);
}

TEST(Segmenter, ProbabilitiesNormalised) {
  nn::SegNetwork<double> net(5, 1);
  const auto p = net.probs(nn::constant(random_images(2, 16, 2)));
  const std::size_t plane = 16 * 16;
  for (int n = 0; n < 2; ++n) {
    for (std::size_t i = 0; i < plane; ++i) {
      double s = 0.0;
      for (int c = 0; c < 5; ++c) s += p->value[(n * 5 + c) * plane + i];
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
  const auto p2 = net.probs(nn::constant(random_images(2, 16, 2)));
  EXPECT_EQ(p->value.vec(), p2->value.vec());
}

TEST(Segmenter, UniformLogitsGiveUniformProbabilities) {
  const auto p = nn::exp(nn::log_softmax_channels(nn::constant(nn::Tensor<double>(nn::Shape{1, 5, 3, 3}, 0.7))));
  for (double v : p->value.span()) EXPECT_NEAR(v, 0.2, 1e-12);
}

TEST(GradCheck, FSideLosses) {
  nn::SegNetwork<double> net(5, 3);
  nn::OutputDiscriminator<double> d(5, 4);
  d.params().set_trainable(false);
  auto xs = nn::constant(random_images(1, 16, 5));
  auto xt = nn::constant(random_images(1, 16, 6));
  std::vector<int> labels(256);
  for (int i = 0; i < 256; ++i) labels[i] = (i / 9) % 5;
  const auto vars = net.params().vars();
  EXPECT_LT(testutil::grad_check([&] { return task_loss(net.log_probs(xs), labels); }, vars, 7).max_rel_error, 1e-3);
  for (auto form : {GanForm::kLog, GanForm::kLeastSquares}) {
    EXPECT_LT(testutil::grad_check([&] { return out_adversarial_loss(d.logits(net.probs(xt)), form); }, vars, 8)
                  .max_rel_error,
              1e-3);
  }
}

TEST(GradCheck, DiscriminatorSideLosses) {
  nn::SegNetwork<double> net(5, 3);
  nn::OutputDiscriminator<double> d(5, 4);
  net.params().set_trainable(false);
  auto ps = net.probs(nn::constant(random_images(1, 16, 9)));
  auto pt = net.probs(nn::constant(random_images(1, 16, 10)));
  for (auto form : {GanForm::kLog, GanForm::kLeastSquares}) {
    EXPECT_LT(testutil::grad_check([&] { return out_discriminator_loss(d.logits(ps), d.logits(pt), form); },
                                   d.params().vars(), 11)
                  .max_rel_error,
              1e-3);
  }
}

TEST(StopGradient, DiscriminatorStepLeavesFUntouched) {
  nn::SegNetwork<double> net(5, 3);
  nn::OutputDiscriminator<double> d(5, 4);
  auto ps = net.probs(nn::constant(random_images(1, 16, 9)));
  auto pt = net.probs(nn::constant(random_images(1, 16, 10)));
  nn::backward(out_discriminator_loss(d.logits(nn::detach(ps)), d.logits(nn::detach(pt)), GanForm::kLog));
  for (const auto& [name, v] : net.params().entries()) {
    for (double g : v->grad.span()) EXPECT_EQ(g, 0.0) << name;
  }
  bool any = false;
  for (const auto& [_, v] : d.params().entries()) {
    for (double g : v->grad.span()) any = any || g != 0.0;
  }
  EXPECT_TRUE(any);
}

TEST(Modes, NamesRoundTrip) {
  for (auto m : {AdaptMode::kNone, AdaptMode::kTraditionalRaw, AdaptMode::kTraditionalTranslated,
                 AdaptMode::kDomainWise, AdaptMode::kDomainWiseRaw}) {
    EXPECT_EQ(parse_adapt_mode(to_string(m)), m);
  }
  EXPECT_THROW(parse_adapt_mode("cyclic"), std::invalid_argument);
  EXPECT_EQ(parse_gan_form("ls"), GanForm::kLeastSquares);
  EXPECT_EQ(discriminator_count(AdaptMode::kNone, 3), 0);
  EXPECT_EQ(discriminator_count(AdaptMode::kTraditionalTranslated, 3), 1);
  EXPECT_EQ(discriminator_count(AdaptMode::kDomainWise, 3), 3);
}

TEST(Discriminators, DomainWiseHasKDisjointSets) {
  const int k = 3;
  OutputDiscriminators<float> disc(discriminator_count(AdaptMode::kDomainWise, k), 5, 1);
  ASSERT_EQ(disc.size(), k);
  std::set<const void*> storage;
  std::size_t total = 0;
  for (int i = 0; i < k; ++i) {
    for (const auto& [_, v] : disc[i].params().entries()) {
      storage.insert(v.get());
      ++total;
    }
  }
  EXPECT_EQ(storage.size(), total);
  EXPECT_NE(disc[0].params().entries()[0].second->value.vec(), disc[1].params().entries()[0].second->value.vec());
}

TEST(Train, ZeroOutWeightMatchesNoneTrajectory) {
  World w;
  auto run = [&](AdaptMode mode, double out_w) {
    nn::SegNetwork<float> net(5, 1);
    AdaptConfig cfg;
    cfg.mode = mode;
    cfg.iterations = 4;
    cfg.weights.out = out_w;
    cfg.seed = 3;
    const auto hist = train_adapt(net, w.data, cfg);
    return std::make_pair(hist, snapshot(net.params()));
  };
  const auto [none_hist, none_params] = run(AdaptMode::kNone, 0.01);
  const auto [dw_hist, dw_params] = run(AdaptMode::kDomainWise, 0.0);
  const auto [adv_hist, adv_params] = run(AdaptMode::kDomainWise, 0.01);
  for (std::size_t i = 0; i < none_hist.size(); ++i) EXPECT_EQ(none_hist[i].loss_task, dw_hist[i].loss_task);
  EXPECT_EQ(none_params, dw_params);
  EXPECT_NE(none_params, adv_params);
  EXPECT_TRUE(none_hist[0].loss_disc.empty());
  EXPECT_EQ(dw_hist[0].loss_disc.size(), 2u);
}

TEST(Train, NoneModeIsSupervisedOnTranslatedSource) {
  World w;
  // Raw source is unused by mode none: poisoning it must not matter.
  World poisoned;
  poisoned.data.raw_source.clear();
  auto run = [](const AdaptData& d) {
    nn::SegNetwork<float> net(5, 1);
    AdaptConfig cfg;
    cfg.mode = AdaptMode::kNone;
    cfg.iterations = 3;
    train_adapt(net, d, cfg);
    return snapshot(net.params());
  };
  EXPECT_EQ(run(w.data), run(poisoned.data));
}

TEST(Train, DeterministicAndCheckpoints) {
  World w;
  std::vector<int> seen;
  auto run = [&](bool record) {
    nn::SegNetwork<float> net(5, 1);
    AdaptConfig cfg;
    cfg.mode = AdaptMode::kTraditionalTranslated;
    cfg.iterations = 5;
    cfg.checkpoint_every = 2;
    train_adapt(net, w.data, cfg, {}, [&](int it, const nn::SegNetwork<float>&) {
      if (record) seen.push_back(it);
    });
    return snapshot(net.params());
  };
  EXPECT_EQ(run(true), run(false));
  EXPECT_EQ(seen, (std::vector<int>{2, 4, 5}));
}

TEST(Train, ValidatesInputs) {
  World w;
  nn::SegNetwork<float> net(5, 1);
  AdaptConfig cfg;
  cfg.iterations = 1;
  auto missing = w.data;
  missing.translated.pop_back();
  EXPECT_THROW(train_adapt(net, missing, cfg), std::invalid_argument);
  cfg.mode = AdaptMode::kTraditionalRaw;
  auto no_raw = w.data;
  no_raw.raw_source.clear();
  EXPECT_THROW(train_adapt(net, no_raw, cfg), std::invalid_argument);
  EXPECT_NO_THROW(train_adapt(net, missing, cfg));
}
