#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dha/io/checkpoint.hpp"
#include "dha/nn/conv.hpp"
#include "dha/nn/losses.hpp"
#include "dha/nn/networks.hpp"
#include "dha/nn/ops.hpp"
#include "dha/nn/optim.hpp"
#include "gradcheck.hpp"
#include "test_util.hpp"

using namespace dha::nn;
using testutil::grad_check;

namespace {

Tensor<double> random_tensor(Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<double> t(s);
  for (auto& v : t.vec()) v = u(rng);
  return t;
}

Var<double> param(Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  return leaf(random_tensor(s, seed, lo, hi), true);
}

// Weighted sum so every output element gets a distinct upstream gradient.
Var<double> probe(const Var<double>& x, std::uint64_t seed) {
  return sum(mul(x, constant(random_tensor(x->value.shape(), seed))));
}

constexpr double kTol = 1e-3;

}  // namespace

TEST(GradCheck, Conv2d) {
  auto x = param({2, 3, 7, 7}, 1);
  auto w = param({4, 3, 3, 3}, 2);
  auto b = param({1, 4, 1, 1}, 3);
  for (ConvGeometry g : {ConvGeometry{1, 1}, ConvGeometry{2, 1}}) {
    const auto r = grad_check([&] { return probe(conv2d(x, w, b, g), 9); }, {x, w, b}, 4, 20);
    EXPECT_LT(r.max_rel_error, kTol);
  }
}

TEST(GradCheck, PointwiseOps) {
  auto x = param({2, 3, 4, 4}, 5, 0.05, 0.95);
  auto y = param({2, 3, 4, 4}, 6);
  auto f = [&] {
    auto a = add(sigmoid(y), tanh(y));
    auto b = mul(softplus(y), exp(scale(y, 0.3)));
    auto c = add(logit(x), square(leaky_relu(y)));
    return probe(add(add(a, b), sub(c, add_scalar(y, 2.0))), 7);
  };
  EXPECT_LT(grad_check(f, {x, y}, 8, 20).max_rel_error, kTol);
}

TEST(GradCheck, InstanceNormAndAffine) {
  auto x = param({2, 3, 5, 5}, 10);
  auto sc = param({2, 3, 1, 1}, 11);
  auto sh = param({2, 3, 1, 1}, 12);
  auto f = [&] { return probe(channel_affine(instance_norm(x), sc, sh), 13); };
  EXPECT_LT(grad_check(f, {x, sc, sh}, 14, 20).max_rel_error, kTol);
}

TEST(GradCheck, ColorTransform) {
  auto x = param({2, 3, 4, 4}, 15, 0.0, 1.0);
  auto m = param({2, 12, 1, 1}, 16);
  auto f = [&] { return probe(color_transform(x, m), 17); };
  EXPECT_LT(grad_check(f, {x, m}, 18, 20).max_rel_error, kTol);
}

TEST(GradCheck, ResamplingAndConcat) {
  auto x = param({2, 2, 4, 4}, 19);
  auto y = param({2, 3, 8, 8}, 20);
  auto f = [&] {
    auto up = upsample_bilinear(x, 8, 8);
    auto cat = concat_channels(up, y);
    auto nearest = upsample_nearest(x, 2);
    return add(probe(cat, 21), add(probe(nearest, 22), probe(spatial_mean(slice_batch(y, 1, 1)), 23)));
  };
  EXPECT_LT(grad_check(f, {x, y}, 24, 20).max_rel_error, kTol);
}

TEST(GradCheck, LogSoftmaxNll) {
  auto x = param({2, 5, 3, 3}, 25, -3.0, 3.0);
  std::vector<int> labels(2 * 9);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 5);
  auto f = [&] { return nll_loss(log_softmax_channels(x), labels); };
  EXPECT_LT(grad_check(f, {x}, 26, 20).max_rel_error, kTol);
}

TEST(GradCheck, LogitBounds) {
  auto x = param({1, 1, 4, 4}, 27, -5.0, 5.0);
  auto f = [&] {
    return add(mean_log_prob_real(x), add(mean_log_prob_fake(x), mean_squared_to(x, 1.0)));
  };
  EXPECT_LT(grad_check(f, {x}, 28, 16).max_rel_error, kTol);
}

TEST(Ops, ColorTransformIdentityAndShape) {
  auto x = constant(random_tensor({1, 3, 4, 4}, 30, 0.0, 1.0));
  Tensor<double> m(Shape{1, 12, 1, 1});
  m[0] = m[4] = m[8] = 1.0;
  const auto y = color_transform(x, constant(m));
  for (std::size_t i = 0; i < y->value.size(); ++i) EXPECT_DOUBLE_EQ(y->value[i], x->value[i]);
  EXPECT_THROW(color_transform(x, constant(Tensor<double>(Shape{1, 9, 1, 1}))), std::invalid_argument);
}

TEST(Ops, LogSoftmaxNormalises) {
  auto x = constant(random_tensor({1, 5, 3, 3}, 31, -4.0, 4.0));
  const auto p = exp(log_softmax_channels(x));
  for (int i = 0; i < 9; ++i) {
    double s = 0.0;
    for (int c = 0; c < 5; ++c) s += p->value[c * 9 + i];
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Ops, BoundedRejectsNonFinite) {
  auto x = constant(Tensor<double>(Shape{1, 1, 1, 1}, std::nan("")));
  EXPECT_THROW(bounded(x, "test"), DivergenceError);
}

TEST(Optim, AdamMinimisesQuadratic) {
  auto w = leaf(Tensor<double>(Shape{1, 1, 1, 3}, std::vector<double>{3.0, -2.0, 1.0}), true);
  Adam<double> opt({w}, {0.05, 0.9, 0.99, 1e-8});
  for (int i = 0; i < 500; ++i) {
    backward(sum(square(w)));
    opt.step();
  }
  for (double v : w->value.span()) EXPECT_NEAR(v, 0.0, 1e-2);
}

TEST(Optim, SgdMomentumStep) {
  auto w = leaf(Tensor<double>(Shape{1, 1, 1, 1}, 1.0), true);
  Sgd<double> opt({w}, {0.1, 0.9, 0.0});
  backward(sum(square(w)));  // grad 2
  opt.step();
  EXPECT_NEAR(w->value[0], 1.0 - 0.1 * 2.0, 1e-12);
  backward(sum(square(w)));  // grad 1.6, buffer 0.9*2 + 1.6
  opt.step();
  EXPECT_NEAR(w->value[0], 0.8 - 0.1 * 3.4, 1e-12);
}

TEST(Optim, PolyDecay) {
  EXPECT_DOUBLE_EQ(poly_lr(1.0, 0, 100), 1.0);
  EXPECT_NEAR(poly_lr(1.0, 50, 100), std::pow(0.5, 0.9), 1e-12);
  EXPECT_DOUBLE_EQ(poly_lr(1.0, 100, 100), 0.0);
}

TEST(Checkpoint, RoundTrip) {
  const auto dir = testutil::scratch_dir();
  SegNetwork<float> a(5, 1), b(5, 2);
  dha::io::Checkpoint ck;
  ck.config_hash = 0xabcdef;
  ck.put("f.", a.params());
  dha::io::save_checkpoint(ck, dir / "a.ckpt");
  const auto loaded = dha::io::load_checkpoint(dir / "a.ckpt");
  EXPECT_EQ(loaded.config_hash, 0xabcdefu);
  loaded.get("f.", b.params());
  for (std::size_t i = 0; i < a.params().entries().size(); ++i) {
    EXPECT_EQ(a.params().entries()[i].second->value.vec(), b.params().entries()[i].second->value.vec());
  }
  SegNetwork<float> wrong(4, 1);
  EXPECT_THROW(loaded.get("f.", wrong.params()), std::runtime_error);
}

TEST(Checkpoint, RejectsForeignFile) {
  const auto dir = testutil::scratch_dir();
  std::ofstream(dir / "x.ckpt") << "not a checkpoint";
  EXPECT_THROW(dha::io::load_checkpoint(dir / "x.ckpt"), std::runtime_error);
}

TEST(Networks, GeneratorOutputInUnitRange) {
  Generator<float> g(8, 3);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Tensor<float> x(Shape{2, 3, 16, 16}), c(Shape{2, 8, 1, 1});
  for (auto& v : x.vec()) v = u(rng);
  for (auto& v : c.vec()) v = 3.0f * u(rng);
  const auto y = g.translate(constant(x), constant(c));
  EXPECT_EQ(y->value.shape(), x.shape());
  for (float v : y->value.span()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
  const auto y2 = g.translate(constant(x), constant(c));
  EXPECT_EQ(y->value.vec(), y2->value.vec());
}
