#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "dha/adaptation/losses.hpp"
#include "dha/adaptation/segmenter.hpp"
#include "dha/discovery/style_code.hpp"
#include "dha/hallucination/losses.hpp"
#include "dha/nn/networks.hpp"
#include "dha/nn/optim.hpp"

namespace dha::hallucination {

template <typename T>
using Generator = nn::Generator<T>;

struct TargetDomain {
  std::vector<std::string> ids;
  std::vector<const data::Image*> images;
  std::vector<discovery::StyleCode> codes;

  std::size_t size() const { return images.size(); }
};

struct HallucinationData {
  std::vector<adaptation::LabeledView> source;
  std::vector<TargetDomain> domains;
};

struct HallucinationConfig {
  int iterations = 2000;
  double lr = 2e-4;
  double disc_lr = 1e-4;
  adaptation::LossWeights weights;
  std::uint64_t seed = 0;
};

struct HallucinationStep {
  int iteration = 0;
  double d_gan = 0.0;
  double d_style = 0.0;
  double g_gan = 0.0;
  double g_sem = 0.0;
  double g_style = 0.0;
  double g_total = 0.0;
};

/// Networks trained alongside the generator.
template <typename T>
struct HallucinationDiscriminators {
  nn::ImageDiscriminator<T> image;
  nn::StyleDiscriminator<T> style;

  explicit HallucinationDiscriminators(std::uint64_t seed)
      : image(seed * 2 + 101), style(seed * 2 + 102) {}
};

template <typename T>
nn::Tensor<T> codes_tensor(const std::vector<const discovery::StyleCode*>& codes) {
  const int dim = static_cast<int>(codes.front()->size());
  nn::Tensor<T> t(nn::Shape{static_cast<int>(codes.size()), dim, 1, 1});
  for (std::size_t n = 0; n < codes.size(); ++n) {
    for (int d = 0; d < dim; ++d) t[n * dim + d] = static_cast<T>(codes[n]->values[d]);
  }
  return t;
}

/// Per-dimension mean and population std of all target codes.
inline std::pair<std::vector<double>, std::vector<double>> code_statistics(
    const std::vector<TargetDomain>& domains) {
  std::size_t dim = 0, n = 0;
  for (const auto& d : domains) {
    if (!d.codes.empty()) dim = d.codes.front().size();
  }
  std::vector<double> mean(dim, 0.0), var(dim, 0.0);
  for (const auto& d : domains) {
    for (const auto& c : d.codes) {
      for (std::size_t i = 0; i < dim; ++i) mean[i] += c.values[i];
      ++n;
    }
  }
  for (double& m : mean) m /= std::max<std::size_t>(n, 1);
  for (const auto& d : domains) {
    for (const auto& c : d.codes) {
      for (std::size_t i = 0; i < dim; ++i) var[i] += (c.values[i] - mean[i]) * (c.values[i] - mean[i]);
    }
  }
  for (double& v : var) v = std::sqrt(v / std::max<std::size_t>(n, 1));
  return {mean, var};
}

/// Translates one source image into the style described by `exemplar`.
template <typename T>
data::Image translate(const Generator<T>& g, const data::Image& source, const discovery::StyleCode& exemplar) {
  if (exemplar.size() != static_cast<std::size_t>(g.style_dim())) {
    throw std::invalid_argument("translate: exemplar code width " + std::to_string(exemplar.size()) +
                                " does not match generator " + std::to_string(g.style_dim()));
  }
  auto out = g.translate(nn::constant(data::to_tensor<T>(source)), nn::constant(codes_tensor<T>({&exemplar})));
  return data::from_tensor(out->value);
}

template <typename T>
data::Image translate(const Generator<T>& g, const data::Image& source, const data::Image& exemplar,
                      const discovery::FeatureExtractor& encoder) {
  if (source.height() != exemplar.height() || source.width() != exemplar.width()) {
    throw std::invalid_argument("translate: source and exemplar sizes differ");
  }
  return translate(g, source, discovery::extract_style_code(exemplar, encoder));
}

/// Alternating training: one joint step of D_I and D_Sty on detached translations,
/// then one generator step on
///   sum_j [w_gan L_GAN^j + w_sem L_sem^j + w_style L_Style^j].
/// Each iteration draws one source image and a fresh exemplar per latent domain.
/// A zero style weight removes D_Sty from training entirely. Both learning rates
/// decay polynomially to zero over the run.
template <typename T>
std::vector<HallucinationStep> train_hallucination(
    Generator<T>& gen, HallucinationDiscriminators<T>& disc, const adaptation::SegNetwork<T>& frozen_seg,
    const HallucinationData& data, const HallucinationConfig& cfg,
    const std::function<void(const HallucinationStep&)>& on_step = {}) {
  cfg.weights.validate();
  const int k = static_cast<int>(data.domains.size());
  if (k < 1) throw std::invalid_argument("train_hallucination: no latent domains");
  if (data.source.empty()) throw std::invalid_argument("train_hallucination: no source images");
  for (int j = 0; j < k; ++j) {
    if (data.domains[j].size() < 2) {
      throw std::invalid_argument("train_hallucination: latent domain " + std::to_string(j + 1) +
                                  " needs at least 2 images");
    }
  }
  for (const auto& [name, p] : frozen_seg.params().entries()) {
    if (p->requires_grad) throw std::invalid_argument("train_hallucination: segmenter must be frozen (" + name + ")");
  }

  const bool use_style = cfg.weights.style > 0.0;
  nn::Adam<T> opt_g(gen.params().vars(), {cfg.lr, 0.0, 0.99, 1e-8});
  nn::Adam<T> opt_di(disc.image.params().vars(), {cfg.disc_lr, 0.0, 0.99, 1e-8});
  nn::Adam<T> opt_ds(disc.style.params().vars(), {cfg.disc_lr, 0.0, 0.99, 1e-8});

  std::mt19937_64 rng(cfg.seed);
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  auto img = [](const data::Image* p) { return nn::constant(data::to_tensor<T>(*p)); };

  std::vector<HallucinationStep> history;
  for (int it = 0; it < cfg.iterations; ++it) {
    const double lr = nn::poly_lr(cfg.lr, it, cfg.iterations);
    opt_g.set_lr(lr);
    const double disc_lr = nn::poly_lr(cfg.disc_lr, it, cfg.iterations);
    opt_di.set_lr(disc_lr);
    opt_ds.set_lr(disc_lr);
    std::vector<const data::Image*> src, real;
    std::vector<const data::SegMask*> masks;
    std::vector<const discovery::StyleCode*> codes;
    std::vector<const data::Image*> same_a, same_b, anchor;
    std::vector<std::vector<std::pair<const data::Image*, const data::Image*>>> cross(k);
    for (int j = 0; j < k; ++j) {
      const auto& dom = data.domains[j];
      const auto& s = data.source[pick(data.source.size())];
      src.push_back(s.image);
      masks.push_back(s.mask);
      codes.push_back(&dom.codes[pick(dom.size())]);
      real.push_back(dom.images[pick(dom.size())]);
      if (use_style) {
        const std::size_t a = pick(dom.size());
        std::size_t b = pick(dom.size() - 1);
        if (b >= a) ++b;
        same_a.push_back(dom.images[a]);
        same_b.push_back(dom.images[b]);
        anchor.push_back(dom.images[pick(dom.size())]);
        for (int l = 0; l < k; ++l) {
          if (l == j) continue;
          const auto& other = data.domains[l];
          cross[j].emplace_back(dom.images[pick(dom.size())], other.images[pick(other.size())]);
        }
      }
    }

    HallucinationStep step;
    step.iteration = it;
    auto fake = gen.translate(nn::constant(data::to_tensor<T>(src)), nn::constant(codes_tensor<T>(codes)));
    nn::require_finite(fake, "generator output");

    // Discriminator step.
    {
      auto fake_d = nn::detach(fake);
      auto d_loss = nn::scale(gan_discriminator_loss(disc.image.logits(nn::constant(data::to_tensor<T>(real))),
                                                     disc.image.logits(fake_d)),
                              T(k));
      step.d_gan = static_cast<double>(d_loss->value[0]);
      if (use_style) {
        auto same = disc.style.pair_logits(nn::constant(data::to_tensor<T>(same_a)),
                                           nn::constant(data::to_tensor<T>(same_b)));
        auto trans = disc.style.pair_logits(nn::constant(data::to_tensor<T>(anchor)), fake_d);
        nn::Var<T> style_total;
        for (int j = 0; j < k; ++j) {
          std::vector<nn::Var<T>> cross_logits;
          for (const auto& [a, b] : cross[j]) cross_logits.push_back(disc.style.pair_logits(img(a), img(b)));
          auto term = style_discriminator_loss(nn::slice_batch(same, j, 1), cross_logits,
                                               nn::slice_batch(trans, j, 1));
          style_total = style_total ? nn::add(style_total, term) : term;
        }
        step.d_style = static_cast<double>(style_total->value[0]);
        d_loss = nn::add(d_loss, style_total);
      }
      nn::require_finite(d_loss, "discriminator loss");
      nn::backward(d_loss);
      opt_di.step();
      if (use_style) opt_ds.step();
    }

    // Generator step; discriminators are held fixed.
    {
      disc.image.params().set_trainable(false);
      disc.style.params().set_trainable(false);
      const auto labels = adaptation::stack_labels(masks);
      auto g_gan = nn::scale(gan_generator_loss(disc.image.logits(fake)), T(k));
      auto g_sem = nn::scale(semantic_loss(frozen_seg.log_probs(fake), labels), T(k));
      auto g_loss = nn::add(nn::scale(g_gan, T(cfg.weights.gan)), nn::scale(g_sem, T(cfg.weights.sem)));
      step.g_gan = static_cast<double>(g_gan->value[0]);
      step.g_sem = static_cast<double>(g_sem->value[0]);
      if (use_style) {
        auto trans = disc.style.pair_logits(nn::constant(data::to_tensor<T>(anchor)), fake);
        auto g_style = nn::scale(style_generator_loss(trans), T(k));
        step.g_style = static_cast<double>(g_style->value[0]);
        g_loss = nn::add(g_loss, nn::scale(g_style, T(cfg.weights.style)));
      }
      step.g_total = static_cast<double>(g_loss->value[0]);
      if (!std::isfinite(step.g_total)) {
        throw nn::DivergenceError("hallucination: non-finite generator loss at iteration " + std::to_string(it));
      }
      nn::backward(g_loss);
      opt_g.step();
      disc.image.params().set_trainable(true);
      disc.style.params().set_trainable(true);
    }
    history.push_back(step);
    if (on_step) on_step(step);
  }
  return history;
}

}  // namespace dha::hallucination
