#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "dha/adaptation/losses.hpp"
#include "dha/adaptation/segmenter.hpp"
#include "dha/nn/networks.hpp"
#include "dha/nn/optim.hpp"

namespace dha::adaptation {

/// none: task loss only. traditional_*: one D_O over pooled data. domain_wise*: one D_O per
/// latent domain. The *_raw variants train on untranslated source images.
enum class AdaptMode { kNone, kTraditionalRaw, kTraditionalTranslated, kDomainWise, kDomainWiseRaw };

inline std::string to_string(AdaptMode m) {
  switch (m) {
    case AdaptMode::kNone: return "none";
    case AdaptMode::kTraditionalRaw: return "traditional_raw";
    case AdaptMode::kTraditionalTranslated: return "traditional_translated";
    case AdaptMode::kDomainWise: return "domain_wise";
    case AdaptMode::kDomainWiseRaw: return "domain_wise_raw";
  }
  return "?";
}

inline AdaptMode parse_adapt_mode(const std::string& s) {
  for (auto m : {AdaptMode::kNone, AdaptMode::kTraditionalRaw, AdaptMode::kTraditionalTranslated,
                 AdaptMode::kDomainWise, AdaptMode::kDomainWiseRaw}) {
    if (to_string(m) == s) return m;
  }
  throw std::invalid_argument("unknown adapt mode '" + s +
                              "' (expected none, traditional_raw, traditional_translated, domain_wise, "
                              "domain_wise_raw)");
}

inline bool uses_translated_source(AdaptMode m) {
  return m == AdaptMode::kNone || m == AdaptMode::kTraditionalTranslated || m == AdaptMode::kDomainWise;
}

inline bool is_domain_wise(AdaptMode m) { return m == AdaptMode::kDomainWise || m == AdaptMode::kDomainWiseRaw; }

inline int discriminator_count(AdaptMode m, int k) {
  if (m == AdaptMode::kNone) return 0;
  return is_domain_wise(m) ? k : 1;
}

inline std::string to_string(GanForm f) { return f == GanForm::kLog ? "log" : "ls"; }

inline GanForm parse_gan_form(const std::string& s) {
  if (s == "log") return GanForm::kLog;
  if (s == "ls") return GanForm::kLeastSquares;
  throw std::invalid_argument("unknown GAN form '" + s + "' (expected log or ls)");
}

/// Everything the Adapt step reads. translated[j] holds every source image translated into
/// latent domain j, paired with its original mask; targets[j] is the j-th discovered partition.
struct AdaptData {
  std::vector<LabeledView> raw_source;
  std::vector<std::vector<LabeledView>> translated;
  std::vector<std::vector<const data::Image*>> targets;

  int k() const { return static_cast<int>(targets.size()); }
};

struct AdaptConfig {
  AdaptMode mode = AdaptMode::kDomainWise;
  GanForm form = GanForm::kLog;
  int iterations = 5000;
  double lr = 2.5e-4;
  double disc_lr = 1e-4;
  LossWeights weights;
  std::uint64_t seed = 0;
  int checkpoint_every = 500;
};

struct AdaptStep {
  int iteration = 0;
  double loss_task = 0.0;            // summed over the K per-domain steps
  std::vector<double> loss_out;      // F-side adversarial term, per domain
  std::vector<double> loss_disc;     // per discriminator
  double wall_time_s = 0.0;
};

template <typename T>
class OutputDiscriminators {
 public:
  OutputDiscriminators(int count, int num_classes, std::uint64_t seed) {
    for (int i = 0; i < count; ++i) nets_.push_back(std::make_unique<nn::OutputDiscriminator<T>>(num_classes, seed + 31 * i + 1));
  }
  int size() const { return static_cast<int>(nets_.size()); }
  nn::OutputDiscriminator<T>& operator[](int i) { return *nets_[i]; }
  const nn::OutputDiscriminator<T>& operator[](int i) const { return *nets_[i]; }

 private:
  std::vector<std::unique_ptr<nn::OutputDiscriminator<T>>> nets_;
};

inline void validate(const AdaptData& d, AdaptMode mode) {
  const int k = d.k();
  if (k < 1) throw std::invalid_argument("train_adapt: no target domains");
  for (int j = 0; j < k; ++j) {
    if (d.targets[j].empty()) {
      throw std::invalid_argument("train_adapt: target domain " + std::to_string(j + 1) + " is empty");
    }
  }
  if (uses_translated_source(mode)) {
    if (static_cast<int>(d.translated.size()) != k) {
      throw std::invalid_argument("train_adapt: mode " + to_string(mode) + " needs " + std::to_string(k) +
                                  " translated source sets, got " + std::to_string(d.translated.size()));
    }
    for (int j = 0; j < k; ++j) {
      if (d.translated[j].empty()) {
        throw std::invalid_argument("train_adapt: translated set " + std::to_string(j + 1) + " is empty");
      }
    }
  } else if (d.raw_source.empty()) {
    throw std::invalid_argument("train_adapt: mode " + to_string(mode) + " needs raw source images");
  }
}

/// Trains F in place. Each iteration runs, for every latent domain j in turn, one F step on
///   w_task * L_task(x_S,j) + w_out * L_adv(D(F(x_T,j)))
/// followed by one step of the responsible discriminator on (F(x_S,j), F(x_T,j)).
/// Traditional modes draw both streams from the pooled data and share one discriminator.
/// Source and target draws use separate generators, so a zero adversarial weight reproduces
/// mode none exactly.
template <typename T>
std::vector<AdaptStep> train_adapt(SegNetwork<T>& net, const AdaptData& data, const AdaptConfig& cfg,
                                   const std::function<void(const AdaptStep&)>& on_step = {},
                                   const std::function<void(int, const std::type_identity_t<SegNetwork<T>>&)>& on_checkpoint = {}) {
  cfg.weights.validate();
  validate(data, cfg.mode);
  if (cfg.iterations < 1) throw std::invalid_argument("train_adapt: iterations must be positive");
  const int k = data.k();
  const bool translated = uses_translated_source(cfg.mode);
  const bool pooled = cfg.mode == AdaptMode::kTraditionalRaw || cfg.mode == AdaptMode::kTraditionalTranslated;
  const bool adversarial = cfg.mode != AdaptMode::kNone;

  OutputDiscriminators<T> disc(discriminator_count(cfg.mode, k), net.num_classes(), cfg.seed * 7919 + 17);
  std::vector<nn::Adam<T>> opt_d;
  for (int i = 0; i < disc.size(); ++i) opt_d.emplace_back(disc[i].params().vars(), nn::AdamOptions{cfg.disc_lr, 0.9, 0.99, 1e-8});
  nn::Sgd<T> opt_f(net.params().vars(), {cfg.lr, 0.9, 5e-4});

  // Traditional modes see the compound target (and translated source) as one pool.
  std::vector<const data::Image*> target_pool;
  std::vector<LabeledView> source_pool;
  if (pooled) {
    for (const auto& t : data.targets) target_pool.insert(target_pool.end(), t.begin(), t.end());
    if (translated) {
      for (const auto& t : data.translated) source_pool.insert(source_pool.end(), t.begin(), t.end());
    }
  }

  std::mt19937_64 src_rng(cfg.seed * 2 + 1), tgt_rng(cfg.seed * 2 + 2);
  auto pick = [](std::mt19937_64& r, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(r); };
  auto draw_source = [&](int j) -> const LabeledView& {
    if (!translated) return data.raw_source[pick(src_rng, data.raw_source.size())];
    const auto& pool = pooled ? source_pool : data.translated[j];
    return pool[pick(src_rng, pool.size())];
  };
  auto draw_target = [&](int j) {
    const auto& pool = pooled ? target_pool : data.targets[j];
    return pool[pick(tgt_rng, pool.size())];
  };

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<AdaptStep> history;
  for (int it = 0; it < cfg.iterations; ++it) {
    opt_f.set_lr(nn::poly_lr(cfg.lr, it, cfg.iterations));
    for (auto& o : opt_d) o.set_lr(nn::poly_lr(cfg.disc_lr, it, cfg.iterations));
    AdaptStep step;
    step.iteration = it;
    step.loss_out.assign(k, 0.0);
    step.loss_disc.assign(disc.size(), 0.0);

    for (int j = 0; j < k; ++j) {
      const auto& s = draw_source(j);
      const data::Image* target = draw_target(j);
      const int di = is_domain_wise(cfg.mode) ? j : 0;

      // F step.
      auto src_log_probs = net.log_probs(nn::constant(data::to_tensor<T>(*s.image)));
      auto task = task_loss(src_log_probs, s.mask->labels());
      step.loss_task += static_cast<double>(task->value[0]);
      auto f_loss = nn::scale(task, T(cfg.weights.task));
      nn::Var<T> tgt_probs;
      if (adversarial) {
        tgt_probs = net.probs(nn::constant(data::to_tensor<T>(*target)));
        if (cfg.weights.out > 0.0) {
          auto& d = disc[di];
          d.params().set_trainable(false);
          auto adv = out_adversarial_loss(d.logits(tgt_probs), cfg.form);
          step.loss_out[j] = static_cast<double>(adv->value[0]);
          f_loss = nn::add(f_loss, nn::scale(adv, T(cfg.weights.out)));
          d.params().set_trainable(true);
        }
      }
      nn::require_finite(f_loss, "adapt F loss");
      nn::backward(f_loss);
      opt_f.step();

      // Discriminator step on the outputs F produced for this pair.
      if (adversarial) {
        auto& d = disc[di];
        auto d_loss = out_discriminator_loss(d.logits(nn::exp(nn::detach(src_log_probs))),
                                             d.logits(nn::detach(tgt_probs)), cfg.form);
        nn::require_finite(d_loss, "adapt discriminator loss");
        step.loss_disc[di] += static_cast<double>(d_loss->value[0]);
        nn::backward(d_loss);
        opt_d[di].step();
      }
    }
    step.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    history.push_back(step);
    if (on_step) on_step(step);
    const int done = it + 1;
    if (on_checkpoint && cfg.checkpoint_every > 0 && (done % cfg.checkpoint_every == 0 || done == cfg.iterations)) {
      on_checkpoint(done, net);
    }
  }
  return history;
}

}  // namespace dha::adaptation
