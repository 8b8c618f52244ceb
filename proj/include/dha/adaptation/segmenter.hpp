#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include "dha/adaptation/losses.hpp"
#include "dha/data/image.hpp"
#include "dha/nn/networks.hpp"
#include "dha/nn/optim.hpp"

namespace dha::adaptation {

template <typename T>
using SegNetwork = nn::SegNetwork<T>;

struct LabeledView {
  const data::Image* image = nullptr;
  const data::SegMask* mask = nullptr;
};

/// Per-pixel class probabilities [N,C,H,W] for a batch of images.
template <typename T>
nn::Tensor<T> seg_forward(const SegNetwork<T>& net, const std::vector<const data::Image*>& images) {
  return net.probs(nn::constant(data::to_tensor<T>(images)))->value;
}

template <typename T>
nn::Tensor<T> seg_forward(const SegNetwork<T>& net, const data::Image& image) {
  return seg_forward(net, std::vector<const data::Image*>{&image});
}

/// Arg-max labels for every image, evaluated in batches.
template <typename T>
std::vector<data::SegMask> predict(const SegNetwork<T>& net, const std::vector<const data::Image*>& images,
                                   int batch = 16) {
  std::vector<data::SegMask> out;
  out.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); i += batch) {
    const std::size_t end = std::min(images.size(), i + batch);
    std::vector<const data::Image*> chunk(images.begin() + i, images.begin() + end);
    const auto logits = net.logits(nn::constant(data::to_tensor<T>(chunk)))->value;
    const auto s = logits.shape();
    for (int n = 0; n < s.n; ++n) {
      std::vector<int> labels(s.plane());
      for (std::size_t p = 0; p < s.plane(); ++p) {
        int best = 0;
        for (int c = 1; c < s.c; ++c) {
          if (logits[(n * s.c + c) * s.plane() + p] > logits[(n * s.c + best) * s.plane() + p]) best = c;
        }
        labels[p] = best;
      }
      out.emplace_back(s.h, s.w, s.c, std::move(labels));
    }
  }
  return out;
}

inline std::vector<int> stack_labels(const std::vector<const data::SegMask*>& masks) {
  std::vector<int> out;
  for (const auto* m : masks) out.insert(out.end(), m->labels().begin(), m->labels().end());
  return out;
}

struct SupervisedOptions {
  int iterations = 1500;
  int batch = 4;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

/// Plain cross-entropy training on labelled images; returns the per-iteration loss.
template <typename T>
std::vector<double> train_supervised(SegNetwork<T>& net, const std::vector<LabeledView>& samples,
                                     const SupervisedOptions& opts,
                                     const std::function<void(int, double)>& on_iteration = {}) {
  if (samples.empty()) throw std::invalid_argument("train_supervised: no samples");
  std::mt19937_64 rng(opts.seed);
  std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);
  nn::Adam<T> adam(net.params().vars(), {opts.lr, 0.9, 0.99, 1e-8});
  std::vector<double> history;
  for (int it = 0; it < opts.iterations; ++it) {
    adam.set_lr(nn::poly_lr(opts.lr, it, opts.iterations));
    std::vector<const data::Image*> imgs;
    std::vector<const data::SegMask*> masks;
    for (int b = 0; b < opts.batch; ++b) {
      const auto& s = samples[pick(rng)];
      imgs.push_back(s.image);
      masks.push_back(s.mask);
    }
    const auto labels = stack_labels(masks);
    auto loss = task_loss(net.log_probs(nn::constant(data::to_tensor<T>(imgs))), labels);
    nn::require_finite(loss, "supervised task loss");
    nn::backward(loss);
    adam.step();
    history.push_back(static_cast<double>(loss->value[0]));
    if (on_iteration) on_iteration(it, history.back());
  }
  return history;
}

}  // namespace dha::adaptation
