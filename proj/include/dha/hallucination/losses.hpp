#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "dha/nn/losses.hpp"

namespace dha::hallucination {

using nn::Var;

// Image-level adversarial loss. Real target images carry label 1, translated
// source images label 0; the generator uses the non-saturating objective.

/// -E[log D_I(x_T)] - E[log(1 - D_I(G(x_S, x_T)))]
template <typename T>
Var<T> gan_discriminator_loss(const Var<T>& real_logits, const Var<T>& fake_logits) {
  auto r = nn::bounded(real_logits, "L_GAN real logits");
  auto f = nn::bounded(fake_logits, "L_GAN fake logits");
  return nn::scale(nn::add(nn::mean_log_prob_real(r), nn::mean_log_prob_fake(f)), T(-1));
}

/// -E[log D_I(G(x_S, x_T))]
template <typename T>
Var<T> gan_generator_loss(const Var<T>& fake_logits) {
  return nn::scale(nn::mean_log_prob_real(nn::bounded(fake_logits, "L_GAN fake logits")), T(-1));
}

/// Pixel-mean cross-entropy of the frozen segmenter's prediction on the
/// translated image against the source label.
template <typename T>
Var<T> semantic_loss(const Var<T>& log_probs, std::span<const int> source_labels) {
  return nn::nll_loss(log_probs, source_labels);
}

/// Style-consistency objective for one latent domain j:
///   E[log D(x'_j, x''_j)] + sum_{l != j} E[log(1 - D(x_j, x_l))] + E[log(1 - D(x_j, G(x_S, x_j)))]
/// The style discriminator maximises it.
template <typename T>
Var<T> style_objective(const Var<T>& same_logits, const std::vector<Var<T>>& cross_logits,
                       const Var<T>& translated_logits) {
  auto total = nn::mean_log_prob_real(nn::bounded(same_logits, "L_Style same-pair logits"));
  for (const auto& c : cross_logits) {
    total = nn::add(total, nn::mean_log_prob_fake(nn::bounded(c, "L_Style cross-pair logits")));
  }
  return nn::add(total, nn::mean_log_prob_fake(nn::bounded(translated_logits, "L_Style translated logits")));
}

template <typename T>
Var<T> style_discriminator_loss(const Var<T>& same_logits, const std::vector<Var<T>>& cross_logits,
                                const Var<T>& translated_logits) {
  return nn::scale(style_objective(same_logits, cross_logits, translated_logits), T(-1));
}

/// Generator side: only the translated-pair term, non-saturating.
template <typename T>
Var<T> style_generator_loss(const Var<T>& translated_logits) {
  return nn::scale(nn::mean_log_prob_real(nn::bounded(translated_logits, "L_Style translated logits")), T(-1));
}

}  // namespace dha::hallucination
