#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dha/nn/losses.hpp"

namespace dha::adaptation {

using nn::Var;

enum class GanForm { kLog, kLeastSquares };

/// The five weights of the combined objective.
struct LossWeights {
  double gan = 1.0;
  double sem = 10.0;
  double style = 10.0;
  double out = 0.01;
  double task = 1.0;

  void validate() const {
    for (double w : {gan, sem, style, out, task}) {
      if (!std::isfinite(w) || w < 0.0) {
        throw std::invalid_argument("loss weights must be finite and non-negative");
      }
    }
  }
  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

/// Per-latent-domain loss values.
struct LossComponents {
  double gan = 0.0;
  double sem = 0.0;
  double style = 0.0;
  double out = 0.0;
  double task = 0.0;
};

/// Weighted sum over domains of all five terms.
inline double total_loss(std::span<const LossComponents> per_domain, const LossWeights& w) {
  w.validate();
  double total = 0.0;
  for (const auto& c : per_domain) {
    total += w.gan * c.gan + w.sem * c.sem + w.style * c.style + w.out * c.out + w.task * c.task;
  }
  return total;
}

/// Pixel-mean cross-entropy of F's log-probabilities against source labels.
template <typename T>
Var<T> task_loss(const Var<T>& log_probs, std::span<const int> labels) {
  return nn::nll_loss(log_probs, labels);
}

/// Log-form value E[log D(F(x_S,j))] + E[log(1 - D(F(x_T,j)))]; translated source is label 1.
template <typename T>
Var<T> out_objective(const Var<T>& source_logits, const Var<T>& target_logits) {
  return nn::add(nn::mean_log_prob_real(nn::bounded(source_logits, "L_Out source logits")),
                 nn::mean_log_prob_fake(nn::bounded(target_logits, "L_Out target logits")));
}

/// Loss minimised by D_O,j.
template <typename T>
Var<T> out_discriminator_loss(const Var<T>& source_logits, const Var<T>& target_logits, GanForm form) {
  if (form == GanForm::kLog) return nn::scale(out_objective(source_logits, target_logits), T(-1));
  auto s = nn::bounded(source_logits, "L_Out source logits");
  auto t = nn::bounded(target_logits, "L_Out target logits");
  return nn::add(nn::mean_squared_to(s, T(1)), nn::mean_squared_to(t, T(0)));
}

/// Loss minimised by F: target predictions should be scored as translated source.
/// Only the target branch enters.
template <typename T>
Var<T> out_adversarial_loss(const Var<T>& target_logits, GanForm form) {
  auto t = nn::bounded(target_logits, "L_Out target logits");
  if (form == GanForm::kLog) return nn::scale(nn::mean_log_prob_real(t), T(-1));
  return nn::mean_squared_to(t, T(1));
}

}  // namespace dha::adaptation
