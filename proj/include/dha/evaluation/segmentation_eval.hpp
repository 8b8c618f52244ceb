#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "dha/adaptation/segmenter.hpp"
#include "dha/evaluation/domain_metrics.hpp"
#include "dha/evaluation/miou.hpp"

namespace dha::evaluation {

/// Labelled images of one evaluation style.
struct EvalSet {
  std::string split;
  std::string style;
  bool open = false;
  std::vector<const data::Image*> images;
  std::vector<const data::SegMask*> masks;
};

template <typename T>
MiouResult evaluate_set(const adaptation::SegNetwork<T>& net, const EvalSet& set) {
  if (set.images.empty()) throw std::invalid_argument("evaluate: style " + set.style + " has no images");
  if (set.images.size() != set.masks.size()) throw std::invalid_argument("evaluate: image/mask count mismatch");
  const auto preds = adaptation::predict(net, set.images);
  ConfusionMatrix cm(net.num_classes());
  for (std::size_t i = 0; i < preds.size(); ++i) cm.add(preds[i], *set.masks[i]);
  return miou_from_confusion(cm);
}

template <typename T>
std::vector<StyleEvaluation> evaluate_sets(const adaptation::SegNetwork<T>& net, const std::vector<EvalSet>& sets) {
  std::vector<StyleEvaluation> out;
  for (const auto& s : sets) out.push_back({s.split, s.style, evaluate_set(net, s), static_cast<long>(s.images.size())});
  return out;
}

inline DomainMetrics aggregate(const std::vector<StyleEvaluation>& evals, const std::vector<EvalSet>& sets) {
  std::vector<StyleMetric> styles;
  for (std::size_t i = 0; i < evals.size(); ++i) {
    styles.push_back({evals[i].style, sets[i].open, evals[i].result.miou, evals[i].num_images});
  }
  return aggregate_domains(styles);
}

}  // namespace dha::evaluation
