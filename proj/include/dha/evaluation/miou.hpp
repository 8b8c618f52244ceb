#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dha/data/image.hpp"

namespace dha::evaluation {

/// C x C pixel counts; rows are ground truth, columns prediction.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes)
      : num_classes_(num_classes), counts_(static_cast<std::size_t>(num_classes) * num_classes, 0) {
    if (num_classes <= 0) throw std::invalid_argument("ConfusionMatrix: num_classes must be positive");
  }

  void add(std::span<const int> prediction, std::span<const int> truth) {
    if (prediction.size() != truth.size()) {
      throw std::invalid_argument("ConfusionMatrix: prediction has " + std::to_string(prediction.size()) +
                                  " pixels, ground truth " + std::to_string(truth.size()));
    }
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const int g = truth[i], p = prediction[i];
      if (g < 0 || g >= num_classes_ || p < 0 || p >= num_classes_) {
        throw std::out_of_range("ConfusionMatrix: label outside [0," + std::to_string(num_classes_) + ")");
      }
      ++counts_[static_cast<std::size_t>(g) * num_classes_ + p];
    }
  }

  void add(const data::SegMask& prediction, const data::SegMask& truth) {
    if (prediction.height() != truth.height() || prediction.width() != truth.width()) {
      throw std::invalid_argument("ConfusionMatrix: mask shapes differ");
    }
    add(prediction.labels(), truth.labels());
  }

  void merge(const ConfusionMatrix& other) {
    if (other.num_classes_ != num_classes_) throw std::invalid_argument("ConfusionMatrix: class count differs");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  }

  std::int64_t at(int truth, int prediction) const {
    return counts_[static_cast<std::size_t>(truth) * num_classes_ + prediction];
  }
  std::int64_t total() const {
    std::int64_t t = 0;
    for (auto c : counts_) t += c;
    return t;
  }
  int num_classes() const { return num_classes_; }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  int num_classes_;
  std::vector<std::int64_t> counts_;
};

struct MiouResult {
  std::vector<double> per_class_iou;  // NaN where the class is absent from both
  std::vector<bool> present;
  double miou = 0.0;
};

/// IoU_c = TP / (TP + FP + FN), averaged over classes seen in prediction or truth.
inline MiouResult miou_from_confusion(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw std::invalid_argument("mIoU of an empty evaluation set");
  const int c_n = cm.num_classes();
  MiouResult r;
  r.per_class_iou.assign(c_n, std::numeric_limits<double>::quiet_NaN());
  r.present.assign(c_n, false);
  double acc = 0.0;
  int used = 0;
  for (int c = 0; c < c_n; ++c) {
    std::int64_t tp = cm.at(c, c), fp = 0, fn = 0;
    for (int o = 0; o < c_n; ++o) {
      if (o == c) continue;
      fp += cm.at(o, c);
      fn += cm.at(c, o);
    }
    const std::int64_t denom = tp + fp + fn;
    if (denom == 0) continue;
    r.present[c] = true;
    r.per_class_iou[c] = static_cast<double>(tp) / static_cast<double>(denom);
    acc += r.per_class_iou[c];
    ++used;
  }
  r.miou = acc / used;
  return r;
}

/// Dataset-level mIoU: confusion is accumulated over all pairs before dividing.
inline MiouResult compute_miou(const std::vector<data::SegMask>& predictions,
                               const std::vector<data::SegMask>& truths, int num_classes) {
  if (predictions.empty()) throw std::invalid_argument("compute_miou: empty input set");
  if (predictions.size() != truths.size()) throw std::invalid_argument("compute_miou: count mismatch");
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < predictions.size(); ++i) cm.add(predictions[i], truths[i]);
  return miou_from_confusion(cm);
}

}  // namespace dha::evaluation
