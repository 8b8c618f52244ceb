#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <stdexcept>
#include <string>
#include <vector>

#include "dha/adaptation/segmenter.hpp"
#include "dha/data/manifest.hpp"

namespace dha::evaluation {

struct FeatureRow {
  std::string image_id;
  std::string split;
  std::string style;  // true style id, empty when unknown
  std::vector<double> values;
};

/// Spatial mean of the chosen layer for every image. Only "penultimate" (the input to
/// the class head) is exposed.
template <typename T>
std::vector<FeatureRow> export_features(const adaptation::SegNetwork<T>& net, const data::DatasetManifest& manifest,
                                        const std::vector<const data::Image*>& images,
                                        const std::string& layer = "penultimate") {
  if (layer != "penultimate") throw std::invalid_argument("export_features: unknown layer '" + layer + "'");
  if (images.size() != manifest.entries.size()) throw std::invalid_argument("export_features: image count mismatch");
  std::vector<FeatureRow> rows;
  constexpr std::size_t kBatch = 16;
  for (std::size_t i = 0; i < images.size(); i += kBatch) {
    const std::size_t end = std::min(images.size(), i + kBatch);
    std::vector<const data::Image*> chunk(images.begin() + i, images.begin() + end);
    const auto f = nn::spatial_mean(net.features(nn::constant(data::to_tensor<T>(chunk))))->value;
    const int width = f.shape().c;
    for (std::size_t n = 0; n < chunk.size(); ++n) {
      const auto& e = manifest.entries[i + n];
      FeatureRow r{e.image_id, data::to_string(e.split), e.true_style_id ? std::to_string(*e.true_style_id) : "", {}};
      for (int c = 0; c < width; ++c) r.values.push_back(static_cast<double>(f[n * width + c]));
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

/// First line "width W"; then image_id, split, style (tab-separated) and the space-separated values.
inline void write_features(const std::filesystem::path& path, const std::vector<FeatureRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  const std::size_t width = rows.empty() ? 0 : rows.front().values.size();
  out << "width " << width << '\n' << std::setprecision(9);
  for (const auto& r : rows) {
    if (r.values.size() != width) throw std::logic_error("write_features: ragged rows");
    out << r.image_id << '\t' << r.split << '\t' << r.style << '\t';
    for (std::size_t i = 0; i < r.values.size(); ++i) out << (i ? " " : "") << r.values[i];
    out << '\n';
  }
}

}  // namespace dha::evaluation
