#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dha/evaluation/miou.hpp"

namespace dha::evaluation {

/// mIoU of one evaluation style (a compound style or the open style).
struct StyleMetric {
  std::string style;
  bool open = false;
  double miou = 0.0;
  long num_images = 0;
};

struct DomainMetrics {
  std::vector<StyleMetric> styles;
  double compound = 0.0;             // unweighted mean over compound styles
  double compound_open = 0.0;        // unweighted mean over all styles
  double compound_weighted = 0.0;    // weighted by image count
  double compound_open_weighted = 0.0;
};

/// Averages per-style mIoU into the C and C+O columns. Unweighted means are the primary
/// aggregates; the image-weighted variants need num_images on every style.
inline DomainMetrics aggregate_domains(const std::vector<StyleMetric>& styles) {
  if (styles.empty()) throw std::invalid_argument("aggregate_domains: no styles");
  DomainMetrics m;
  m.styles = styles;
  double c = 0.0, co = 0.0, cw = 0.0, cow = 0.0;
  long nc = 0, nco = 0, wc = 0, wco = 0;
  for (const auto& s : styles) {
    if (!std::isfinite(s.miou)) throw std::invalid_argument("aggregate_domains: style " + s.style + " has no mIoU");
    if (s.num_images < 0) throw std::invalid_argument("aggregate_domains: negative image count");
    co += s.miou;
    ++nco;
    cow += s.miou * s.num_images;
    wco += s.num_images;
    if (!s.open) {
      c += s.miou;
      ++nc;
      cw += s.miou * s.num_images;
      wc += s.num_images;
    }
  }
  if (nc == 0) throw std::invalid_argument("aggregate_domains: missing compound styles");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  m.compound = c / nc;
  m.compound_open = co / nco;
  m.compound_weighted = wc > 0 ? cw / wc : nan;
  m.compound_open_weighted = wco > 0 ? cow / wco : nan;
  return m;
}

/// Per-style evaluation result, kept with its per-class IoU for the metrics table.
struct StyleEvaluation {
  std::string split;
  std::string style;
  MiouResult result;
  long num_images = 0;
};

inline std::string format_value(double v) {
  if (!std::isfinite(v)) return "nan";
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

/// Columns: run_id, iteration, split, style, class, iou, miou. One row per class
/// (iou "nan" for classes absent from both prediction and truth).
inline void write_metrics_csv(const std::filesystem::path& path, const std::string& run_id, int iteration,
                              const std::vector<StyleEvaluation>& evals,
                              const std::vector<std::string>& class_names, bool append = false) {
  const bool header = !append || !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  if (header) out << "run_id,iteration,split,style,class,iou,miou\n";
  for (const auto& e : evals) {
    for (std::size_t c = 0; c < e.result.per_class_iou.size(); ++c) {
      const std::string name = c < class_names.size() ? class_names[c] : std::to_string(c);
      out << run_id << ',' << iteration << ',' << e.split << ',' << e.style << ',' << name << ','
          << format_value(e.result.per_class_iou[c]) << ',' << format_value(e.result.miou) << '\n';
    }
  }
}

/// Columns: run_id, style, miou, num_images; then the C / C+O rows (unweighted and weighted).
inline void write_domain_metrics_csv(const std::filesystem::path& path, const std::string& run_id,
                                     const DomainMetrics& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "run_id,style,miou,num_images\n";
  long total = 0, compound = 0;
  for (const auto& s : m.styles) {
    out << run_id << ',' << s.style << ',' << format_value(s.miou) << ',' << s.num_images << '\n';
    total += s.num_images;
    if (!s.open) compound += s.num_images;
  }
  out << run_id << ",C," << format_value(m.compound) << ',' << compound << '\n';
  out << run_id << ",C+O," << format_value(m.compound_open) << ',' << total << '\n';
  out << run_id << ",C_weighted," << format_value(m.compound_weighted) << ',' << compound << '\n';
  out << run_id << ",C+O_weighted," << format_value(m.compound_open_weighted) << ',' << total << '\n';
}

}  // namespace dha::evaluation
