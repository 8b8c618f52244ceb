#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "dha/pipeline/stages.hpp"

namespace dha::pipeline {

/// One row of an ablation table. A cell without an adapt mode reports f_seg itself.
struct AblationCell {
  std::string name;
  RunConfig config;
  bool source_only = false;
};

inline std::vector<std::string> ablation_presets() { return {"framework_design", "k_sweep", "adapt_mode"}; }

inline std::vector<AblationCell> ablation_cells(const std::string& preset, const RunConfig& base) {
  using adaptation::AdaptMode;
  using adaptation::GanForm;
  auto cell = [&](std::string name, auto&& edit) {
    AblationCell c{std::move(name), base, false};
    edit(c.config);
    return c;
  };
  std::vector<AblationCell> cells;
  if (preset == "framework_design") {
    cells.push_back({"source_only", base, true});
    for (auto m : {AdaptMode::kTraditionalRaw, AdaptMode::kDomainWiseRaw, AdaptMode::kNone,
                   AdaptMode::kTraditionalTranslated, AdaptMode::kDomainWise}) {
      cells.push_back(cell(adaptation::to_string(m), [&](RunConfig& c) { c.adapt_mode = m; }));
    }
  } else if (preset == "k_sweep") {
    for (int k = 2; k <= 5; ++k) {
      cells.push_back(cell("k" + std::to_string(k), [&](RunConfig& c) {
        c.k = k;
        c.adapt_mode = AdaptMode::kNone;
      }));
    }
    cells.push_back(cell("no_style_loss", [&](RunConfig& c) {
      c.weights.style = 0.0;
      c.adapt_mode = AdaptMode::kNone;
    }));
  } else if (preset == "adapt_mode") {
    cells.push_back(cell("none", [&](RunConfig& c) { c.adapt_mode = AdaptMode::kNone; }));
    for (auto m : {AdaptMode::kTraditionalTranslated, AdaptMode::kDomainWise}) {
      for (auto f : {GanForm::kLog, GanForm::kLeastSquares}) {
        cells.push_back(cell(adaptation::to_string(m) + "_" + adaptation::to_string(f), [&](RunConfig& c) {
          c.adapt_mode = m;
          c.gan_form = f;
        }));
      }
    }
  } else {
    throw ConfigError("unknown ablation preset '" + preset + "' (expected framework_design, k_sweep or adapt_mode)");
  }
  return cells;
}

/// f_seg evaluated on the compound and open styles.
inline evaluation::DomainMetrics evaluate_source_only(const RunConfig& c) {
  const RunLayout layout{c.output_dir};
  const auto bench = load_benchmark(layout, c);
  require_stage(layout.hallucinate(), c, Stage::kHallucinate);
  adaptation::SegNetwork<float> fseg(data::kNumClasses, 0);
  load_stage_checkpoint(layout.hallucinate() / "fseg.ckpt", c, Stage::kHallucinate).get("", fseg.params());
  const auto sets = eval_sets(bench, c);
  return evaluation::aggregate(evaluation::evaluate_sets(fseg, sets), sets);
}

struct AblationRow {
  std::string cell;
  evaluation::DomainMetrics metrics;
};

/// Runs every cell of `preset` under `out`. Cells that share everything up to the
/// hallucination stage share one run directory, so those stages run once per group.
/// Writes `out/<preset>.csv`.
inline std::vector<AblationRow> cmd_ablate(const std::string& preset, const RunConfig& base,
                                           const std::filesystem::path& out, std::ostream& log = std::cout) {
  auto cells = ablation_cells(preset, base);
  std::vector<AblationRow> rows;
  for (auto& cell : cells) {
    cell.config.output_dir = (out / ("run_" + hex(stage_hash(cell.config, Stage::kHallucinate)))).string();
    cell.config.validate();
    log << "ablate " << preset << ": cell " << cell.name << " in " << cell.config.output_dir << '\n';
    const auto& c = cell.config;
    std::filesystem::create_directories(c.output_dir);
    save_config(c, std::filesystem::path(c.output_dir) / "config.txt");
    cmd_generate_data(c, log);
    cmd_discover(c, log);
    cmd_hallucinate(c, log);
    if (cell.source_only) {
      rows.push_back({cell.name, evaluate_source_only(c)});
    } else {
      cmd_adapt(c, log);
      rows.push_back({cell.name, cmd_evaluate(c, log).adapted});
    }
  }

  std::ofstream csv(out / (preset + ".csv"));
  if (!csv) throw std::runtime_error("cannot write " + (out / (preset + ".csv")).string());
  csv << "cell";
  for (const auto& s : rows.front().metrics.styles) csv << ',' << s.style;
  csv << ",C,C+O\n";
  for (const auto& r : rows) {
    csv << r.cell;
    for (const auto& s : r.metrics.styles) csv << ',' << evaluation::format_value(s.miou);
    csv << ',' << evaluation::format_value(r.metrics.compound) << ','
        << evaluation::format_value(r.metrics.compound_open) << '\n';
  }
  log << preset << " (mIoU %):\n";
  for (const auto& r : rows) print_metrics(log, r.cell, r.metrics);
  return rows;
}

}  // namespace dha::pipeline
