#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "dha/data/manifest.hpp"
#include "dha/hallucination/trainer.hpp"

namespace dha::hallucination {

/// One translated source image. `domain` is 0-based in memory, 1-based on disk.
struct TranslatedEntry {
  std::string source_image_id;
  int domain = 0;
  std::string exemplar_image_id;
  std::string output_path;

  friend bool operator==(const TranslatedEntry&, const TranslatedEntry&) = default;
};

struct TranslatedManifest {
  std::vector<TranslatedEntry> entries;
  std::filesystem::path root;

  friend bool operator==(const TranslatedManifest& a, const TranslatedManifest& b) { return a.entries == b.entries; }

  std::filesystem::path resolve(const std::string& p) const {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : root / path;
  }

  /// Entries for latent domain j, in source order.
  std::vector<const TranslatedEntry*> for_domain(int j) const {
    std::vector<const TranslatedEntry*> out;
    for (const auto& e : entries) {
      if (e.domain == j) out.push_back(&e);
    }
    return out;
  }
};

inline void write_translated_manifest(const TranslatedManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (const auto& e : m.entries) {
    out << e.source_image_id << '\t' << e.domain + 1 << '\t' << e.exemplar_image_id << '\t' << e.output_path << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

inline TranslatedManifest read_translated_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open translated manifest " + path.string());
  TranslatedManifest m{{}, path.parent_path()};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = data::detail::split_tabs(line);
    if (f.size() != 4) {
      throw data::ParseError(path.string(), lineno, "expected 4 tab-separated fields, got " + std::to_string(f.size()));
    }
    int d = 0;
    try {
      std::size_t used = 0;
      d = std::stoi(f[1], &used);
      if (used != f[1].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw data::ParseError(path.string(), lineno, "domain '" + f[1] + "' is not an integer");
    }
    if (d < 1) throw data::ParseError(path.string(), lineno, "domain must be >= 1");
    m.entries.push_back({f[0], d - 1, f[2], f[3]});
  }
  return m;
}

/// Chooses an exemplar for every (source image, latent domain) pair: K * N_S entries,
/// source-major. Exemplars are drawn uniformly from the domain.
inline std::vector<TranslatedEntry> plan_translations(const std::vector<std::string>& source_ids,
                                                      const std::vector<TargetDomain>& domains, std::uint64_t seed) {
  for (std::size_t j = 0; j < domains.size(); ++j) {
    if (domains[j].ids.empty() || domains[j].ids.size() != domains[j].size() ||
        domains[j].codes.size() != domains[j].size()) {
      throw std::invalid_argument("plan_translations: latent domain " + std::to_string(j + 1) +
                                  " needs matching ids, images and codes");
    }
  }
  std::mt19937_64 rng(seed);
  std::vector<TranslatedEntry> out;
  out.reserve(source_ids.size() * domains.size());
  for (const auto& sid : source_ids) {
    for (std::size_t j = 0; j < domains.size(); ++j) {
      const auto pick = std::uniform_int_distribution<std::size_t>(0, domains[j].size() - 1)(rng);
      out.push_back({sid, static_cast<int>(j), domains[j].ids[pick], "images/" + sid + "_d" + std::to_string(j + 1) + ".png"});
    }
  }
  return out;
}

/// Translates every source image into every latent domain, writing the PNGs and
/// `out_dir/translated.tsv`. No masks are written: translated images keep their source labels.
template <typename T>
TranslatedManifest translate_dataset(const Generator<T>& gen, const std::vector<std::string>& source_ids,
                                     const std::vector<const data::Image*>& source_images,
                                     const std::vector<TargetDomain>& domains, const std::filesystem::path& out_dir,
                                     std::uint64_t seed) {
  if (source_ids.size() != source_images.size()) throw std::invalid_argument("translate_dataset: id/image count mismatch");
  std::filesystem::create_directories(out_dir / "images");
  TranslatedManifest m{plan_translations(source_ids, domains, seed), out_dir};
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    const auto& e = m.entries[i];
    const auto& dom = domains[e.domain];
    std::size_t ex = 0;
    while (dom.ids[ex] != e.exemplar_image_id) ++ex;
    const auto img = translate(gen, *source_images[i / domains.size()], dom.codes[ex]);
    data::save_image(img, m.resolve(e.output_path));
  }
  write_translated_manifest(m, out_dir / "translated.tsv");
  return m;
}

}  // namespace dha::hallucination
