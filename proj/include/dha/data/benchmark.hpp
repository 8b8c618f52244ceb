#pragma once

#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "dha/data/image.hpp"
#include "dha/data/manifest.hpp"
#include "dha/data/scene.hpp"
#include "dha/data/style.hpp"

namespace dha::data {

struct BenchmarkConfig {
  int num_source = 300;
  int per_style = 150;
  int num_open = 100;
  std::uint64_t master_seed = 0;
  SceneConfig scene;
  std::vector<StyleFamily> compound_styles{night_style(), rain_style(), cloudy_style()};
  StyleFamily open_style = sunset_style();
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Deterministic sub-seed for (master, stream, index).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index) {
  return splitmix64(splitmix64(master ^ splitmix64(stream)) + index);
}

inline std::string make_id(const char* prefix, int i) {
  std::ostringstream os;
  os << prefix << std::setw(5) << std::setfill('0') << i;
  return os.str();
}

/// Generates source, compound and open images under `out_dir` and writes
/// `out_dir/manifest.tsv`. Output is a pure function of the config.
inline DatasetManifest build_benchmark(const BenchmarkConfig& cfg,
                                       const std::filesystem::path& out_dir) {
  if (cfg.compound_styles.size() < 2) {
    throw std::invalid_argument("build_benchmark: a compound target needs at least 2 styles, got " +
                                std::to_string(cfg.compound_styles.size()));
  }
  if (cfg.num_source < 0 || cfg.per_style < 0 || cfg.num_open < 0) {
    throw std::invalid_argument("build_benchmark: negative image count");
  }
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "images");
  fs::create_directories(out_dir / "masks");

  DatasetManifest m{{}, out_dir};
  std::unordered_set<std::uint64_t> source_seeds;
  constexpr std::uint64_t kSourceStream = 1, kTargetStream = 2, kStyleStream = 3;

  auto emit = [&](const std::string& id, const Image& img, const SegMask& mask, Split split,
                  std::optional<int> style) {
    const std::string ip = "images/" + id + ".png";
    const std::string mp = "masks/" + id + ".png";
    save_image(img, out_dir / ip);
    save_mask(mask, out_dir / mp);
    m.entries.push_back({id, ip, mp, split, style});
  };

  for (int i = 0; i < cfg.num_source; ++i) {
    const auto seed = derive_seed(cfg.master_seed, kSourceStream, i);
    source_seeds.insert(seed);
    auto [img, mask] = generate_scene(seed, cfg.scene);
    emit(make_id("src_", i), img, mask, Split::kSource, std::nullopt);
  }

  // Target scene seeds come from a separate stream; skip any accidental collision
  // so no target image shares content with a source image.
  std::uint64_t target_index = 0;
  auto next_target_seed = [&]() {
    while (true) {
      const auto s = derive_seed(cfg.master_seed, kTargetStream, target_index++);
      if (!source_seeds.count(s)) return s;
    }
  };
  auto styled = [&](const StyleFamily& fam, int style_id, int i, Split split, const char* prefix,
                    int id_index) {
    const auto scene_seed = next_target_seed();
    auto [img, mask] = generate_scene(scene_seed, cfg.scene);
    const auto params = sample_style(
        fam, derive_seed(cfg.master_seed, kStyleStream, static_cast<std::uint64_t>(style_id) * 1000003 + i));
    emit(make_id(prefix, id_index), apply_style(img, params), mask, split, style_id);
  };

  const int k = static_cast<int>(cfg.compound_styles.size());
  int cid = 0;
  for (int i = 0; i < cfg.per_style; ++i) {
    // Interleave styles so the pool carries no ordering cue.
    for (int s = 0; s < k; ++s) styled(cfg.compound_styles[s], s, i, Split::kCompound, "cmp_", cid++);
  }
  for (int i = 0; i < cfg.num_open; ++i) styled(cfg.open_style, k, i, Split::kOpen, "opn_", i);

  write_manifest(m, out_dir / "manifest.tsv");
  return m;
}

struct LoadedSample {
  std::string image_id;
  Image image;
  SegMask mask;
  std::optional<int> true_style_id;
};

inline LoadedSample load_sample(const DatasetManifest& m, const ManifestEntry& e, int num_classes) {
  return {e.image_id, load_image(m.resolve(e.image_path)), load_mask(m.resolve(e.mask_path), num_classes),
          e.true_style_id};
}

inline std::vector<LoadedSample> load_all(const DatasetManifest& m, int num_classes = kNumClasses) {
  std::vector<LoadedSample> out;
  out.reserve(m.entries.size());
  for (const auto& e : m.entries) out.push_back(load_sample(m, e, num_classes));
  return out;
}

}  // namespace dha::data
