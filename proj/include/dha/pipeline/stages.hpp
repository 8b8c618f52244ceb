#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dha/adaptation/trainer.hpp"
#include "dha/data/benchmark.hpp"
#include "dha/discovery/assignment.hpp"
#include "dha/discovery/clustering.hpp"
#include "dha/discovery/style_code.hpp"
#include "dha/evaluation/alignment.hpp"
#include "dha/evaluation/clustering_quality.hpp"
#include "dha/evaluation/features.hpp"
#include "dha/evaluation/segmentation_eval.hpp"
#include "dha/hallucination/translate.hpp"
#include "dha/io/checkpoint.hpp"
#include "dha/pipeline/config.hpp"

namespace dha::pipeline {

namespace fs = std::filesystem;

enum class Stage { kGenerate, kDiscover, kHallucinate, kAdapt, kEvaluate };

inline std::string to_string(Stage s) {
  switch (s) {
    case Stage::kGenerate: return "generate_data";
    case Stage::kDiscover: return "discover";
    case Stage::kHallucinate: return "hallucinate";
    case Stage::kAdapt: return "adapt";
    case Stage::kEvaluate: return "evaluate";
  }
  return "?";
}

/// A stage is missing its inputs, or its inputs came from another configuration.
class StageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

/// Hash of the config keys a stage (and everything upstream of it) depends on, so
/// downstream-only changes leave upstream outputs reusable.
inline std::uint64_t stage_hash(const RunConfig& c, Stage stage) {
  static const std::vector<std::pair<Stage, std::vector<std::string>>> kKeys = {
      {Stage::kGenerate,
       {"master_seed", "num_source", "per_style", "num_open", "image_size", "compound_styles", "open_style"}},
      {Stage::kDiscover, {"k", "k_min", "k_max"}},
      {Stage::kHallucinate, {"lambda_gan", "lambda_sem", "lambda_style", "seg_iterations", "hallucinate_iterations"}},
      {Stage::kAdapt,
       {"lambda_out", "lambda_task", "scheme", "gan_form", "adapt_mode", "short_iterations", "long_iterations",
        "checkpoint_every"}},
  };
  const Stage upto = stage == Stage::kEvaluate ? Stage::kAdapt : stage;
  std::set<std::string> keys;
  for (const auto& [s, ks] : kKeys) {
    if (static_cast<int>(s) <= static_cast<int>(upto)) keys.insert(ks.begin(), ks.end());
  }
  std::istringstream in(serialize(c));
  std::string line, picked;
  while (std::getline(in, line)) {
    if (keys.count(line.substr(0, line.find('=')))) picked += line + '\n';
  }
  return fnv1a(to_string(upto) + '\n' + picked);
}

/// Output directories of one run.
struct RunLayout {
  fs::path root;
  fs::path data() const { return root / "data"; }
  fs::path discover() const { return root / "discover"; }
  fs::path hallucinate() const { return root / "hallucinate"; }
  fs::path adapt(const RunConfig& c) const {
    return root / ("adapt_" + adaptation::to_string(c.adapt_mode) + "_" + adaptation::to_string(c.effective_gan_form()));
  }
  fs::path evaluate(const RunConfig& c) const { return adapt(c) / "eval"; }
};

struct StageRecord {
  std::string stage;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  double wall_time_s = 0.0;
};

inline fs::path record_path(const fs::path& dir) { return dir / "stage.done"; }

inline void write_record(const fs::path& dir, const StageRecord& r) {
  std::ofstream out(record_path(dir));
  if (!out) throw std::runtime_error("cannot write " + record_path(dir).string());
  out << "stage=" << r.stage << "\nconfig_hash=" << hex(r.config_hash) << "\nseed=" << r.seed
      << "\nwall_time_s=" << r.wall_time_s << '\n';
}

inline std::optional<StageRecord> read_record(const fs::path& dir) {
  std::ifstream in(record_path(dir));
  if (!in) return std::nullopt;
  StageRecord r;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const auto key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "stage") r.stage = value;
    else if (key == "config_hash") r.config_hash = std::stoull(value, nullptr, 16);
    else if (key == "seed") r.seed = std::stoull(value);
    else if (key == "wall_time_s") r.wall_time_s = std::stod(value);
  }
  return r;
}

/// Throws unless `dir` holds a completed stage produced by this configuration.
inline void require_stage(const fs::path& dir, const RunConfig& c, Stage stage) {
  const auto rec = read_record(dir);
  if (!rec) {
    throw StageError("stage " + to_string(stage) + " has not completed: missing " + record_path(dir).string() +
                     " (run '" + to_string(stage) + "' first)");
  }
  if (rec->config_hash != stage_hash(c, stage)) {
    throw StageError(record_path(dir).string() + " was produced by a different configuration (hash " +
                     hex(rec->config_hash) + ", expected " + hex(stage_hash(c, stage)) + ")");
  }
}

inline void require_file(const fs::path& p) {
  if (!fs::exists(p)) throw StageError("missing required file " + p.string());
}

/// True when the stage already completed under this configuration (nothing to do);
/// false when it still has to run. A record from another configuration is an error.
inline bool already_done(const fs::path& dir, const RunConfig& c, Stage stage, std::ostream& log) {
  const auto rec = read_record(dir);
  if (!rec) return false;
  if (rec->config_hash != stage_hash(c, stage)) {
    throw StageError(dir.string() + " holds " + to_string(stage) + " outputs from a different configuration (hash " +
                     hex(rec->config_hash) + ", expected " + hex(stage_hash(c, stage)) +
                     "); use another --out or remove the directory");
  }
  log << to_string(stage) << ": up to date in " << dir.string() << '\n';
  return true;
}

/// Seeds for each randomised component, all derived from master_seed.
namespace seeds {
inline std::uint64_t of(const RunConfig& c, std::uint64_t stream) { return data::derive_seed(c.master_seed, stream, 0); }
inline constexpr std::uint64_t kKMeans = 10, kSegInit = 11, kSegSampler = 12, kGenerator = 13, kHalDisc = 14,
                               kHalSampler = 15, kExemplars = 16, kAdapt = 17, kAdaptInit = 18;
}  // namespace seeds

// ----- loading helpers -----

/// Everything read from the benchmark directory.
struct Benchmark {
  data::DatasetManifest manifest;
  std::vector<data::LoadedSample> samples;
  std::map<std::string, std::size_t> index;

  const data::LoadedSample& get(const std::string& id) const {
    const auto it = index.find(id);
    if (it == index.end()) throw StageError("image id " + id + " not found in the benchmark manifest");
    return samples[it->second];
  }
  std::vector<const data::LoadedSample*> split(data::Split s) const {
    std::vector<const data::LoadedSample*> out;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (manifest.entries[i].split == s) out.push_back(&samples[i]);
    }
    return out;
  }
};

inline Benchmark load_benchmark(const RunLayout& layout, const RunConfig& c) {
  require_stage(layout.data(), c, Stage::kGenerate);
  const auto path = layout.data() / "manifest.tsv";
  require_file(path);
  Benchmark b;
  b.manifest = data::read_manifest(path);
  b.samples = data::load_all(b.manifest);
  for (std::size_t i = 0; i < b.samples.size(); ++i) b.index[b.samples[i].image_id] = i;
  return b;
}

inline discovery::DomainAssignment load_assignment(const RunLayout& layout, const RunConfig& c) {
  require_stage(layout.discover(), c, Stage::kDiscover);
  require_file(layout.discover() / "assignment.tsv");
  require_file(layout.discover() / "centroids.txt");
  return discovery::read_assignment(layout.discover() / "assignment.tsv", layout.discover() / "centroids.txt");
}

/// Loads a checkpoint and checks it was written by this configuration's `stage`.
inline io::Checkpoint load_stage_checkpoint(const fs::path& path, const RunConfig& c, Stage stage) {
  require_file(path);
  auto ck = io::load_checkpoint(path);
  if (ck.config_hash != stage_hash(c, stage)) {
    throw StageError(path.string() + " carries config hash " + hex(ck.config_hash) + " but this run expects " +
                     hex(stage_hash(c, stage)) + "; refusing to mix outputs of different configurations");
  }
  return ck;
}

inline std::vector<hallucination::TargetDomain> target_domains(const Benchmark& b,
                                                               const discovery::DomainAssignment& a) {
  std::vector<hallucination::TargetDomain> doms(a.k());
  for (std::size_t i = 0; i < a.image_ids.size(); ++i) {
    auto& d = doms[a.domains[i]];
    d.ids.push_back(a.image_ids[i]);
    d.images.push_back(&b.get(a.image_ids[i]).image);
  }
  discovery::StyleEncoder encoder;
  for (auto& d : doms) d.codes = discovery::extract_style_codes(d.images, encoder);
  return doms;
}

inline std::vector<adaptation::LabeledView> labeled(const std::vector<const data::LoadedSample*>& samples) {
  std::vector<adaptation::LabeledView> out;
  for (const auto* s : samples) out.push_back({&s->image, &s->mask});
  return out;
}

// ----- stages -----

struct GenerateResult {
  std::size_t total = 0, source = 0, compound = 0, open = 0;
  bool skipped = false;
};

inline GenerateResult cmd_generate_data(const RunConfig& c, std::ostream& log = std::cout) {
  c.validate();
  const RunLayout layout{c.output_dir};
  GenerateResult r;
  const auto t0 = std::chrono::steady_clock::now();
  data::DatasetManifest m;
  if (already_done(layout.data(), c, Stage::kGenerate, log)) {
    m = data::read_manifest(layout.data() / "manifest.tsv");
    r.skipped = true;
  } else {
    m = data::build_benchmark(c.benchmark(), layout.data());
    write_record(layout.data(), {to_string(Stage::kGenerate), stage_hash(c, Stage::kGenerate), c.master_seed,
                                 std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
  }
  r.total = m.entries.size();
  r.source = m.count(data::Split::kSource);
  r.compound = m.count(data::Split::kCompound);
  r.open = m.count(data::Split::kOpen);
  log << "generate_data: " << r.total << " entries (" << r.source << " source, " << r.compound << " compound, "
      << r.open << " open)\n";
  return r;
}

struct DiscoverResult {
  int k = 0;
  std::vector<std::pair<int, double>> silhouette;
  std::optional<double> ari;
  std::vector<int> sizes;
};

inline DiscoverResult cmd_discover(const RunConfig& c, std::ostream& log = std::cout) {
  c.validate();
  const RunLayout layout{c.output_dir};
  const auto t0 = std::chrono::steady_clock::now();
  const auto bench = load_benchmark(layout, c);
  DiscoverResult r;
  if (already_done(layout.discover(), c, Stage::kDiscover, log)) {
    const auto a = load_assignment(layout, c);
    r.k = a.k();
    r.sizes = a.sizes();
    return r;
  }
  fs::create_directories(layout.discover());
  // Discovery never sees style labels.
  const auto compound = data::strip_style_labels(bench.manifest.filter(data::Split::kCompound));
  std::vector<const data::Image*> images;
  std::vector<std::string> ids;
  for (const auto& e : compound.entries) {
    ids.push_back(e.image_id);
    images.push_back(&bench.get(e.image_id).image);
  }
  const auto points = discovery::to_points(discovery::extract_style_codes(images, discovery::StyleEncoder{}));
  const auto seed = seeds::of(c, seeds::kKMeans);
  if (c.k) {
    r.k = *c.k;
  } else {
    const int kmax = std::min<int>(c.k_max, static_cast<int>(points.size()) - 1);
    const auto sel = discovery::select_k(points, c.k_min, kmax, seed);
    r.k = sel.k;
    r.silhouette = sel.scores;
    std::ofstream out(layout.discover() / "silhouette.csv");
    out << "k,silhouette\n" << std::setprecision(10);
    for (const auto& [k, s] : sel.scores) out << k << ',' << s << '\n';
  }
  const auto km = discovery::kmeans(points, r.k, seed);
  const auto assignment = discovery::make_assignment(ids, km);
  discovery::write_assignment(assignment, layout.discover() / "assignment.tsv");
  discovery::write_centroids(assignment.centroids, layout.discover() / "centroids.txt");
  const auto parts = discovery::partition_manifest(compound, assignment);
  for (std::size_t j = 0; j < parts.size(); ++j) {
    data::write_manifest(parts[j], layout.discover() / ("domain_" + std::to_string(j + 1) + ".tsv"));
  }
  r.sizes = assignment.sizes();

  std::vector<int> truth;
  for (const auto& id : ids) {
    const auto* e = bench.manifest.find(id);
    if (!e->true_style_id) break;
    truth.push_back(*e->true_style_id);
  }
  std::ofstream summary(layout.discover() / "discover.txt");
  summary << "k=" << r.k << '\n';
  if (truth.size() == ids.size()) {
    r.ari = evaluation::adjusted_rand_index(assignment.domains, truth);
    summary << "ari=" << std::setprecision(10) << *r.ari << '\n';
  }
  write_record(layout.discover(), {to_string(Stage::kDiscover), stage_hash(c, Stage::kDiscover), seed,
                                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
  log << "discover: K=" << r.k << (c.k ? " (fixed)" : " (silhouette)");
  for (std::size_t j = 0; j < r.sizes.size(); ++j) log << (j ? ", " : "  sizes ") << r.sizes[j];
  if (r.ari) log << "  ARI=" << *r.ari;
  log << '\n';
  return r;
}

inline void save_generator(const nn::Generator<float>& g, std::uint64_t hash, const fs::path& path) {
  io::Checkpoint ck;
  ck.config_hash = hash;
  ck.put("", g.params());
  ck.put("", g.buffers());
  io::save_checkpoint(ck, path);
}

inline void load_generator(nn::Generator<float>& g, const io::Checkpoint& ck) {
  ck.get("", g.params());
  ck.get("", g.buffers());
}

struct HallucinateResult {
  std::size_t translated = 0;
};

inline HallucinateResult cmd_hallucinate(const RunConfig& c, std::ostream& log = std::cout) {
  c.validate();
  const RunLayout layout{c.output_dir};
  const auto t0 = std::chrono::steady_clock::now();
  const auto bench = load_benchmark(layout, c);
  const auto assignment = load_assignment(layout, c);
  HallucinateResult r;
  if (already_done(layout.hallucinate(), c, Stage::kHallucinate, log)) {
    r.translated = hallucination::read_translated_manifest(layout.hallucinate() / "translated.tsv").entries.size();
    return r;
  }
  fs::create_directories(layout.hallucinate());
  const auto hash = stage_hash(c, Stage::kHallucinate);
  const auto source = bench.split(data::Split::kSource);
  const auto views = labeled(source);

  // f_seg: source-only segmenter, frozen for L_sem and the starting point of the Adapt step.
  adaptation::SegNetwork<float> fseg(data::kNumClasses, seeds::of(c, seeds::kSegInit));
  log << "hallucinate: pre-training f_seg for " << c.seg_iterations << " iterations\n";
  adaptation::train_supervised(fseg, views, {c.seg_iterations, 4, 1e-3, seeds::of(c, seeds::kSegSampler)});
  {
    io::Checkpoint ck;
    ck.config_hash = hash;
    ck.put("", fseg.params());
    io::save_checkpoint(ck, layout.hallucinate() / "fseg.ckpt");
  }
  fseg.params().set_trainable(false);

  hallucination::HallucinationData hd;
  hd.source = views;
  hd.domains = target_domains(bench, assignment);
  nn::Generator<float> gen(static_cast<int>(hd.domains.front().codes.front().size()), seeds::of(c, seeds::kGenerator));
  const auto [mean, stddev] = hallucination::code_statistics(hd.domains);
  gen.set_code_normalization(mean, stddev);
  hallucination::HallucinationDiscriminators<float> disc(seeds::of(c, seeds::kHalDisc));
  hallucination::HallucinationConfig hc;
  hc.iterations = c.hallucinate_iterations;
  hc.weights = c.weights;
  hc.seed = seeds::of(c, seeds::kHalSampler);
  std::ofstream hlog(layout.hallucinate() / "hallucination_log.csv");
  hlog << "iteration,d_gan,d_style,g_gan,g_sem,g_style,g_total\n" << std::setprecision(8);
  log << "hallucinate: training the generator for " << c.hallucinate_iterations << " iterations, K=" << assignment.k()
      << '\n';
  hallucination::train_hallucination(gen, disc, fseg, hd, hc, [&](const hallucination::HallucinationStep& s) {
    hlog << s.iteration << ',' << s.d_gan << ',' << s.d_style << ',' << s.g_gan << ',' << s.g_sem << ','
         << s.g_style << ',' << s.g_total << '\n';
    if ((s.iteration + 1) % 250 == 0) {
      log << "  iter " << s.iteration + 1 << "  sem " << s.g_sem << "  gan " << s.g_gan << "  style " << s.g_style
          << '\n';
    }
  });
  save_generator(gen, hash, layout.hallucinate() / "generator.ckpt");

  std::vector<std::string> ids;
  std::vector<const data::Image*> images;
  for (const auto* s : source) {
    ids.push_back(s->image_id);
    images.push_back(&s->image);
  }
  const auto tm = hallucination::translate_dataset(gen, ids, images, hd.domains, layout.hallucinate(),
                                                   seeds::of(c, seeds::kExemplars));
  r.translated = tm.entries.size();
  write_record(layout.hallucinate(), {to_string(Stage::kHallucinate), hash, seeds::of(c, seeds::kGenerator),
                                      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
  log << "hallucinate: wrote " << r.translated << " translated images\n";
  return r;
}

inline std::string checkpoint_name(int iteration) {
  std::ostringstream os;
  os << "ckpt_" << std::setw(6) << std::setfill('0') << iteration << ".ckpt";
  return os.str();
}

struct AdaptResult {
  int iterations = 0;
  int discriminators = 0;
  std::vector<int> checkpoints;
};

inline AdaptResult cmd_adapt(const RunConfig& c, std::ostream& log = std::cout) {
  c.validate();
  const RunLayout layout{c.output_dir};
  const auto t0 = std::chrono::steady_clock::now();
  const auto bench = load_benchmark(layout, c);
  const auto assignment = load_assignment(layout, c);
  require_stage(layout.hallucinate(), c, Stage::kHallucinate);
  const auto dir = layout.adapt(c);
  AdaptResult r;
  r.iterations = c.adapt_iterations();
  r.discriminators = adaptation::discriminator_count(c.adapt_mode, assignment.k());
  if (already_done(dir, c, Stage::kAdapt, log)) return r;
  fs::create_directories(dir);
  const auto hash = stage_hash(c, Stage::kAdapt);

  adaptation::SegNetwork<float> net(data::kNumClasses, seeds::of(c, seeds::kAdaptInit));
  load_stage_checkpoint(layout.hallucinate() / "fseg.ckpt", c, Stage::kHallucinate).get("", net.params());

  adaptation::AdaptData ad;
  ad.raw_source = labeled(bench.split(data::Split::kSource));
  ad.targets.resize(assignment.k());
  for (std::size_t i = 0; i < assignment.image_ids.size(); ++i) {
    ad.targets[assignment.domains[i]].push_back(&bench.get(assignment.image_ids[i]).image);
  }
  std::vector<std::vector<data::Image>> translated_images(assignment.k());
  if (adaptation::uses_translated_source(c.adapt_mode)) {
    require_file(layout.hallucinate() / "translated.tsv");
    const auto tm = hallucination::read_translated_manifest(layout.hallucinate() / "translated.tsv");
    std::vector<std::vector<const data::SegMask*>> masks(assignment.k());
    for (const auto& e : tm.entries) {
      if (e.domain >= assignment.k()) throw StageError("translated.tsv names domain beyond K");
      translated_images[e.domain].push_back(data::load_image(tm.resolve(e.output_path)));
      masks[e.domain].push_back(&bench.get(e.source_image_id).mask);
    }
    ad.translated.resize(assignment.k());
    for (int j = 0; j < assignment.k(); ++j) {
      for (std::size_t i = 0; i < translated_images[j].size(); ++i) {
        ad.translated[j].push_back({&translated_images[j][i], masks[j][i]});
      }
    }
  }

  adaptation::AdaptConfig ac;
  ac.mode = c.adapt_mode;
  ac.form = c.effective_gan_form();
  ac.iterations = c.adapt_iterations();
  ac.weights = c.weights;
  ac.seed = seeds::of(c, seeds::kAdapt);
  ac.checkpoint_every = c.checkpoint_every;

  std::ofstream tlog(dir / "train_log.csv");
  tlog << "iteration,loss_task";
  for (int j = 0; j < assignment.k(); ++j) tlog << ",loss_out_" << j + 1;
  for (int d = 0; d < r.discriminators; ++d) tlog << ",loss_d_" << d + 1;
  tlog << ",wall_time_s\n" << std::setprecision(8);
  log << "adapt: mode " << adaptation::to_string(c.adapt_mode) << ", " << adaptation::to_string(ac.form) << " GAN, "
      << ac.iterations << " iterations, " << r.discriminators << " output discriminator(s)\n";
  adaptation::train_adapt(
      net, ad, ac,
      [&](const adaptation::AdaptStep& s) {
        tlog << s.iteration << ',' << s.loss_task;
        for (double v : s.loss_out) tlog << ',' << v;
        for (double v : s.loss_disc) tlog << ',' << v;
        tlog << ',' << s.wall_time_s << '\n';
      },
      [&](int iteration, const adaptation::SegNetwork<float>& f) {
        io::Checkpoint ck;
        ck.config_hash = hash;
        ck.put("", f.params());
        io::save_checkpoint(ck, dir / checkpoint_name(iteration));
        r.checkpoints.push_back(iteration);
        log << "  checkpoint " << iteration << '\n';
      });
  io::Checkpoint final_ck;
  final_ck.config_hash = hash;
  final_ck.put("", net.params());
  io::save_checkpoint(final_ck, dir / "final.ckpt");
  write_record(dir, {to_string(Stage::kAdapt), hash, ac.seed,
                     std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
  return r;
}

/// Evaluation sets by true style: one per compound style, then the open style.
inline std::vector<evaluation::EvalSet> eval_sets(const Benchmark& b, const RunConfig& c) {
  std::vector<evaluation::EvalSet> sets;
  for (const auto& name : c.compound_styles) sets.push_back({"compound", name, false, {}, {}});
  sets.push_back({"open", c.open_style, true, {}, {}});
  const int k = static_cast<int>(c.compound_styles.size());
  for (std::size_t i = 0; i < b.samples.size(); ++i) {
    const auto& e = b.manifest.entries[i];
    if (e.split == data::Split::kSource) continue;
    if (!e.true_style_id) throw StageError("evaluation needs style labels; " + e.image_id + " has none");
    const int idx = e.split == data::Split::kOpen ? k : *e.true_style_id;
    if (idx < 0 || idx > k) throw StageError("style id out of range for " + e.image_id);
    sets[idx].images.push_back(&b.samples[i].image);
    sets[idx].masks.push_back(&b.samples[i].mask);
  }
  return sets;
}

struct EvaluateResult {
  evaluation::DomainMetrics adapted;
  evaluation::DomainMetrics source_only;
  std::vector<evaluation::CurvePoint> curves;
};

inline void print_metrics(std::ostream& log, const std::string& label, const evaluation::DomainMetrics& m) {
  log << std::fixed << std::setprecision(2) << "  " << std::left << std::setw(24) << label << std::right;
  for (const auto& s : m.styles) log << "  " << s.style << ' ' << 100.0 * s.miou;
  log << "  | C " << 100.0 * m.compound << "  C+O " << 100.0 * m.compound_open << '\n';
  log.unsetf(std::ios::fixed);
  log << std::setprecision(6);
}

inline EvaluateResult cmd_evaluate(const RunConfig& c, std::ostream& log = std::cout) {
  c.validate();
  const RunLayout layout{c.output_dir};
  const auto t0 = std::chrono::steady_clock::now();
  const auto bench = load_benchmark(layout, c);
  require_stage(layout.hallucinate(), c, Stage::kHallucinate);
  require_stage(layout.adapt(c), c, Stage::kAdapt);
  const auto dir = layout.evaluate(c);
  fs::create_directories(dir);
  const auto sets = eval_sets(bench, c);
  const auto run_id = fs::path(layout.adapt(c)).filename().string();

  adaptation::SegNetwork<float> fseg(data::kNumClasses, 0), net(data::kNumClasses, 0);
  load_stage_checkpoint(layout.hallucinate() / "fseg.ckpt", c, Stage::kHallucinate).get("", fseg.params());
  load_stage_checkpoint(layout.adapt(c) / "final.ckpt", c, Stage::kAdapt).get("", net.params());

  EvaluateResult r;
  const auto ev_src = evaluation::evaluate_sets(fseg, sets);
  const auto ev_net = evaluation::evaluate_sets(net, sets);
  r.source_only = evaluation::aggregate(ev_src, sets);
  r.adapted = evaluation::aggregate(ev_net, sets);
  const std::vector<std::string> classes(data::kClassNames.begin(), data::kClassNames.end());
  evaluation::write_metrics_csv(dir / "metrics.csv", "source_only", 0, ev_src, classes);
  evaluation::write_metrics_csv(dir / "metrics.csv", run_id, c.adapt_iterations(), ev_net, classes, true);
  evaluation::write_domain_metrics_csv(dir / "domain_metrics.csv", run_id, r.adapted);
  evaluation::write_domain_metrics_csv(dir / "source_only_metrics.csv", "source_only", r.source_only);

  std::vector<std::pair<int, fs::path>> ckpts;
  for (int it = c.checkpoint_every; it <= c.adapt_iterations(); it += c.checkpoint_every) {
    ckpts.emplace_back(it, layout.adapt(c) / checkpoint_name(it));
  }
  if (c.adapt_iterations() % c.checkpoint_every != 0) {
    ckpts.emplace_back(c.adapt_iterations(), layout.adapt(c) / checkpoint_name(c.adapt_iterations()));
  }
  if (ckpts.size() >= 2) {
    for (const auto& [_, p] : ckpts) load_stage_checkpoint(p, c, Stage::kAdapt);
    r.curves = evaluation::biased_alignment_curves(ckpts, "", data::kNumClasses, sets);
    evaluation::write_curves_csv(dir / "curves.csv", r.curves);
    for (const auto& s : sets) evaluation::plot_curve_png(dir / ("curve_" + s.style + ".png"), evaluation::curve_for(r.curves, s.style));
  } else {
    log << "evaluate: fewer than 2 checkpoints, no alignment curves\n";
  }

  std::vector<const data::Image*> all;
  for (const auto& s : bench.samples) all.push_back(&s.image);
  evaluation::write_features(dir / "features.tsv", evaluation::export_features(net, bench.manifest, all));

  write_record(dir, {to_string(Stage::kEvaluate), stage_hash(c, Stage::kEvaluate), c.master_seed,
                     std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
  log << "evaluate (mIoU %):\n";
  print_metrics(log, "source_only", r.source_only);
  print_metrics(log, run_id, r.adapted);
  return r;
}

inline EvaluateResult cmd_run_all(const RunConfig& c, std::ostream& log = std::cout) {
  fs::create_directories(c.output_dir);
  save_config(c, fs::path(c.output_dir) / "config.txt");
  cmd_generate_data(c, log);
  cmd_discover(c, log);
  cmd_hallucinate(c, log);
  cmd_adapt(c, log);
  return cmd_evaluate(c, log);
}

}  // namespace dha::pipeline
