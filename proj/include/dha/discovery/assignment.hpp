#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dha/data/manifest.hpp"
#include "dha/discovery/clustering.hpp"

namespace dha::discovery {

/// Latent-domain label for every compound image. Domains are 0-based in memory
/// and 1-based in files.
struct DomainAssignment {
  std::vector<std::string> image_ids;
  std::vector<int> domains;
  std::vector<Point> centroids;

  int k() const { return static_cast<int>(centroids.size()); }

  std::unordered_map<std::string, int> by_id() const {
    std::unordered_map<std::string, int> m;
    for (std::size_t i = 0; i < image_ids.size(); ++i) m.emplace(image_ids[i], domains[i]);
    return m;
  }

  std::vector<int> sizes() const {
    std::vector<int> s(k(), 0);
    for (int d : domains) ++s[d];
    return s;
  }

  /// Index of the centroid nearest to `code`.
  int nearest(const Point& code) const {
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (int j = 0; j < k(); ++j) {
      const double d = squared_distance(code, centroids[j]);
      if (d < bd) {
        bd = d;
        best = j;
      }
    }
    return best;
  }
};

inline DomainAssignment make_assignment(std::vector<std::string> ids, const KMeansResult& km) {
  if (ids.size() != km.labels.size()) throw std::invalid_argument("assignment: id/label count mismatch");
  return {std::move(ids), km.labels, km.centroids};
}

/// Splits the compound part of `manifest` into one manifest per latent domain.
inline std::vector<data::DatasetManifest> partition_manifest(const data::DatasetManifest& manifest,
                                                             const DomainAssignment& assignment) {
  const auto lookup = assignment.by_id();
  std::unordered_set<std::string> compound;
  for (const auto& e : manifest.entries) {
    if (e.split == data::Split::kCompound) compound.insert(e.image_id);
  }
  for (const auto& id : assignment.image_ids) {
    if (!compound.count(id)) {
      throw std::invalid_argument("partition_manifest: assignment names unknown compound image " + id);
    }
  }
  std::vector<data::DatasetManifest> parts(assignment.k(), data::DatasetManifest{{}, manifest.root});
  for (const auto& e : manifest.entries) {
    if (e.split != data::Split::kCompound) continue;
    const auto it = lookup.find(e.image_id);
    if (it == lookup.end()) {
      throw std::invalid_argument("partition_manifest: compound image " + e.image_id + " is unassigned");
    }
    parts[it->second].entries.push_back(e);
  }
  return parts;
}

inline void write_assignment(const DomainAssignment& a, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  for (std::size_t i = 0; i < a.image_ids.size(); ++i) out << a.image_ids[i] << '\t' << a.domains[i] + 1 << '\n';
}

inline void write_centroids(const std::vector<Point>& centroids, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << std::setprecision(17);
  for (const auto& c : centroids) {
    for (std::size_t d = 0; d < c.size(); ++d) out << (d ? " " : "") << c[d];
    out << '\n';
  }
}

inline std::vector<Point> read_centroids(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<Point> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    Point p;
    double v;
    while (ls >> v) p.push_back(v);
    if (!ls.eof()) throw data::ParseError(path.string(), lineno, "non-numeric centroid value");
    if (!out.empty() && p.size() != out.front().size()) {
      throw data::ParseError(path.string(), lineno, "centroid width differs from first line");
    }
    out.push_back(std::move(p));
  }
  return out;
}

/// Reads an assignment file; centroids come from a separate centroid file.
inline DomainAssignment read_assignment(const std::filesystem::path& path,
                                        const std::filesystem::path& centroid_path) {
  DomainAssignment a;
  a.centroids = read_centroids(centroid_path);
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw data::ParseError(path.string(), lineno, "expected image_id<TAB>domain");
    int d = 0;
    try {
      d = std::stoi(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw data::ParseError(path.string(), lineno, "non-integer domain");
    }
    if (d < 1 || d > a.k()) {
      throw data::ParseError(path.string(), lineno, "domain " + std::to_string(d) + " outside 1.." +
                                                        std::to_string(a.k()));
    }
    a.image_ids.push_back(line.substr(0, tab));
    a.domains.push_back(d - 1);
  }
  return a;
}

}  // namespace dha::discovery
