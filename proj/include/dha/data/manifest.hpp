#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace dha::data {

enum class Split { kSource, kCompound, kOpen };

inline std::string to_string(Split s) {
  switch (s) {
    case Split::kSource: return "source";
    case Split::kCompound: return "compound";
    case Split::kOpen: return "open";
  }
  return "?";
}

inline std::optional<Split> parse_split(const std::string& s) {
  if (s == "source") return Split::kSource;
  if (s == "compound") return Split::kCompound;
  if (s == "open") return Split::kOpen;
  return std::nullopt;
}

struct ManifestEntry {
  std::string image_id;
  std::string image_path;
  std::string mask_path;
  Split split = Split::kSource;
  std::optional<int> true_style_id;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// Error raised for a malformed manifest or table file; `line` is 1-based.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& file, int line, const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  // Relative paths in entries resolve against this directory.
  std::filesystem::path root;

  friend bool operator==(const DatasetManifest& a, const DatasetManifest& b) {
    return a.entries == b.entries;
  }

  std::filesystem::path resolve(const std::string& p) const {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : root / path;
  }

  DatasetManifest filter(Split s) const {
    DatasetManifest out{{}, root};
    for (const auto& e : entries) {
      if (e.split == s) out.entries.push_back(e);
    }
    return out;
  }

  std::size_t count(Split s) const {
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(), [s](const auto& e) { return e.split == s; }));
  }

  const ManifestEntry* find(const std::string& id) const {
    for (const auto& e : entries) {
      if (e.image_id == id) return &e;
    }
    return nullptr;
  }

  void validate_unique_ids() const {
    std::unordered_set<std::string> seen;
    for (const auto& e : entries) {
      if (!seen.insert(e.image_id).second) {
        throw std::invalid_argument("duplicate image_id " + e.image_id);
      }
    }
  }
};

/// Copy with every true_style_id removed; the form handed to discovery and training.
inline DatasetManifest strip_style_labels(DatasetManifest m) {
  for (auto& e : m.entries) e.true_style_id.reset();
  return m;
}

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    fields.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return fields;
}

}  // namespace detail

inline void write_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (const auto& e : m.entries) {
    out << e.image_id << '\t' << e.image_path << '\t' << e.mask_path << '\t' << to_string(e.split)
        << '\t';
    if (e.true_style_id) out << *e.true_style_id;
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

inline DatasetManifest parse_manifest(std::istream& in, const std::string& name,
                                      const std::filesystem::path& root) {
  DatasetManifest m{{}, root};
  std::unordered_set<std::string> ids;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split_tabs(line);
    if (f.size() != 5) {
      throw ParseError(name, lineno, "expected 5 tab-separated fields (image_id, image_path, "
                                     "mask_path, split, true_style_id), got " +
                                         std::to_string(f.size()));
    }
    ManifestEntry e;
    e.image_id = f[0];
    e.image_path = f[1];
    e.mask_path = f[2];
    if (e.image_id.empty()) throw ParseError(name, lineno, "empty image_id");
    if (e.image_path.empty()) throw ParseError(name, lineno, "empty image_path");
    if (e.mask_path.empty()) throw ParseError(name, lineno, "empty mask_path");
    const auto split = parse_split(f[3]);
    if (!split) throw ParseError(name, lineno, "unknown split '" + f[3] + "'");
    e.split = *split;
    if (!f[4].empty()) {
      std::size_t used = 0;
      int v = 0;
      try {
        v = std::stoi(f[4], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != f[4].size() || v < 0) {
        throw ParseError(name, lineno, "invalid true_style_id '" + f[4] + "'");
      }
      e.true_style_id = v;
    }
    if (!ids.insert(e.image_id).second) {
      throw ParseError(name, lineno, "duplicate image_id " + e.image_id);
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

inline DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open manifest " + path.string());
  return parse_manifest(in, path.string(), path.parent_path());
}

}  // namespace dha::data
