#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dha/adaptation/trainer.hpp"
#include "dha/data/benchmark.hpp"
#include "dha/data/style.hpp"

namespace dha::pipeline {

enum class Scheme { kShort, kLong };

inline std::string to_string(Scheme s) { return s == Scheme::kShort ? "short" : "long"; }

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::uint64_t master_seed = 0;
  int num_source = 300;
  int per_style = 150;
  int num_open = 100;
  int image_size = 64;
  std::vector<std::string> compound_styles{"night", "rain", "cloudy"};
  std::string open_style = "sunset";
  std::optional<int> k;  // empty: choose by silhouette over [k_min, k_max]
  int k_min = 2;
  int k_max = 5;
  adaptation::LossWeights weights;
  Scheme scheme = Scheme::kShort;
  std::optional<adaptation::GanForm> gan_form;  // empty: log for short, LS for long
  adaptation::AdaptMode adapt_mode = adaptation::AdaptMode::kDomainWise;
  int seg_iterations = 1500;
  int hallucinate_iterations = 2000;
  int short_iterations = 5000;
  int long_iterations = 15000;
  int checkpoint_every = 500;
  std::string output_dir = "runs/default";

  friend bool operator==(const RunConfig&, const RunConfig&) = default;

  adaptation::GanForm effective_gan_form() const {
    if (gan_form) return *gan_form;
    return scheme == Scheme::kShort ? adaptation::GanForm::kLog : adaptation::GanForm::kLeastSquares;
  }
  int adapt_iterations() const { return scheme == Scheme::kShort ? short_iterations : long_iterations; }

  data::BenchmarkConfig benchmark() const {
    data::BenchmarkConfig b;
    b.num_source = num_source;
    b.per_style = per_style;
    b.num_open = num_open;
    b.master_seed = master_seed;
    b.scene.height = image_size;
    b.scene.width = image_size;
    b.compound_styles.clear();
    for (const auto& s : compound_styles) b.compound_styles.push_back(data::style_family(s));
    b.open_style = data::style_family(open_style);
    return b;
  }

  void validate() const {
    auto positive = [](const char* key, long v) {
      if (v <= 0) throw ConfigError(std::string(key) + " must be positive");
    };
    positive("num_source", num_source);
    positive("per_style", per_style);
    positive("num_open", num_open);
    positive("seg_iterations", seg_iterations);
    positive("hallucinate_iterations", hallucinate_iterations);
    positive("short_iterations", short_iterations);
    positive("long_iterations", long_iterations);
    positive("checkpoint_every", checkpoint_every);
    if (image_size < data::kMinSide || image_size % 4 != 0) {
      throw ConfigError("image_size must be a multiple of 4 and at least " + std::to_string(data::kMinSide));
    }
    if (compound_styles.size() < 2) throw ConfigError("compound_styles needs at least 2 styles");
    for (const auto& s : compound_styles) {
      if (s == open_style) throw ConfigError("open_style '" + s + "' also listed in compound_styles");
    }
    try {
      (void)benchmark();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (k_min < 2 || k_max < k_min) throw ConfigError("need 2 <= k_min <= k_max");
    if (k && *k < 1) throw ConfigError("k must be positive or auto");
    try {
      weights.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
    for (const auto* text : {&output_dir, &open_style}) {
      if (text->find_first_of("#\n\r") != std::string::npos) throw ConfigError("values may not contain '#' or newlines");
    }
  }
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename V>
V parse_number(const std::string& key, const std::string& text) {
  V v{};
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc() || r.ptr != text.data() + text.size()) {
    throw ConfigError("config key '" + key + "': cannot parse '" + text + "' as a number");
  }
  return v;
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

inline std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

}  // namespace detail

/// Canonical key=value text, one key per line in a fixed order.
inline std::string serialize(const RunConfig& c) {
  using detail::format_double;
  std::ostringstream os;
  os << "master_seed=" << c.master_seed << '\n'
     << "num_source=" << c.num_source << '\n'
     << "per_style=" << c.per_style << '\n'
     << "num_open=" << c.num_open << '\n'
     << "image_size=" << c.image_size << '\n'
     << "compound_styles=" << detail::join(c.compound_styles) << '\n'
     << "open_style=" << c.open_style << '\n'
     << "k=" << (c.k ? std::to_string(*c.k) : "auto") << '\n'
     << "k_min=" << c.k_min << '\n'
     << "k_max=" << c.k_max << '\n'
     << "lambda_gan=" << format_double(c.weights.gan) << '\n'
     << "lambda_sem=" << format_double(c.weights.sem) << '\n'
     << "lambda_style=" << format_double(c.weights.style) << '\n'
     << "lambda_out=" << format_double(c.weights.out) << '\n'
     << "lambda_task=" << format_double(c.weights.task) << '\n'
     << "scheme=" << to_string(c.scheme) << '\n'
     << "gan_form=" << (c.gan_form ? adaptation::to_string(*c.gan_form) : "auto") << '\n'
     << "adapt_mode=" << adaptation::to_string(c.adapt_mode) << '\n'
     << "seg_iterations=" << c.seg_iterations << '\n'
     << "hallucinate_iterations=" << c.hallucinate_iterations << '\n'
     << "short_iterations=" << c.short_iterations << '\n'
     << "long_iterations=" << c.long_iterations << '\n'
     << "checkpoint_every=" << c.checkpoint_every << '\n'
     << "output_dir=" << c.output_dir << '\n';
  return os.str();
}

/// Sets one key from its text value; unknown keys are rejected by name.
inline void set_key(RunConfig& c, const std::string& key, const std::string& value) {
  using detail::parse_number;
  if (key == "master_seed") c.master_seed = parse_number<std::uint64_t>(key, value);
  else if (key == "num_source") c.num_source = parse_number<int>(key, value);
  else if (key == "per_style") c.per_style = parse_number<int>(key, value);
  else if (key == "num_open") c.num_open = parse_number<int>(key, value);
  else if (key == "image_size") c.image_size = parse_number<int>(key, value);
  else if (key == "compound_styles") c.compound_styles = detail::split_list(value);
  else if (key == "open_style") c.open_style = value;
  else if (key == "k") c.k = value == "auto" ? std::nullopt : std::optional<int>(parse_number<int>(key, value));
  else if (key == "k_min") c.k_min = parse_number<int>(key, value);
  else if (key == "k_max") c.k_max = parse_number<int>(key, value);
  else if (key == "lambda_gan") c.weights.gan = parse_number<double>(key, value);
  else if (key == "lambda_sem") c.weights.sem = parse_number<double>(key, value);
  else if (key == "lambda_style") c.weights.style = parse_number<double>(key, value);
  else if (key == "lambda_out") c.weights.out = parse_number<double>(key, value);
  else if (key == "lambda_task") c.weights.task = parse_number<double>(key, value);
  else if (key == "scheme") {
    if (value == "short") c.scheme = Scheme::kShort;
    else if (value == "long") c.scheme = Scheme::kLong;
    else throw ConfigError("config key 'scheme': expected short or long, got '" + value + "'");
  } else if (key == "gan_form") {
    try {
      c.gan_form = value == "auto" ? std::nullopt : std::optional(adaptation::parse_gan_form(value));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("config key 'gan_form': " + std::string(e.what()));
    }
  } else if (key == "adapt_mode") {
    try {
      c.adapt_mode = adaptation::parse_adapt_mode(value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("config key 'adapt_mode': " + std::string(e.what()));
    }
  } else if (key == "seg_iterations") c.seg_iterations = parse_number<int>(key, value);
  else if (key == "hallucinate_iterations") c.hallucinate_iterations = parse_number<int>(key, value);
  else if (key == "short_iterations") c.short_iterations = parse_number<int>(key, value);
  else if (key == "long_iterations") c.long_iterations = parse_number<int>(key, value);
  else if (key == "checkpoint_every") c.checkpoint_every = parse_number<int>(key, value);
  else if (key == "output_dir") c.output_dir = value;
  else throw ConfigError("unknown config key '" + key + "'");
}

/// Parses key=value lines; '#' starts a comment, blank lines are ignored, missing keys keep
/// their defaults, repeated keys are an error.
inline RunConfig parse_config(const std::string& text, const std::string& name = "<config>") {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  std::map<std::string, int> seen;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(name + ":" + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (auto [it, fresh] = seen.emplace(key, lineno); !fresh) {
      throw ConfigError(name + ":" + std::to_string(lineno) + ": key '" + key + "' repeats line " +
                        std::to_string(it->second));
    }
    try {
      set_key(c, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(name + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  c.validate();
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

inline void save_config(const RunConfig& c, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << serialize(c);
}

}  // namespace dha::pipeline
