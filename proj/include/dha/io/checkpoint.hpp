#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dha/nn/module.hpp"

namespace dha::io {

// Layout (little-endian):
//   "DHACKPT\0" | u32 format_version | u64 config_hash | u32 tensor_count
//   per tensor: u32 name_len | name bytes | i32 n,c,h,w | f32 values[n*c*h*w]
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'D', 'H', 'A', 'C', 'K', 'P', 'T', '\0'};

struct CheckpointTensor {
  nn::Shape shape;
  std::vector<float> values;
};

struct Checkpoint {
  std::uint64_t config_hash = 0;
  std::map<std::string, CheckpointTensor> tensors;

  template <typename T>
  void put(const std::string& prefix, const nn::ParamSet<T>& params) {
    for (const auto& [name, var] : params.entries()) {
      CheckpointTensor t{var->value.shape(), {}};
      t.values.assign(var->value.vec().begin(), var->value.vec().end());
      tensors[prefix + name] = std::move(t);
    }
  }

  /// Loads every parameter of `params` from `prefix`+name; shapes must match.
  template <typename T>
  void get(const std::string& prefix, nn::ParamSet<T>& params) const {
    for (const auto& [name, var] : params.entries()) {
      const auto it = tensors.find(prefix + name);
      if (it == tensors.end()) throw std::runtime_error("checkpoint lacks tensor " + prefix + name);
      if (!(it->second.shape == var->value.shape())) {
        throw std::runtime_error("checkpoint tensor " + prefix + name + " has shape " +
                                 it->second.shape.str() + ", expected " + var->value.shape().str());
      }
      for (std::size_t i = 0; i < it->second.values.size(); ++i) {
        var->value[i] = static_cast<T>(it->second.values[i]);
      }
    }
  }
};

namespace detail {

template <typename V>
void put_raw(std::ostream& out, const V& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V get_raw(std::istream& in, const std::string& what) {
  V v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(V));
  if (!in) throw std::runtime_error("truncated checkpoint while reading " + what);
  return v;
}

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put_raw(out, kCheckpointVersion);
  detail::put_raw(out, ck.config_hash);
  detail::put_raw(out, static_cast<std::uint32_t>(ck.tensors.size()));
  for (const auto& [name, t] : ck.tensors) {
    detail::put_raw(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    for (int d : {t.shape.n, t.shape.c, t.shape.h, t.shape.w}) detail::put_raw(out, static_cast<std::int32_t>(d));
    out.write(reinterpret_cast<const char*>(t.values.data()),
              static_cast<std::streamsize>(t.values.size() * sizeof(float)));
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw std::runtime_error(path.string() + " is not a checkpoint file");
  }
  const auto version = detail::get_raw<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) {
    throw std::runtime_error(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.config_hash = detail::get_raw<std::uint64_t>(in, "config hash");
  const auto count = detail::get_raw<std::uint32_t>(in, "tensor count");
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto len = detail::get_raw<std::uint32_t>(in, "name length");
    std::string name(len, '\0');
    in.read(name.data(), len);
    CheckpointTensor t;
    t.shape.n = detail::get_raw<std::int32_t>(in, name);
    t.shape.c = detail::get_raw<std::int32_t>(in, name);
    t.shape.h = detail::get_raw<std::int32_t>(in, name);
    t.shape.w = detail::get_raw<std::int32_t>(in, name);
    t.values.resize(t.shape.numel());
    in.read(reinterpret_cast<char*>(t.values.data()),
            static_cast<std::streamsize>(t.values.size() * sizeof(float)));
    if (!in) throw std::runtime_error("truncated checkpoint tensor " + name);
    ck.tensors.emplace(std::move(name), std::move(t));
  }
  return ck;
}

}  // namespace dha::io
