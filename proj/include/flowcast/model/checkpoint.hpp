#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "flowcast/autodiff/tape.hpp"
#include "flowcast/core/binary_io.hpp"
#include "flowcast/core/error.hpp"
#include "flowcast/model/config.hpp"

namespace flowcast::model {

template <typename T>
struct NamedTensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<T> values;
};

/// Single-file archive: an 8-byte magic, the manifest length as a
/// little-endian u64, a JSON manifest, then the tensor buffers back to back
/// as little-endian f32 or f64.
template <typename T>
struct Checkpoint {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  static constexpr char kMagic[9] = "FLOWCKPT";
  static constexpr const char* kDtype = std::is_same_v<T, float> ? "f32" : "f64";

  ModelConfig config;
  std::vector<NamedTensor<T>> tensors;
  nlohmann::json meta = nlohmann::json::object();

  void add(const std::string& prefix, const ad::ParameterSet<T>& set) {
    for (std::size_t i = 0; i < set.size(); ++i) tensors.push_back({prefix + set[i].name, set[i].shape, set[i].value});
  }

  /// Adds buffers that mirror a parameter set (optimizer moments, EMA shadows).
  void add(const std::string& prefix, const ad::ParameterSet<T>& like, const std::vector<std::vector<T>>& buffers) {
    if (buffers.size() != like.size()) throw Error("Checkpoint: buffer count does not match the parameter set");
    for (std::size_t i = 0; i < like.size(); ++i) tensors.push_back({prefix + like[i].name, like[i].shape, buffers[i]});
  }

  const NamedTensor<T>* find(const std::string& name) const {
    for (const auto& t : tensors) {
      if (t.name == name) return &t;
    }
    return nullptr;
  }

  bool has_group(const std::string& prefix) const {
    for (const auto& t : tensors) {
      if (t.name.rfind(prefix, 0) == 0) return true;
    }
    return false;
  }

  /// Copies `prefix + name` into each parameter; every name must be present with a matching shape.
  void restore(const std::string& prefix, ad::ParameterSet<T>& set) const {
    for (std::size_t i = 0; i < set.size(); ++i) set[i].value = lookup(prefix, set[i]);
  }

  std::vector<std::vector<T>> buffers(const std::string& prefix, const ad::ParameterSet<T>& like) const {
    std::vector<std::vector<T>> out;
    out.reserve(like.size());
    for (std::size_t i = 0; i < like.size(); ++i) out.push_back(lookup(prefix, like[i]));
    return out;
  }

  std::string serialize() const {
    nlohmann::json m;
    m["format"] = 1;
    m["dtype"] = kDtype;
    nlohmann::json cfg = nlohmann::json::object();
    const auto kv = config.to_keyvalue();
    for (const auto& k : kv.keys()) cfg[k] = kv.get(k);
    m["config"] = cfg;
    m["meta"] = meta;
    std::string payload;
    nlohmann::json list = nlohmann::json::array();
    for (const auto& t : tensors) {
      std::size_t n = 1;
      for (auto d : t.shape) n *= d;
      if (n != t.values.size()) throw Error("Checkpoint: tensor " + t.name + " has the wrong element count");
      list.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", payload.size()}, {"count", n}});
      if constexpr (std::is_same_v<T, float>) {
        io::append_f32(payload, t.values);
      } else {
        io::append_f64(payload, t.values);
      }
    }
    m["tensors"] = list;
    const std::string header = m.dump(1);
    std::string out(kMagic, 8);
    const std::uint64_t len = io::to_little(static_cast<std::uint64_t>(header.size()));
    out.append(reinterpret_cast<const char*>(&len), 8);
    out += header;
    out += payload;
    return out;
  }

  static Checkpoint parse(const std::string& bytes) {
    if (bytes.size() < 16 || bytes.compare(0, 8, kMagic) != 0) throw Error("Checkpoint: not a checkpoint archive");
    std::uint64_t len;
    std::memcpy(&len, bytes.data() + 8, 8);
    len = io::to_little(len);
    if (16 + len > bytes.size()) throw Error("Checkpoint: truncated manifest");
    const auto m = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(len));
    if (m.at("dtype") != kDtype) throw Error("Checkpoint: stored dtype " + m.at("dtype").get<std::string>() + ", expected " + kDtype);
    Checkpoint ck;
    KeyValueFile kv;
    for (const auto& [k, v] : m.at("config").items()) kv.set(k, v.template get<std::string>());
    ck.config.update_from(kv);
    ck.meta = m.at("meta");
    const std::size_t base = 16 + len, width = sizeof(T);
    for (const auto& e : m.at("tensors")) {
      const std::size_t off = e.at("offset"), count = e.at("count");
      if (base + off + count * width > bytes.size()) throw Error("Checkpoint: truncated tensor " + e.at("name").get<std::string>());
      std::span<const char> raw(bytes.data() + base + off, count * width);
      NamedTensor<T> t{e.at("name"), e.at("shape").get<std::vector<std::size_t>>(), {}};
      if constexpr (std::is_same_v<T, float>) {
        t.values = io::decode_f32(raw);
      } else {
        t.values = io::decode_f64(raw);
      }
      ck.tensors.push_back(std::move(t));
    }
    return ck;
  }

  void save(const std::filesystem::path& path) const {
    // Write-then-rename so an interrupted save never clobbers the previous archive.
    auto tmp = path;
    tmp += ".tmp";
    io::write_file(tmp, serialize());
    std::filesystem::rename(tmp, path);
  }

  static Checkpoint load(const std::filesystem::path& path) { return parse(io::read_file(path)); }

 private:
  const std::vector<T>& lookup(const std::string& prefix, const ad::Parameter<T>& p) const {
    const auto* t = find(prefix + p.name);
    if (!t) throw Error("Checkpoint: missing tensor " + prefix + p.name);
    if (t->shape != p.shape) throw Error("Checkpoint: shape mismatch for " + prefix + p.name);
    return t->values;
  }
};

/// Stored element type ("f32" or "f64") without decoding the tensors.
inline std::string checkpoint_dtype(const std::filesystem::path& path) {
  const std::string bytes = io::read_file(path);
  if (bytes.size() < 16 || bytes.compare(0, 8, "FLOWCKPT") != 0) throw Error("Checkpoint: not a checkpoint archive");
  std::uint64_t len;
  std::memcpy(&len, bytes.data() + 8, 8);
  len = io::to_little(len);
  if (16 + len > bytes.size()) throw Error("Checkpoint: truncated manifest");
  return nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(len)).at("dtype");
}

/// FNV-1a fingerprint of a checkpoint file, as recorded in run manifests.
inline std::string checkpoint_hash(const std::filesystem::path& path) { return io::hex64(io::fnv1a(io::read_file(path))); }

}  // namespace flowcast::model
