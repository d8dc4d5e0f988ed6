#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "flowcast/core/error.hpp"

namespace flowcast::io {

template <typename Word>
inline Word to_little(Word w) {
  if constexpr (std::endian::native == std::endian::big) {
    Word r = 0;
    for (std::size_t i = 0; i < sizeof(Word); ++i) r = (r << 8) | ((w >> (8 * i)) & 0xFF);
    return r;
  }
  return w;
}

/// Appends values as little-endian IEEE-754 binary32.
inline void append_f32(std::string& out, std::span<const float> values) {
  const std::size_t base = out.size();
  out.resize(base + values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto w = to_little(std::bit_cast<std::uint32_t>(values[i]));
    std::memcpy(out.data() + base + 4 * i, &w, 4);
  }
}

inline void append_f64(std::string& out, std::span<const double> values) {
  const std::size_t base = out.size();
  out.resize(base + values.size() * 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto w = to_little(std::bit_cast<std::uint64_t>(values[i]));
    std::memcpy(out.data() + base + 8 * i, &w, 8);
  }
}

inline std::vector<float> decode_f32(std::span<const char> bytes) {
  if (bytes.size() % 4 != 0) throw Error("decode_f32: byte count not a multiple of 4");
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t w;
    std::memcpy(&w, bytes.data() + 4 * i, 4);
    out[i] = std::bit_cast<float>(to_little(w));
  }
  return out;
}

inline std::vector<double> decode_f64(std::span<const char> bytes) {
  if (bytes.size() % 8 != 0) throw Error("decode_f64: byte count not a multiple of 8");
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t w;
    std::memcpy(&w, bytes.data() + 8 * i, 8);
    out[i] = std::bit_cast<double>(to_little(w));
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write to " + path.string());
}

/// 64-bit FNV-1a, used to fingerprint configs and checkpoints in run manifests.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace flowcast::io
