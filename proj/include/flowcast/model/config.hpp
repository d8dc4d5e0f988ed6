#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>

#include "flowcast/core/error.hpp"
#include "flowcast/core/keyvalue.hpp"

namespace flowcast::model {

/// Architecture and input geometry of the velocity network.
struct ModelConfig {
  // Input geometry.
  std::size_t n_lat = 32;
  std::size_t n_lon = 64;
  std::size_t n_surface = 4;
  std::size_t n_pressure_vars = 4;
  std::size_t n_levels = 3;
  std::size_t cond_channels = 11;

  // Architecture.
  std::size_t embed_dim = 64;
  std::array<std::size_t, 3> depths{1, 2, 1};
  std::array<std::size_t, 3> pressure_patch{2, 4, 4};  // levels, lat, lon
  std::array<std::size_t, 2> surface_patch{4, 4};      // lat, lon
  std::array<std::size_t, 3> window{2, 6, 6};          // depth, lat, lon
  std::size_t time_embed_dim = 64;
  bool low_rank = true;
  std::size_t lowrank_r = 8;
  std::size_t n_heads = 4;
  std::size_t mlp_ratio = 4;
  std::uint64_t seed = 0;

  /// 5 variables x 13 levels plus 6 surface variables on the 181 x 360 grid.
  static ModelConfig paper() {
    ModelConfig c;
    c.n_lat = 181;
    c.n_lon = 360;
    c.n_surface = 6;
    c.n_pressure_vars = 5;
    c.n_levels = 13;
    c.embed_dim = 256;
    c.depths = {2, 12, 2};
    c.time_embed_dim = 256;
    c.lowrank_r = 32;
    c.n_heads = 8;
    return c;
  }

  /// 4 pressure variables x 3 levels on a 32 x 64 grid.
  static ModelConfig desk() { return ModelConfig{}; }

  /// A few thousand parameters on an 8 x 16 grid, small enough for
  /// finite-difference gradient checks in float64.
  static ModelConfig tiny() {
    ModelConfig c;
    c.n_lat = 8;
    c.n_lon = 16;
    c.n_surface = 2;
    c.n_pressure_vars = 2;
    c.n_levels = 3;
    c.cond_channels = 3;
    c.embed_dim = 8;
    c.depths = {2, 2, 2};
    c.pressure_patch = {2, 2, 2};
    c.surface_patch = {2, 2};
    c.window = {2, 2, 2};
    c.time_embed_dim = 8;
    c.lowrank_r = 2;
    c.n_heads = 2;
    c.mlp_ratio = 2;
    return c;
  }

  std::size_t channels() const { return n_surface + n_pressure_vars * n_levels; }

  // Latent geometry of the first layer.
  std::size_t pressure_depth() const { return ceil_div(n_levels, pressure_patch[0]); }
  std::size_t latent_depth() const { return pressure_depth() + 1; }
  std::size_t latent_lat() const { return ceil_div(n_lat, pressure_patch[1]); }
  std::size_t latent_lon() const { return ceil_div(n_lon, pressure_patch[2]); }
  std::size_t head_count(std::size_t layer) const { return layer == 1 ? 2 * n_heads : n_heads; }
  std::size_t layer_dim(std::size_t layer) const { return layer == 1 ? 2 * embed_dim : embed_dim; }

  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError("ModelConfig: " + m); };
    if (n_lat < 2 || n_lon < 4) fail("grid too small");
    if (n_surface == 0 && n_pressure_vars == 0) fail("no state channels");
    if (n_pressure_vars > 0 && n_levels == 0) fail("pressure variables need levels");
    if (embed_dim == 0 || n_heads == 0 || embed_dim % n_heads != 0) fail("embed_dim must be a positive multiple of n_heads");
    if (time_embed_dim == 0 || time_embed_dim % 2 != 0) fail("time_embed_dim must be even and positive");
    for (auto d : depths) {
      if (d == 0) fail("every layer needs at least one block");
    }
    for (auto p : pressure_patch) {
      if (p == 0) fail("patch sizes must be positive");
    }
    for (auto w : window) {
      if (w == 0) fail("window sizes must be positive");
    }
    if (surface_patch[0] != pressure_patch[1] || surface_patch[1] != pressure_patch[2]) {
      fail("surface patch must match the horizontal pressure patch");
    }
    if (low_rank && !(lowrank_r >= 1 && lowrank_r < std::min(time_embed_dim, 6 * embed_dim))) {
      fail("lowrank_r must satisfy 1 <= r < min(time_embed_dim, 6 * embed_dim)");
    }
    if (latent_depth() < window[0] || latent_lat() < window[1] || latent_lon() < window[2]) {
      fail("patched grid is smaller than the attention window");
    }
    if (mlp_ratio == 0) fail("mlp_ratio must be positive");
  }

  static std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

  KeyValueFile to_keyvalue() const {
    KeyValueFile kv;
    kv.set("n_lat", n_lat);
    kv.set("n_lon", n_lon);
    kv.set("n_surface", n_surface);
    kv.set("n_pressure_vars", n_pressure_vars);
    kv.set("n_levels", n_levels);
    kv.set("cond_channels", cond_channels);
    kv.set("embed_dim", embed_dim);
    kv.set("depths", KeyValueFile::join(depths));
    kv.set("pressure_patch", KeyValueFile::join(pressure_patch));
    kv.set("surface_patch", KeyValueFile::join(surface_patch));
    kv.set("window", KeyValueFile::join(window));
    kv.set("time_embed_dim", time_embed_dim);
    kv.set("low_rank", std::string(low_rank ? "true" : "false"));
    kv.set("lowrank_r", lowrank_r);
    kv.set("n_heads", n_heads);
    kv.set("mlp_ratio", mlp_ratio);
    kv.set("seed", static_cast<long long>(seed));
    return kv;
  }

  /// Reads keys present in `kv` (optionally prefixed), leaving the rest at their current values.
  void update_from(const KeyValueFile& kv, const std::string& prefix = "") {
    auto sz = [&](const char* k, std::size_t& out) {
      if (kv.has(prefix + k)) out = static_cast<std::size_t>(kv.get_int(prefix + k));
    };
    auto arr = [&](const char* k, auto& out) {
      if (!kv.has(prefix + k)) return;
      const auto v = kv.get_doubles(prefix + k);
      if (v.size() != out.size()) throw ConfigError(std::string("ModelConfig: ") + k + " needs " + std::to_string(out.size()) + " values");
      for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<std::size_t>(v[i]);
    };
    sz("n_lat", n_lat);
    sz("n_lon", n_lon);
    sz("n_surface", n_surface);
    sz("n_pressure_vars", n_pressure_vars);
    sz("n_levels", n_levels);
    sz("cond_channels", cond_channels);
    sz("embed_dim", embed_dim);
    arr("depths", depths);
    arr("pressure_patch", pressure_patch);
    arr("surface_patch", surface_patch);
    arr("window", window);
    sz("time_embed_dim", time_embed_dim);
    if (kv.has(prefix + "low_rank")) low_rank = kv.get(prefix + "low_rank") == "true";
    sz("lowrank_r", lowrank_r);
    sz("n_heads", n_heads);
    sz("mlp_ratio", mlp_ratio);
    if (kv.has(prefix + "seed")) seed = static_cast<std::uint64_t>(kv.get_int(prefix + "seed"));
  }

  bool operator==(const ModelConfig&) const = default;
};

}  // namespace flowcast::model
