#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "flowcast/core/error.hpp"
#include "flowcast/core/registry.hpp"
#include "flowcast/core/state.hpp"

namespace flowcast {

struct NormStats {
  std::vector<double> mean;
  std::vector<double> std;

  std::size_t size() const { return mean.size(); }

  void validate() const {
    if (mean.size() != std.size()) throw Error("NormStats: mean/std length mismatch");
    for (std::size_t c = 0; c < std.size(); ++c) {
      if (!(std[c] > 0.0) || !std::isfinite(std[c])) {
        throw Error("NormStats: non-positive std for channel " + std::to_string(c));
      }
    }
  }
};

/// Per-channel mean and population standard deviation over all times and grid points.
inline NormStats compute_norm_stats(std::span<const StateField> dataset, const VariableRegistry& reg) {
  if (dataset.size() < 2) throw Error("compute_norm_stats: need at least 2 timesteps");
  const auto& first = dataset.front();
  for (const auto& s : dataset) {
    if (!s.same_shape(first)) throw Error("compute_norm_stats: fields disagree in shape");
  }
  if (first.channels != reg.n_channels()) throw Error("compute_norm_stats: registry/field channel mismatch");
  const auto names = reg.channels();
  NormStats out;
  out.mean.assign(first.channels, 0.0);
  out.std.assign(first.channels, 0.0);
  const double n = static_cast<double>(dataset.size() * first.plane());
  for (std::size_t c = 0; c < first.channels; ++c) {
    double sum = 0.0;
    for (const auto& s : dataset) {
      for (double v : s.channel(c)) sum += v;
    }
    const double mu = sum / n;
    double ss = 0.0;
    for (const auto& s : dataset) {
      for (double v : s.channel(c)) ss += (v - mu) * (v - mu);
    }
    const double sd = std::sqrt(ss / n);
    if (!(sd > 0.0)) throw Error("compute_norm_stats: zero variance in channel " + names[c].name);
    out.mean[c] = mu;
    out.std[c] = sd;
  }
  return out;
}

inline StateField normalize(const StateField& state, const NormStats& stats) {
  if (state.normalized) throw Error("normalize: state is already normalized");
  if (stats.size() != state.channels) throw Error("normalize: stats/channel mismatch");
  StateField out = state;
  for (std::size_t c = 0; c < state.channels; ++c) {
    const double mu = stats.mean[c], inv = 1.0 / stats.std[c];
    for (double& v : out.channel(c)) v = (v - mu) * inv;
  }
  out.normalized = true;
  return out;
}

inline StateField denormalize(const StateField& state, const NormStats& stats) {
  if (!state.normalized) throw Error("denormalize: state is not normalized");
  if (stats.size() != state.channels) throw Error("denormalize: stats/channel mismatch");
  StateField out = state;
  for (std::size_t c = 0; c < state.channels; ++c) {
    const double mu = stats.mean[c], sd = stats.std[c];
    for (double& v : out.channel(c)) v = v * sd + mu;
  }
  out.normalized = false;
  return out;
}

/// Log transform for skewed precipitation: 10 log10(1 + 200 tp^1.6).
inline double tp_transform(double tp) {
  if (tp < 0.0 || std::isnan(tp)) throw Error("tp_transform: precipitation must be non-negative");
  return 10.0 * std::log1p(200.0 * std::pow(tp, 1.6)) / std::numbers::ln10;
}

inline double tp_inverse(double y) {
  if (y < 0.0 || std::isnan(y)) throw Error("tp_inverse: transformed precipitation must be non-negative");
  return std::pow(std::expm1(y * std::numbers::ln10 / 10.0) / 200.0, 1.0 / 1.6);
}

/// Applies tp_transform to the "TP" channel if the registry has one.
inline void apply_tp_transform(StateField& state, const VariableRegistry& reg) {
  if (auto c = reg.find_surface("TP")) {
    for (double& v : state.channel(*c)) v = tp_transform(v);
  }
}

inline void apply_tp_inverse(StateField& state, const VariableRegistry& reg) {
  if (auto c = reg.find_surface("TP")) {
    for (double& v : state.channel(*c)) v = tp_inverse(std::fmax(v, 0.0));
  }
}

}  // namespace flowcast
