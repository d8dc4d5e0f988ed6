#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "flowcast/core/dataset.hpp"
#include "flowcast/core/error.hpp"
#include "flowcast/core/grid.hpp"
#include "flowcast/core/registry.hpp"

namespace flowcast::train {

/// Latitude, level and variable weights shared by both training losses.
struct WeightScheme {
  std::vector<double> w_lat;  // per latitude row, unit mean
  std::vector<double> w_lev;  // per channel
  std::vector<double> w_var;  // per channel

  /// w_lat(i) * w_lev(c) * w_var(c) laid out as C x H x W.
  std::vector<double> field(std::size_t n_lon) const {
    const std::size_t C = w_lev.size(), H = w_lat.size();
    if (w_var.size() != C) throw Error("WeightScheme: w_lev and w_var lengths differ");
    std::vector<double> w(C * H * n_lon);
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < n_lon; ++j) w[(c * H + i) * n_lon + j] = w_lat[i] * w_lev[c] * w_var[c];
    return w;
  }

  template <typename T>
  std::shared_ptr<const std::vector<T>> field_as(std::size_t n_lon) const {
    const auto f = field(n_lon);
    return std::make_shared<const std::vector<T>>(f.begin(), f.end());
  }
};

/// Lead-time weight (1 + tau/24)^(-1/2), tau in hours.
inline double w_tau(double tau_hours) { return 1.0 / std::sqrt(1.0 + tau_hours / 24.0); }

/// Pressure channels get p / mean(p over the registry's levels); surface
/// channels get 1; the result is rescaled to unit mean over all channels.
inline std::vector<double> level_weights(const VariableRegistry& reg) {
  const auto& levels = reg.levels();
  double pmean = 0;
  for (double p : levels) pmean += p;
  if (!levels.empty()) pmean /= static_cast<double>(levels.size());
  std::vector<double> w;
  for (const auto& ch : reg.channels()) w.push_back(ch.level ? *ch.level / pmean : 1.0);
  double m = 0;
  for (double v : w) m += v;
  m /= static_cast<double>(w.size());
  for (double& v : w) v /= m;
  return w;
}

/// 1 / Var of (X_{k+lag} - X_k) per channel over every pair in the dataset,
/// where k runs over states whose UTC hour is a multiple of `align_hours`.
/// Population variance over pairs and grid points. States must be normalized.
inline std::vector<double> compute_w_var(const Dataset& ds, int lag_hours = 6, int align_hours = 6) {
  const std::size_t C = ds.registry.n_channels();
  std::vector<double> sum(C, 0.0), sq(C, 0.0);
  std::size_t pairs = 0;
  for (const auto& s : ds.states) {
    if (utc_hour(s.time) % align_hours != 0) continue;
    const auto j = ds.index_of(s.time + std::chrono::hours(lag_hours));
    if (!j) continue;
    if (!s.normalized) throw Error("compute_w_var: states must be normalized");
    const auto& e = ds.states[*j];
    for (std::size_t c = 0; c < C; ++c) {
      const auto a = s.channel(c), b = e.channel(c);
      for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = b[k] - a[k];
        sum[c] += d;
        sq[c] += d * d;
      }
    }
    ++pairs;
  }
  if (pairs < 2) throw Error("compute_w_var: need at least two " + std::to_string(lag_hours) + "-hour pairs");
  const double n = static_cast<double>(pairs * ds.grid.size());
  const auto chans = ds.registry.channels();
  std::vector<double> w(C);
  for (std::size_t c = 0; c < C; ++c) {
    const double mean = sum[c] / n;
    const double var = sq[c] / n - mean * mean;
    if (!(var > 1e-300) || !std::isfinite(var)) throw Error("compute_w_var: channel " + chans[c].name + " has no temporal variance");
    w[c] = 1.0 / var;
  }
  return w;
}

inline WeightScheme make_weights(const Dataset& ds, int lag_hours = 6, int align_hours = 6) {
  return {latitude_weights(ds.grid), level_weights(ds.registry), compute_w_var(ds, lag_hours, align_hours)};
}

}  // namespace flowcast::train
