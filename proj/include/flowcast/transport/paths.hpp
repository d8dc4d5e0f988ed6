#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "flowcast/core/error.hpp"

namespace flowcast::transport {

enum class PathKind { OptimalTransport, DynamicTransport };

struct PathParams {
  PathKind kind = PathKind::DynamicTransport;
  double sigma_min = 0.0;

  /// sigma_min = 0 is only meaningful for the data-to-data path; the Gaussian
  /// path needs a positive floor to stay a proper density at t = 1.
  void validate() const {
    if (!(sigma_min >= 0.0)) throw Error("PathParams: sigma_min must be >= 0");
    if (kind == PathKind::OptimalTransport && sigma_min == 0.0) {
      throw Error("PathParams: sigma_min = 0 is only allowed for the dynamic transport path");
    }
  }
};

/// One flow-matching regression example.
struct PathSample {
  std::vector<double> x_t;
  double t = 0.0;
  std::vector<double> u_target;
};

namespace detail {
inline void check_args(std::size_t a, std::size_t b, double t, double sigma_min) {
  if (a != b) throw Error("path sample: shape mismatch");
  if (!(t >= 0.0 && t <= 1.0)) throw Error("path sample: t must lie in [0, 1]");
  if (!(sigma_min >= 0.0)) throw Error("path sample: sigma_min must be >= 0");
}
}  // namespace detail

/// Gaussian-to-data linear path:
///   x_t = t x1 + (1 - (1 - sigma_min) t) x_noise,  u = x1 - (1 - sigma_min) x_noise.
inline PathSample ot_path_sample(std::span<const double> x_noise, std::span<const double> x1, double t,
                                 double sigma_min) {
  detail::check_args(x_noise.size(), x1.size(), t, sigma_min);
  const double sigma_t = 1.0 - (1.0 - sigma_min) * t;
  const double slope = 1.0 - sigma_min;
  PathSample s{std::vector<double>(x1.size()), t, std::vector<double>(x1.size())};
  for (std::size_t i = 0; i < x1.size(); ++i) {
    s.x_t[i] = t * x1[i] + sigma_t * x_noise[i];
    s.u_target[i] = x1[i] - slope * x_noise[i];
  }
  return s;
}

/// Data-to-data path starting from the previous state:
///   x_t = t x1 + (1 - t) x0 + sigma_min * noise,  u = x1 - x0 (independent of t).
inline PathSample dynamic_path_sample(std::span<const double> x0, std::span<const double> x1, double t,
                                      double sigma_min, std::optional<std::span<const double>> noise = {}) {
  detail::check_args(x0.size(), x1.size(), t, sigma_min);
  if (sigma_min > 0.0 && !noise) throw Error("dynamic_path_sample: noise required when sigma_min > 0");
  if (noise && noise->size() != x0.size()) throw Error("dynamic_path_sample: noise shape mismatch");
  PathSample s{std::vector<double>(x1.size()), t, std::vector<double>(x1.size())};
  for (std::size_t i = 0; i < x1.size(); ++i) {
    s.x_t[i] = t * x1[i] + (1.0 - t) * x0[i];
    if (sigma_min > 0.0) s.x_t[i] += sigma_min * (*noise)[i];
    s.u_target[i] = x1[i] - x0[i];
  }
  return s;
}

}  // namespace flowcast::transport
