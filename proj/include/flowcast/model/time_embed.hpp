#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "flowcast/core/error.hpp"

namespace flowcast::model {

/// Flow time is multiplied by this before the frequency ladder so that the
/// six Euler substeps of a block land on well-separated phases.
inline constexpr double kTimeScale = 1000.0;

/// [sin(s t f_0), ..., sin(s t f_{h-1}), cos(s t f_0), ..., cos(s t f_{h-1})]
/// with f_i = 10000^(-i/h), h = dim / 2.
inline std::vector<double> sinusoidal_time_embed(double t, std::size_t dim, double scale = kTimeScale) {
  if (dim == 0 || dim % 2 != 0) throw ConfigError("sinusoidal_time_embed: dim must be even and positive");
  const std::size_t half = dim / 2;
  std::vector<double> out(dim);
  for (std::size_t i = 0; i < half; ++i) {
    const double f = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
    out[i] = std::sin(scale * t * f);
    out[half + i] = std::cos(scale * t * f);
  }
  return out;
}

}  // namespace flowcast::model
