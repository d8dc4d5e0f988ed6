#pragma once

#include <cmath>
#include <cstddef>

#include "flowcast/core/error.hpp"
#include "flowcast/core/grid.hpp"
#include "flowcast/core/state.hpp"

namespace flowcast::diag {

/// sqrt(mean_ij w_lat(i) (f - t)^2) for one channel, w_lat with unit mean.
inline double weighted_rmse(const StateField& forecast, const StateField& truth, const GridSpec& grid, std::size_t channel) {
  if (!forecast.same_shape(truth) || forecast.n_lat != grid.n_lat() || forecast.n_lon != grid.n_lon()) {
    throw Error("weighted_rmse: forecast, truth and grid disagree");
  }
  if (channel >= forecast.channels) throw Error("weighted_rmse: channel out of range");
  const auto w = latitude_weights(grid);
  double acc = 0;
  for (std::size_t i = 0; i < grid.n_lat(); ++i)
    for (std::size_t j = 0; j < grid.n_lon(); ++j) {
      const double d = forecast.at(channel, i, j) - truth.at(channel, i, j);
      acc += w[i] * d * d;
    }
  return std::sqrt(acc / static_cast<double>(grid.size()));
}

}  // namespace flowcast::diag
