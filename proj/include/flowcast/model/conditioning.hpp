#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "flowcast/core/error.hpp"
#include "flowcast/core/grid.hpp"
#include "flowcast/core/time.hpp"

namespace flowcast::model {

/// Clock channels appended after the statics.
inline const std::vector<std::string>& clock_channel_names() {
  static const std::vector<std::string> names = {"SIN_LAT",  "COS_LAT",  "SIN_LON", "COS_LON",
                                                 "SIN_LTOD", "COS_LTOD", "SIN_DOY", "COS_DOY"};
  return names;
}

inline std::size_t conditioning_channels(std::size_t n_static) { return n_static + clock_channel_names().size(); }

/// Conditioning planes for one valid time: statics (already scaled), then
/// sin/cos of latitude, longitude, local time of day and year fraction.
/// Local time advances with longitude, 15 degrees per hour.
inline std::vector<double> build_conditioning(const GridSpec& grid, std::span<const double> statics, std::size_t n_static,
                                              Timestamp time) {
  const std::size_t hw = grid.size(), H = grid.n_lat(), W = grid.n_lon();
  if (statics.size() != n_static * hw) throw Error("build_conditioning: static field size mismatch");
  std::vector<double> out(conditioning_channels(n_static) * hw);
  std::copy(statics.begin(), statics.end(), out.begin());
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double day = day_fraction(time), year = year_fraction(time);
  double* p = out.data() + n_static * hw;
  for (std::size_t i = 0; i < H; ++i) {
    const double phi = grid.lat(i) * kDegToRad;
    for (std::size_t j = 0; j < W; ++j) {
      const double lam = grid.lon(j) * kDegToRad;
      double local = day + grid.lon(j) / 360.0;
      local -= std::floor(local);
      const std::size_t k = i * W + j;
      p[0 * hw + k] = std::sin(phi);
      p[1 * hw + k] = std::cos(phi);
      p[2 * hw + k] = std::sin(lam);
      p[3 * hw + k] = std::cos(lam);
      p[4 * hw + k] = std::sin(two_pi * local);
      p[5 * hw + k] = std::cos(two_pi * local);
      p[6 * hw + k] = std::sin(two_pi * year);
      p[7 * hw + k] = std::cos(two_pi * year);
    }
  }
  return out;
}

}  // namespace flowcast::model
