#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "flowcast/core/error.hpp"

namespace flowcast {

inline constexpr double kDegToRad = std::numbers::pi / 180.0;

/// Regular latitude-longitude grid. Latitudes are monotone (either direction);
/// longitudes start anywhere in [0, 360) and are uniformly spaced.
class GridSpec {
 public:
  GridSpec(std::vector<double> latitudes, std::vector<double> longitudes)
      : lat_(std::move(latitudes)), lon_(std::move(longitudes)) {
    validate();
  }

  /// Rows from 90 to -90 inclusive of both poles (the ERA5 181x360 layout at 1 degree).
  static GridSpec with_poles(std::size_t n_lat, std::size_t n_lon) {
    std::vector<double> lat(n_lat);
    for (std::size_t i = 0; i < n_lat; ++i) {
      lat[i] = 90.0 - 180.0 * static_cast<double>(i) / static_cast<double>(n_lat - 1);
    }
    return GridSpec(std::move(lat), uniform_longitudes(n_lon));
  }

  /// Cell-centred rows that exclude the poles, north to south.
  static GridSpec without_poles(std::size_t n_lat, std::size_t n_lon) {
    std::vector<double> lat(n_lat);
    const double d = 180.0 / static_cast<double>(n_lat);
    for (std::size_t i = 0; i < n_lat; ++i) lat[i] = 90.0 - d * (static_cast<double>(i) + 0.5);
    return GridSpec(std::move(lat), uniform_longitudes(n_lon));
  }

  static std::vector<double> uniform_longitudes(std::size_t n_lon) {
    std::vector<double> lon(n_lon);
    for (std::size_t j = 0; j < n_lon; ++j) {
      lon[j] = 360.0 * static_cast<double>(j) / static_cast<double>(n_lon);
    }
    return lon;
  }

  std::size_t n_lat() const { return lat_.size(); }
  std::size_t n_lon() const { return lon_.size(); }
  std::size_t size() const { return lat_.size() * lon_.size(); }
  const std::vector<double>& latitudes() const { return lat_; }
  const std::vector<double>& longitudes() const { return lon_; }
  double lat(std::size_t i) const { return lat_[i]; }
  double lon(std::size_t j) const { return lon_[j]; }
  double dlon_deg() const { return 360.0 / static_cast<double>(lon_.size()); }

  bool operator==(const GridSpec&) const = default;

 private:
  void validate() const {
    if (lat_.size() < 2) throw Error("GridSpec: need at least 2 latitude rows");
    if (lon_.size() < 4) throw Error("GridSpec: need at least 4 longitude columns");
    const bool increasing = lat_[1] > lat_[0];
    for (std::size_t i = 0; i < lat_.size(); ++i) {
      if (!(lat_[i] >= -90.0 && lat_[i] <= 90.0)) throw Error("GridSpec: latitude out of [-90, 90]");
      if (i > 0 && ((lat_[i] > lat_[i - 1]) != increasing || lat_[i] == lat_[i - 1])) {
        throw Error("GridSpec: latitudes must be strictly monotone");
      }
    }
    const double step = 360.0 / static_cast<double>(lon_.size());
    for (std::size_t j = 0; j < lon_.size(); ++j) {
      if (!(lon_[j] >= 0.0 && lon_[j] < 360.0)) throw Error("GridSpec: longitude out of [0, 360)");
      if (std::abs(lon_[j] - (lon_[0] + step * static_cast<double>(j))) > 1e-9) {
        throw Error("GridSpec: longitudes must be uniformly spaced around the full circle");
      }
    }
  }

  std::vector<double> lat_;
  std::vector<double> lon_;
};

/// Area weight per latitude row, normalised so that the mean over all grid
/// points is 1. Each row owns the band between the midpoints to its
/// neighbours; end rows extend half a spacing outward, clipped at the poles,
/// so a pole row gets the area of its half cell and interior rows of a uniform
/// grid come out proportional to cos(latitude).
inline std::vector<double> latitude_weights(std::span<const double> latitudes) {
  const std::size_t n = latitudes.size();
  if (n == 0) throw Error("latitude_weights: empty latitude list");
  if (n == 1) return {1.0};
  auto clip = [](double deg) { return std::fmin(90.0, std::fmax(-90.0, deg)); };
  std::vector<double> edges(n + 1);
  for (std::size_t i = 1; i < n; ++i) edges[i] = 0.5 * (latitudes[i - 1] + latitudes[i]);
  edges[0] = clip(latitudes[0] - 0.5 * (latitudes[1] - latitudes[0]));
  edges[n] = clip(latitudes[n - 1] + 0.5 * (latitudes[n - 1] - latitudes[n - 2]));
  std::vector<double> w(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = std::abs(std::sin(edges[i + 1] * kDegToRad) - std::sin(edges[i] * kDegToRad));
    total += w[i];
  }
  const double mean = total / static_cast<double>(n);
  for (double& v : w) v /= mean;
  return w;
}

inline std::vector<double> latitude_weights(const GridSpec& grid) {
  return latitude_weights(std::span<const double>(grid.latitudes()));
}

}  // namespace flowcast
