#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "flowcast/core/error.hpp"
#include "flowcast/core/grid.hpp"
#include "flowcast/core/registry.hpp"
#include "flowcast/core/time.hpp"

namespace flowcast {

/// Physical (or normalised) atmospheric state at one timestamp, stored C x H x W row-major.
struct StateField {
  std::size_t channels = 0;
  std::size_t n_lat = 0;
  std::size_t n_lon = 0;
  std::vector<double> values;
  Timestamp time{};
  bool normalized = false;

  StateField() = default;
  StateField(std::size_t c, std::size_t h, std::size_t w, Timestamp ts = {}, bool norm = false)
      : channels(c), n_lat(h), n_lon(w), values(c * h * w, 0.0), time(ts), normalized(norm) {}

  static StateField like(const VariableRegistry& reg, const GridSpec& grid, Timestamp ts = {}) {
    return StateField(reg.n_channels(), grid.n_lat(), grid.n_lon(), ts);
  }

  std::size_t plane() const { return n_lat * n_lon; }
  std::size_t size() const { return values.size(); }

  double& at(std::size_t c, std::size_t i, std::size_t j) { return values[(c * n_lat + i) * n_lon + j]; }
  double at(std::size_t c, std::size_t i, std::size_t j) const { return values[(c * n_lat + i) * n_lon + j]; }

  std::span<double> channel(std::size_t c) { return {values.data() + c * plane(), plane()}; }
  std::span<const double> channel(std::size_t c) const { return {values.data() + c * plane(), plane()}; }

  bool same_shape(const StateField& o) const {
    return channels == o.channels && n_lat == o.n_lat && n_lon == o.n_lon;
  }

  void check_shape(const VariableRegistry& reg, const GridSpec& grid) const {
    if (channels != reg.n_channels() || n_lat != grid.n_lat() || n_lon != grid.n_lon()) {
      throw Error("StateField: shape does not match registry/grid");
    }
  }

  bool all_finite() const {
    for (double v : values) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }
};

}  // namespace flowcast
