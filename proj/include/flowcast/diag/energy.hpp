#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "flowcast/core/error.hpp"
#include "flowcast/core/grid.hpp"
#include "flowcast/core/registry.hpp"
#include "flowcast/core/state.hpp"
#include "flowcast/core/time.hpp"

namespace flowcast::diag {

inline constexpr double kGravity = 9.80665;      // m s^-2
inline constexpr double kCv = 718.0;             // J kg^-1 K^-1
inline constexpr double kLv0 = 2.501e6;          // J kg^-1
inline constexpr double kLvSlope = 2361.0;       // J kg^-1 K^-1
inline constexpr double kBottomPressureHpa = 1000.0;

/// Latent heat of vaporisation, linear in temperature (Celsius).
inline double latent_heat(double t_celsius) { return kLv0 - kLvSlope * t_celsius; }

/// k = (u^2 + v^2) / 2, J kg^-1.
inline double kinetic_density(double u, double v) { return 0.5 * (u * u + v * v); }

/// Column energy terms in J m^-2.
struct EnergyBudget {
  double internal = 0, latent = 0, potential = 0, kinetic = 0;
  Timestamp time{};
  double total() const { return internal + latent + potential + kinetic; }
};

/// (1/g) * integral of a profile over pressure from the top level to 1000 hPa.
/// Trapezoid between levels; below the lowest level the profile is held at
/// its lowest value. Levels in hPa, increasing.
inline double column_integral(const std::vector<double>& levels_hpa, const std::vector<double>& profile) {
  if (levels_hpa.size() != profile.size() || levels_hpa.empty()) throw Error("column_integral: bad profile");
  double acc = 0;
  for (std::size_t k = 1; k < levels_hpa.size(); ++k)
    acc += 0.5 * (profile[k] + profile[k - 1]) * (levels_hpa[k] - levels_hpa[k - 1]) * 100.0;
  if (levels_hpa.back() < kBottomPressureHpa) acc += profile.back() * (kBottomPressureHpa - levels_hpa.back()) * 100.0;
  return acc / kGravity;
}

namespace detail {

inline std::vector<std::size_t> level_channels(const VariableRegistry& reg, const std::string& var) {
  std::vector<std::size_t> out;
  for (double p : reg.levels()) {
    const auto c = reg.find_pressure(var, p);
    if (!c) throw ConfigError("energy diagnostics need " + var + " on every pressure level");
    out.push_back(*c);
  }
  return out;
}

inline double area_mean(const std::vector<double>& column, const GridSpec& grid) {
  const auto w = latitude_weights(grid);
  double acc = 0;
  for (std::size_t i = 0; i < grid.n_lat(); ++i)
    for (std::size_t j = 0; j < grid.n_lon(); ++j) acc += w[i] * column[i * grid.n_lon() + j];
  return acc / static_cast<double>(grid.size());
}

}  // namespace detail

/// Pointwise column terms (each H x W, J m^-2). Needs T (K), Q (kg/kg),
/// Z (m^2 s^-2), U and V (m/s) on every pressure level, physical units.
struct EnergyColumns {
  std::vector<double> internal, latent, potential, kinetic;
};

inline EnergyColumns energy_columns(const StateField& s, const VariableRegistry& reg, const GridSpec& grid) {
  if (s.normalized) throw Error("energy diagnostics need physical units");
  s.check_shape(reg, grid);
  if (reg.levels().empty()) throw ConfigError("energy diagnostics need pressure levels");
  const auto T = detail::level_channels(reg, "T"), Q = detail::level_channels(reg, "Q"), Z = detail::level_channels(reg, "Z"),
             U = detail::level_channels(reg, "U"), V = detail::level_channels(reg, "V");
  const std::size_t L = reg.levels().size(), P = grid.size();
  EnergyColumns out;
  for (auto* v : {&out.internal, &out.latent, &out.potential, &out.kinetic}) v->resize(P);
  std::vector<double> pi(L), pl(L), pp(L), pk(L);
  for (std::size_t q = 0; q < P; ++q) {
    for (std::size_t k = 0; k < L; ++k) {
      const double tc = s.values[T[k] * P + q] - 273.15, hum = s.values[Q[k] * P + q];
      const double u = s.values[U[k] * P + q], v = s.values[V[k] * P + q];
      pi[k] = (1.0 - hum) * kCv * tc;
      pl[k] = latent_heat(tc) * hum;
      pp[k] = s.values[Z[k] * P + q];
      pk[k] = kinetic_density(u, v);
    }
    out.internal[q] = column_integral(reg.levels(), pi);
    out.latent[q] = column_integral(reg.levels(), pl);
    out.potential[q] = column_integral(reg.levels(), pp);
    out.kinetic[q] = column_integral(reg.levels(), pk);
  }
  return out;
}

/// Area-weighted domain means of the four column terms.
inline EnergyBudget energy_components(const StateField& s, const VariableRegistry& reg, const GridSpec& grid) {
  const auto c = energy_columns(s, reg, grid);
  EnergyBudget b;
  b.internal = detail::area_mean(c.internal, grid);
  b.latent = detail::area_mean(c.latent, grid);
  b.potential = detail::area_mean(c.potential, grid);
  b.kinetic = detail::area_mean(c.kinetic, grid);
  b.time = s.time;
  for (double v : {b.internal, b.latent, b.potential, b.kinetic})
    if (!std::isfinite(v)) throw NumericalError("energy diagnostics: non-finite result");
  return b;
}

/// Area-weighted column kinetic energy; needs only U and V on the levels.
inline double domain_kinetic_energy(const StateField& s, const VariableRegistry& reg, const GridSpec& grid) {
  if (s.normalized) throw Error("energy diagnostics need physical units");
  s.check_shape(reg, grid);
  if (reg.levels().empty()) throw ConfigError("kinetic energy needs pressure levels");
  const auto U = detail::level_channels(reg, "U"), V = detail::level_channels(reg, "V");
  const std::size_t L = reg.levels().size(), P = grid.size();
  std::vector<double> col(P), pk(L);
  for (std::size_t q = 0; q < P; ++q) {
    for (std::size_t k = 0; k < L; ++k) {
      const double u = s.values[U[k] * P + q], v = s.values[V[k] * P + q];
      pk[k] = kinetic_density(u, v);
    }
    col[q] = column_integral(reg.levels(), pk);
  }
  return detail::area_mean(col, grid);
}

}  // namespace flowcast::diag
