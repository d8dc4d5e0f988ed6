#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <mutex>
#include <span>
#include <vector>

#include "flowcast/core/error.hpp"
#include "flowcast/core/grid.hpp"

namespace flowcast::diag {

/// Energy per zonal wavenumber 0..W/2, averaged over the rows in the band.
/// Normalisation: with F_m = (1/W) sum_j f_j exp(-2 pi i m j / W), energy(0) =
/// |F_0|^2, energy(m) = 2|F_m|^2 for 0 < m < W/2 and energy(W/2) = |F_{W/2}|^2
/// when W is even, so the energies sum to the longitude mean of f^2.
struct SpectrumResult {
  std::vector<int> wavenumbers;
  std::vector<double> energy;
  double lat_min = -60, lat_max = 60;
  std::size_t rows = 0;
  static constexpr const char* kNormalization = "sum_m energy(m) = mean_lon(f^2), band mean";
};

namespace detail {
// FFTW's planner is not thread-safe.
inline std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

inline SpectrumResult zonal_power_spectrum(std::span<const double> field, const GridSpec& grid, double lat_min = -60.0,
                                           double lat_max = 60.0) {
  const std::size_t H = grid.n_lat(), W = grid.n_lon();
  if (field.size() != H * W) throw Error("zonal_power_spectrum: field does not match grid");
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < H; ++i)
    if (grid.lat(i) >= lat_min && grid.lat(i) <= lat_max) rows.push_back(i);
  if (rows.empty()) throw Error("zonal_power_spectrum: no latitudes in band");

  const std::size_t nc = W / 2 + 1;
  std::vector<double> in(W);
  std::vector<std::complex<double>> out(nc);
  fftw_plan plan;
  {
    std::lock_guard lock(detail::fftw_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(W), in.data(), reinterpret_cast<fftw_complex*>(out.data()), FFTW_ESTIMATE);
  }
  SpectrumResult r;
  r.lat_min = lat_min;
  r.lat_max = lat_max;
  r.rows = rows.size();
  r.energy.assign(nc, 0.0);
  for (std::size_t m = 0; m < nc; ++m) r.wavenumbers.push_back(static_cast<int>(m));
  const double inv_w = 1.0 / static_cast<double>(W);
  for (std::size_t i : rows) {
    std::copy(field.begin() + static_cast<std::ptrdiff_t>(i * W), field.begin() + static_cast<std::ptrdiff_t>((i + 1) * W), in.begin());
    fftw_execute(plan);
    for (std::size_t m = 0; m < nc; ++m) {
      const double mag = std::norm(out[m] * inv_w);
      const bool single = m == 0 || (W % 2 == 0 && m == W / 2);
      r.energy[m] += single ? mag : 2.0 * mag;
    }
  }
  {
    std::lock_guard lock(detail::fftw_mutex());
    fftw_destroy_plan(plan);
  }
  for (double& e : r.energy) e /= static_cast<double>(rows.size());
  return r;
}

}  // namespace flowcast::diag
