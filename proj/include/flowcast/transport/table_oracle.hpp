#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "flowcast/transport/paths.hpp"

namespace flowcast::transport {

/// Per-element Gaussian conditional path p_t(x|x1) = N(mu_t, sigma_t^2), with
/// the time derivatives of mu and sigma. Evaluated cell by cell from the path
/// definitions, independent of the closed forms in paths.hpp.
struct GaussianPathCell {
  double mu, sigma, dmu, dsigma;

  double psi(double x) const { return sigma * x + mu; }
  /// u_t(x|x1) = sigma'/sigma (x - mu) + mu'.
  double velocity(double x) const {
    if (dsigma == 0.0) return dmu;
    return dsigma / sigma * (x - mu) + dmu;
  }
};

inline GaussianPathCell ot_cell(double x1, double t, double sigma_min) {
  return {t * x1, 1.0 - (1.0 - sigma_min) * t, x1, -(1.0 - sigma_min)};
}

inline GaussianPathCell dt_cell(double x0, double x1, double t, double sigma_min) {
  return {t * x1 + (1.0 - t) * x0, sigma_min, x1 - x0, 0.0};
}

struct TableCheck {
  bool agree = true;
  double max_abs_error = 0.0;
  std::size_t cases = 0;
};

/// Compares ot_path_sample and dynamic_path_sample against every cell of the
/// OT / dynamic transport summary table on random inputs.
inline TableCheck path_tables_agree(std::size_t trials = 100, std::size_t dim = 8, std::uint64_t seed = 1,
                                    double tol = 1e-12) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  TableCheck out;
  auto track = [&](double a, double b) {
    const double e = std::abs(a - b);
    out.max_abs_error = std::max(out.max_abs_error, e);
    if (!(e <= tol)) out.agree = false;
  };
  for (std::size_t trial = 0; trial < trials; ++trial) {
    std::vector<double> x0(dim), x1(dim), noise(dim);
    for (auto* v : {&x0, &x1, &noise}) {
      for (double& e : *v) e = normal(rng);
    }
    // t < 1 keeps the OT conditional density non-degenerate when sigma_min is tiny.
    const double t = 0.99 * unit(rng);
    const double sigma_min = trial % 4 == 0 ? 0.0 : unit(rng);

    const auto ot = ot_path_sample(noise, x1, t, sigma_min);
    const auto dt = dynamic_path_sample(x0, x1, t, sigma_min, std::span<const double>(noise));
    for (std::size_t i = 0; i < dim; ++i) {
      const auto oc = ot_cell(x1[i], t, sigma_min);
      track(oc.mu, t * x1[i]);
      track(oc.sigma, 1.0 - (1.0 - sigma_min) * t);
      track(ot.x_t[i], oc.psi(noise[i]));
      track(ot.u_target[i], oc.velocity(oc.psi(noise[i])));
      // Closed form of u_t(x|x1) at an arbitrary x against the generic Gaussian velocity.
      const double x = normal(rng);
      track((x1[i] - (1.0 - sigma_min) * x) / (1.0 - (1.0 - sigma_min) * t), oc.velocity(x));
      track(ot.u_target[i], x1[i] - (1.0 - sigma_min) * noise[i]);

      const auto dc = dt_cell(x0[i], x1[i], t, sigma_min);
      track(dc.sigma, sigma_min);
      track(dt.x_t[i], dc.psi(noise[i]));
      track(dt.u_target[i], dc.velocity(dc.psi(noise[i])));
      track(dt.u_target[i], x1[i] - x0[i]);
    }
    ++out.cases;
  }
  return out;
}

}  // namespace flowcast::transport
