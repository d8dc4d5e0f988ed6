#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "flowcast/core/error.hpp"
#include "flowcast/core/state.hpp"
#include "flowcast/core/time.hpp"

namespace flowcast::ode {

struct RolloutConfig {
  std::size_t steps_per_block = 6;
  double delta_t = 1.0 / 6.0;
  std::size_t horizon_hours = 6;
  /// Recompute clock conditioning at every hourly substep rather than once per block.
  bool update_clock = true;

  void validate() const {
    if (steps_per_block == 0) throw ConfigError("RolloutConfig: steps_per_block must be positive");
    if (std::abs(static_cast<double>(steps_per_block) * delta_t - 1.0) > 1e-12) {
      throw ConfigError("RolloutConfig: steps_per_block * delta_t must equal 1");
    }
  }
};

/// v(x, t, hour): velocity at flow time t for the state valid `hour` hours after
/// the rollout's initial time.
using VelocityFn = std::function<std::vector<double>(std::span<const double>, double, std::size_t)>;

/// Single explicit Euler step x + dt * v(x, t, hour). The rollout is written
/// against this so another one-step scheme could replace it.
using StepFn = std::function<std::vector<double>(const VelocityFn&, std::span<const double>, double t, double dt, std::size_t hour)>;

inline std::vector<double> euler_step(const VelocityFn& v, std::span<const double> x, double t, double dt, std::size_t hour) {
  const auto d = v(x, t, hour);
  if (d.size() != x.size()) throw Error("euler_step: velocity size does not match state");
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + dt * d[i];
  return y;
}

inline void require_finite_state(std::span<const double> x, std::size_t step) {
  for (double v : x) {
    if (!std::isfinite(v)) throw NumericalError("non-finite state at rollout step " + std::to_string(step));
  }
}

/// One block from x_k: n = 1..steps, X_{k+n} = X_{k+n-1} + dt * v(X_{k+n-1}, (n-1) dt).
/// `first_hour` is the hour index of x_k; `steps` may be shorter than a full block.
inline std::vector<std::vector<double>> euler_block(const VelocityFn& v, std::span<const double> x0, std::size_t first_hour,
                                                    const RolloutConfig& cfg, std::size_t steps = 0,
                                                    const StepFn& step = euler_step) {
  cfg.validate();
  if (steps == 0) steps = cfg.steps_per_block;
  std::vector<std::vector<double>> out;
  out.reserve(steps);
  std::vector<double> x(x0.begin(), x0.end());
  for (std::size_t n = 1; n <= steps; ++n) {
    const double t = static_cast<double>(n - 1) / static_cast<double>(cfg.steps_per_block);
    x = step(v, x, t, cfg.delta_t, first_hour + n - 1);
    require_finite_state(x, first_hour + n);
    out.push_back(x);
  }
  return out;
}

/// Chains blocks to the horizon, flow time restarting at 0 in each block. A
/// horizon that is not a whole number of blocks ends with a truncated block.
inline std::vector<std::vector<double>> rollout(const VelocityFn& v, std::span<const double> x0, const RolloutConfig& cfg,
                                                const StepFn& step = euler_step) {
  cfg.validate();
  std::vector<std::vector<double>> out;
  out.reserve(cfg.horizon_hours);
  std::vector<double> x(x0.begin(), x0.end());
  std::size_t hour = 0;
  while (hour < cfg.horizon_hours) {
    const std::size_t steps = std::min(cfg.steps_per_block, cfg.horizon_hours - hour);
    auto block = euler_block(v, x, hour, cfg, steps, step);
    x = block.back();
    for (auto& s : block) out.push_back(std::move(s));
    hour += steps;
  }
  return out;
}

/// Rolls out StateFields, stamping each output with its valid time.
inline std::vector<StateField> rollout_states(const VelocityFn& v, const StateField& x0, const RolloutConfig& cfg) {
  const auto raw = rollout(v, x0.values, cfg);
  std::vector<StateField> out;
  out.reserve(raw.size());
  for (std::size_t h = 0; h < raw.size(); ++h) {
    StateField s(x0.channels, x0.n_lat, x0.n_lon, x0.time + std::chrono::hours(h + 1), x0.normalized);
    s.values = raw[h];
    out.push_back(std::move(s));
  }
  return out;
}

struct ConvergenceRow {
  double dt = 0;
  double error = 0;
};

struct ConvergenceResult {
  std::vector<ConvergenceRow> rows;
  /// Least-squares slope of log(error) against log(dt); NaN when any error is zero.
  double slope = 0;
};

/// Integrates dx/dt = f(x, t) from t = 0 to 1 with explicit Euler at each dt
/// and reports the max-norm error against the exact solution at t = 1.
inline ConvergenceResult solve_convergence_probe(const std::function<std::vector<double>(std::span<const double>, double)>& f,
                                                 std::span<const double> x0, const std::vector<double>& exact_at_1,
                                                 const std::vector<double>& dt_list) {
  ConvergenceResult res;
  for (double dt : dt_list) {
    const auto n = static_cast<std::size_t>(std::llround(1.0 / dt));
    if (n == 0 || std::abs(static_cast<double>(n) * dt - 1.0) > 1e-12) throw ConfigError("convergence probe: 1/dt must be an integer");
    std::vector<double> x(x0.begin(), x0.end());
    for (std::size_t k = 0; k < n; ++k) {
      const auto d = f(x, static_cast<double>(k) * dt);
      for (std::size_t i = 0; i < x.size(); ++i) x[i] += dt * d[i];
    }
    double err = 0;
    for (std::size_t i = 0; i < x.size(); ++i) err = std::max(err, std::abs(x[i] - exact_at_1[i]));
    res.rows.push_back({dt, err});
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  bool degenerate = false;
  for (const auto& r : res.rows) {
    if (!(r.error > 0)) degenerate = true;
    const double lx = std::log(r.dt), ly = std::log(r.error);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double n = static_cast<double>(res.rows.size());
  res.slope = degenerate || res.rows.size() < 2 ? std::nan("") : (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return res;
}

}  // namespace flowcast::ode
