#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "flowcast/core/dataset.hpp"
#include "flowcast/model/conditioning.hpp"
#include "flowcast/model/velocity_net.hpp"
#include "flowcast/ode/rollout.hpp"

namespace flowcast::ode {

/// Adapts a network to a VelocityFn. Conditioning is built for the valid
/// time of the state being stepped, or for the block start when clock updates
/// are off. `evaluations`, if given, counts network calls.
template <typename T>
VelocityFn model_velocity(const model::VelocityNet<T>& net, const GridSpec& grid, std::vector<double> statics, std::size_t n_static,
                          Timestamp init, const RolloutConfig& cfg, std::size_t* evaluations = nullptr) {
  auto st = std::make_shared<const std::vector<double>>(std::move(statics));
  return [&net, grid, st, n_static, init, cfg, evaluations](std::span<const double> x, double t, std::size_t hour) {
    const std::size_t clock_hour = cfg.update_clock ? hour : hour / cfg.steps_per_block * cfg.steps_per_block;
    const auto cond = model::build_conditioning(grid, *st, n_static, init + std::chrono::hours(clock_hour));
    std::vector<T> xs(x.begin(), x.end()), cs(cond.begin(), cond.end());
    const auto v = net.evaluate(xs, t, cs);
    if (evaluations) ++*evaluations;
    return std::vector<double>(v.begin(), v.end());
  };
}

/// Writes a forecast in the dataset format, converted back to physical units,
/// with the initial time, horizon, checkpoint fingerprint and evaluation count
/// recorded in the manifest.
inline void write_forecast(const std::filesystem::path& dir, const Dataset& like, const std::vector<StateField>& normalized_states,
                           Timestamp init, const std::string& checkpoint_hash, std::size_t evaluations) {
  if (!like.stats) throw Error("write_forecast: normalization statistics are required");
  Dataset out{like.grid, like.registry, {}, like.statics, like.stats, like.stats_provenance, {}};
  for (const auto& s : normalized_states) {
    StateField phys = denormalize(s, *like.stats);
    apply_tp_inverse(phys, like.registry);
    out.states.push_back(std::move(phys));
  }
  out.meta["kind"] = "forecast";
  out.meta["init_time"] = format_iso8601(init);
  out.meta["horizon_hours"] = std::to_string(normalized_states.size());
  out.meta["checkpoint"] = checkpoint_hash;
  out.meta["model_evaluations"] = std::to_string(evaluations);
  dataset_io::write(out, dir);
}

}  // namespace flowcast::ode
