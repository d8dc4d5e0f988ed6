#pragma once

#include <chrono>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "flowcast/core/dataset.hpp"
#include "flowcast/diag/energy.hpp"
#include "flowcast/diag/jumps.hpp"
#include "flowcast/diag/rmse.hpp"
#include "flowcast/model/checkpoint.hpp"
#include "flowcast/ode/forecast.hpp"
#include "flowcast/synth/atmosphere.hpp"
#include "flowcast/train/trainer.hpp"

namespace flowcast::app {

/// Two-stage training (6-hourly flow matching, then hourly rollout
/// fine-tuning) against a direct-hourly baseline on a synthetic atmosphere
/// with periodic analysis jumps.
struct JumpExperimentConfig {
  std::size_t n_lat = 32, n_lon = 64;
  std::size_t train_days = 24;
  std::size_t test_inits = 4;  // consecutive 00 UTC starts after the training period
  std::size_t lead_hours = 48;
  double jump_eps = 0.3;
  std::uint64_t seed = 2024;

  std::size_t stage1_steps = 1200, stage1_batch = 8;
  double stage1_lr = 2e-3;
  std::size_t stage2_steps = 200, stage2_batch = 4, ar_steps = 6;
  double stage2_lr = 5e-4;
  std::size_t baseline_batch = 8;
  double baseline_lr = 2e-3;

  std::size_t embed_dim = 32, time_embed_dim = 32, n_heads = 2, lowrank_r = 8;
};

struct RolloutScore {
  Timestamp init;
  diag::JumpReport ke;
  double rmse_at_lead = 0;  // channel mean of latitude-weighted RMSE, normalized units
};

struct JumpExperimentResult {
  std::vector<diag::JumpReport> truth;
  std::vector<RolloutScore> two_stage, baseline;
  double stage1_final_loss = 0, stage2_final_loss = 0, baseline_final_loss = 0;
  double seconds = 0;

  double max_boundary_z(const std::vector<RolloutScore>& runs) const {
    double z = 0;
    for (const auto& r : runs) z = std::max(z, r.ke.max_boundary_z());
    return z;
  }
  static double mean_rmse(const std::vector<RolloutScore>& runs) {
    double s = 0;
    for (const auto& r : runs) s += r.rmse_at_lead;
    return runs.empty() ? 0 : s / static_cast<double>(runs.size());
  }
  /// True when every boundary increment of every truth window is flagged.
  bool truth_flags_all_boundaries() const {
    for (const auto& rep : truth) {
      bool saw9 = false, saw21 = false;
      for (const auto& r : rep.boundary_rows()) {
        if (!r.flag) return false;
        saw9 |= r.utc_hour == 9;
        saw21 |= r.utc_hour == 21;
      }
      if (!saw9 || !saw21) return false;
    }
    return !truth.empty();
  }
};

namespace detail {

inline Dataset slice(const Dataset& ds, std::size_t begin, std::size_t end) {
  Dataset out{ds.grid, ds.registry, {}, ds.statics, ds.stats, ds.stats_provenance, ds.meta};
  out.states.assign(ds.states.begin() + static_cast<std::ptrdiff_t>(begin), ds.states.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

inline StateField to_physical(const StateField& s, const Dataset& like) {
  StateField p = denormalize(s, *like.stats);
  apply_tp_inverse(p, like.registry);
  return p;
}

inline double channel_mean_rmse(const StateField& f, const StateField& t, const GridSpec& grid) {
  double s = 0;
  for (std::size_t c = 0; c < f.channels; ++c) s += diag::weighted_rmse(f, t, grid, c);
  return s / static_cast<double>(f.channels);
}

/// Rolls the EMA weights of `ck` forward from each init and scores the result.
template <typename T>
std::vector<RolloutScore> score_rollouts(const model::Checkpoint<T>& ck, const train::TrainingSet& set, const Dataset& truth_norm,
                                         const std::vector<std::size_t>& inits, const ode::RolloutConfig& rc) {
  model::VelocityNet<T> net(ck.config);
  ck.restore("ema/", net.parameters());
  const auto& ds = set.data;
  std::vector<RolloutScore> out;
  for (std::size_t k : inits) {
    const StateField& x0 = truth_norm.states[k];
    const auto v = ode::model_velocity(net, ds.grid, ds.statics, ds.registry.static_vars().size(), x0.time, rc);
    const auto states = ode::rollout_states(v, x0, rc);
    std::vector<double> ke{diag::domain_kinetic_energy(to_physical(x0, truth_norm), ds.registry, ds.grid)};
    for (const auto& s : states) ke.push_back(diag::domain_kinetic_energy(to_physical(s, truth_norm), ds.registry, ds.grid));
    RolloutScore r;
    r.init = x0.time;
    r.ke = diag::discontinuity_score(ke, utc_hour(x0.time));
    r.rmse_at_lead = channel_mean_rmse(states.back(), truth_norm.states[k + rc.horizon_hours], ds.grid);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace detail

inline JumpExperimentResult run_jump_experiment(const JumpExperimentConfig& cfg, std::ostream* log = nullptr) {
  using T = float;
  const auto t_start = std::chrono::steady_clock::now();
  auto say = [&](const std::string& s) {
    if (log) *log << s << std::endl;
  };

  synth::SynthConfig sc;
  sc.n_lat = cfg.n_lat;
  sc.n_lon = cfg.n_lon;
  sc.seed = cfg.seed;
  sc.jump_eps = cfg.jump_eps;
  const std::size_t train_hours = 24 * cfg.train_days;
  sc.hours = train_hours + 24 * (cfg.test_inits - 1) + cfg.lead_hours + 1;
  const Dataset full = synth::generate(sc);
  if (utc_hour(full.states.front().time) != 0) throw ConfigError("jump experiment: the dataset must start at 00 UTC");

  const Dataset train_raw = detail::slice(full, 0, train_hours);
  const auto set6 = train::prepare_training_set(train_raw, std::nullopt, std::nullopt, 6, 6);
  const auto set1 = train::prepare_training_set(train_raw, std::nullopt, std::nullopt, 1, 1);

  // Whole trajectory in the training normalization, for initial states and verification.
  Dataset truth_norm = full;
  truth_norm.stats = set6.data.stats;
  for (auto& s : truth_norm.states) {
    apply_tp_transform(s, truth_norm.registry);
    s = normalize(s, *truth_norm.stats);
  }
  std::vector<std::size_t> inits;
  for (std::size_t i = 0; i < cfg.test_inits; ++i) inits.push_back(train_hours + 24 * i);

  JumpExperimentResult res;
  for (std::size_t k : inits) {
    std::vector<double> ke;
    for (std::size_t h = 0; h <= cfg.lead_hours; ++h) ke.push_back(diag::domain_kinetic_energy(full.states[k + h], full.registry, full.grid));
    res.truth.push_back(diag::discontinuity_score(ke, utc_hour(full.states[k].time)));
  }

  model::ModelConfig mc;
  mc.n_lat = cfg.n_lat;
  mc.n_lon = cfg.n_lon;
  mc.n_surface = full.registry.n_surface();
  mc.n_pressure_vars = full.registry.n_pressure();
  mc.n_levels = full.registry.n_levels();
  mc.cond_channels = model::conditioning_channels(full.registry.static_vars().size());
  mc.embed_dim = cfg.embed_dim;
  mc.time_embed_dim = cfg.time_embed_dim;
  mc.n_heads = cfg.n_heads;
  mc.lowrank_r = cfg.lowrank_r;
  mc.seed = cfg.seed;

  auto progress = [&](const char* name, std::size_t total) {
    return [&say, name, total](const train::MetricRow& r) {
      if (r.step % std::max<std::size_t>(1, total / 10) == 0) say(std::string(name) + " step " + std::to_string(r.step) + " loss " + std::to_string(r.loss));
    };
  };
  auto train_run = [&](train::Trainer<T>& tr, std::size_t total, const char* name) {
    const auto cb = progress(name, total);
    while (tr.step_count() < total) {
      tr.step();
      cb(tr.metrics().back());
    }
    double tail = 0;
    const std::size_t n = std::min<std::size_t>(20, tr.metrics().size());
    for (std::size_t i = tr.metrics().size() - n; i < tr.metrics().size(); ++i) tail += tr.metrics()[i].loss;
    return tail / static_cast<double>(n);
  };

  // Stage 1 on the 6-hour view.
  train::TrainConfig s1;
  s1.stage = 1;
  s1.steps = cfg.stage1_steps;
  s1.batch_size = cfg.stage1_batch;
  s1.lr = cfg.stage1_lr;
  s1.seed = cfg.seed;
  s1.pair_lag_hours = 6;
  s1.align_hours = 6;
  s1.model = mc;
  train::Trainer<T> tr1(s1, set6);
  res.stage1_final_loss = train_run(tr1, s1.steps, "stage1");
  const auto ck1 = tr1.checkpoint();

  // Stage 2: hourly rollouts from the stage-1 EMA.
  auto s2 = s1;
  s2.stage = 2;
  s2.steps = cfg.stage2_steps;
  s2.batch_size = cfg.stage2_batch;
  s2.lr = cfg.stage2_lr;
  s2.ar_steps = cfg.ar_steps;
  train::Trainer<T> tr2(s2, set6);
  tr2.load_weights(ck1, "ema/");
  res.stage2_final_loss = train_run(tr2, s2.steps, "stage2");

  // Baseline: hourly pairs, t = 0, same number of optimizer steps in total.
  auto sb = s1;
  sb.steps = cfg.stage1_steps + cfg.stage2_steps;
  sb.batch_size = cfg.baseline_batch;
  sb.lr = cfg.baseline_lr;
  sb.pair_lag_hours = 1;
  sb.align_hours = 1;
  sb.t_sampling = train::TimeSampling::Zero;
  train::Trainer<T> trb(sb, set1);
  res.baseline_final_loss = train_run(trb, sb.steps, "baseline");

  ode::RolloutConfig two_stage_rc;
  two_stage_rc.horizon_hours = cfg.lead_hours;
  ode::RolloutConfig hourly_rc = two_stage_rc;
  hourly_rc.steps_per_block = 1;
  hourly_rc.delta_t = 1.0;
  res.two_stage = detail::score_rollouts(tr2.checkpoint(), set6, truth_norm, inits, two_stage_rc);
  res.baseline = detail::score_rollouts(trb.checkpoint(), set1, truth_norm, inits, hourly_rc);
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return res;
}

}  // namespace flowcast::app
