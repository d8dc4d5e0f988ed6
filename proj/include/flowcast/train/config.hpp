#pragma once

#include <cstdint>
#include <cstdlib>
#include <string>
#include <thread>

#include "flowcast/core/error.hpp"
#include "flowcast/core/keyvalue.hpp"
#include "flowcast/model/config.hpp"
#include "flowcast/train/optim.hpp"

namespace flowcast::train {

enum class TimeSampling { Uniform, Zero };

/// Training run settings. File schema (key = value, '#' comments):
///
///   stage            1 or 2
///   ar_steps         stage-2 rollout length in hours, multiple of 6
///   steps            optimizer steps
///   batch_size       samples per step
///   lr               peak learning rate
///   schedule         cosine | constant
///   weight_decay, beta1, beta2, ema_decay, grad_clip (0 disables)
///   seed
///   pair_lag_hours   stage-1 pair spacing (6)
///   align_hours      sample start times are multiples of this UTC hour (6)
///   t_sampling       uniform | zero
///   recompute        true to recompute activations per Euler step in stage 2
///   checkpoint_every steps between checkpoints (0 = once per epoch)
///   model.*          ModelConfig keys (ignored when resuming from a checkpoint)
struct TrainConfig {
  int stage = 1;
  std::size_t ar_steps = 6;
  std::size_t steps = 200;
  std::size_t batch_size = 4;
  double lr = 3e-4;
  Schedule schedule = Schedule::Cosine;
  double weight_decay = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double ema_decay = 0.999;
  double grad_clip = 0.0;
  std::uint64_t seed = 0;
  int pair_lag_hours = 6;
  int align_hours = 6;
  TimeSampling t_sampling = TimeSampling::Uniform;
  bool recompute = false;
  std::size_t checkpoint_every = 0;
  model::ModelConfig model;

  void validate() const {
    if (stage != 1 && stage != 2) throw ConfigError("stage must be 1 or 2");
    if (stage == 2 && (ar_steps == 0 || ar_steps % 6 != 0)) throw ConfigError("ar_steps must be a positive multiple of 6");
    if (steps == 0 || batch_size == 0) throw ConfigError("steps and batch_size must be positive");
    if (!(lr > 0)) throw ConfigError("lr must be positive");
    if (!(ema_decay >= 0 && ema_decay < 1)) throw ConfigError("ema_decay must be in [0, 1)");
    if (pair_lag_hours <= 0 || align_hours <= 0) throw ConfigError("pair_lag_hours and align_hours must be positive");
  }

  static TrainConfig from_keyvalue(const KeyValueFile& kv) {
    TrainConfig c;
    c.stage = static_cast<int>(kv.get_int("stage", c.stage));
    c.ar_steps = static_cast<std::size_t>(kv.get_int("ar_steps", static_cast<long long>(c.ar_steps)));
    c.steps = static_cast<std::size_t>(kv.get_int("steps", static_cast<long long>(c.steps)));
    c.batch_size = static_cast<std::size_t>(kv.get_int("batch_size", static_cast<long long>(c.batch_size)));
    c.lr = kv.get_double("lr", c.lr);
    c.schedule = parse_schedule(kv.get("schedule", to_string(c.schedule)));
    c.weight_decay = kv.get_double("weight_decay", c.weight_decay);
    c.beta1 = kv.get_double("beta1", c.beta1);
    c.beta2 = kv.get_double("beta2", c.beta2);
    c.ema_decay = kv.get_double("ema_decay", c.ema_decay);
    c.grad_clip = kv.get_double("grad_clip", c.grad_clip);
    c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long long>(c.seed)));
    c.pair_lag_hours = static_cast<int>(kv.get_int("pair_lag_hours", c.pair_lag_hours));
    c.align_hours = static_cast<int>(kv.get_int("align_hours", c.align_hours));
    const auto ts = kv.get("t_sampling", "uniform");
    if (ts != "uniform" && ts != "zero") throw ConfigError("t_sampling must be uniform or zero");
    c.t_sampling = ts == "zero" ? TimeSampling::Zero : TimeSampling::Uniform;
    const auto rc = kv.get("recompute", "false");
    if (rc != "true" && rc != "false") throw ConfigError("recompute must be true or false");
    c.recompute = rc == "true";
    c.checkpoint_every = static_cast<std::size_t>(kv.get_int("checkpoint_every", 0));
    c.model.update_from(kv, "model.");
    c.validate();
    return c;
  }

  KeyValueFile to_keyvalue() const {
    KeyValueFile kv;
    kv.set("stage", stage);
    kv.set("ar_steps", ar_steps);
    kv.set("steps", steps);
    kv.set("batch_size", batch_size);
    kv.set("lr", lr);
    kv.set("schedule", to_string(schedule));
    kv.set("weight_decay", weight_decay);
    kv.set("beta1", beta1);
    kv.set("beta2", beta2);
    kv.set("ema_decay", ema_decay);
    kv.set("grad_clip", grad_clip);
    kv.set("seed", static_cast<long long>(seed));
    kv.set("pair_lag_hours", pair_lag_hours);
    kv.set("align_hours", align_hours);
    kv.set("t_sampling", std::string(t_sampling == TimeSampling::Zero ? "zero" : "uniform"));
    kv.set("recompute", std::string(recompute ? "true" : "false"));
    kv.set("checkpoint_every", checkpoint_every);
    const auto m = model.to_keyvalue();
    for (const auto& k : m.keys()) kv.set("model." + k, m.get(k));
    return kv;
  }
};

/// Worker thread cap from FLOWCAST_NUM_THREADS, defaulting to the hardware count.
inline std::size_t thread_cap() {
  if (const char* env = std::getenv("FLOWCAST_NUM_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return static_cast<std::size_t>(n);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace flowcast::train
