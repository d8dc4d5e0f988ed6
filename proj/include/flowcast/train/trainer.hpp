#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "flowcast/core/dataset.hpp"
#include "flowcast/core/norm.hpp"
#include "flowcast/model/checkpoint.hpp"
#include "flowcast/model/conditioning.hpp"
#include "flowcast/model/velocity_net.hpp"
#include "flowcast/train/config.hpp"
#include "flowcast/train/losses.hpp"
#include "flowcast/train/optim.hpp"
#include "flowcast/train/weights.hpp"
#include "flowcast/transport/paths.hpp"

namespace flowcast::train {

/// Normalized states plus the loss weights derived from them.
struct TrainingSet {
  Dataset data;
  WeightScheme weights;
};

/// Applies the precipitation transform, normalizes (computing statistics
/// unless given) and derives loss weights (unless given).
inline TrainingSet prepare_training_set(Dataset ds, const std::optional<NormStats>& stats = std::nullopt,
                                        const std::optional<WeightScheme>& weights = std::nullopt, int lag_hours = 6,
                                        int align_hours = 6) {
  if (!ds.states.empty() && ds.states.front().normalized) throw Error("prepare_training_set: expected physical units");
  for (auto& s : ds.states) apply_tp_transform(s, ds.registry);
  const NormStats st = stats ? *stats : compute_norm_stats(ds.states, ds.registry);
  st.validate();
  for (auto& s : ds.states) s = normalize(s, st);
  ds.stats = st;
  ds.stats_provenance = stats ? "checkpoint" : "computed";
  WeightScheme w = weights ? *weights : make_weights(ds, lag_hours, align_hours);
  return {std::move(ds), std::move(w)};
}

// ---- sampling ------------------------------------------------------------

/// Draws from a 64-bit engine without going through std distributions, so
/// sample streams do not depend on the standard library.
inline double unit_open(std::mt19937_64& rng) { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; }
inline std::size_t pick(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

/// Indices k with UTC hour a multiple of `align` and a state exactly `lag` hours later.
inline std::vector<std::size_t> pair_starts(const Dataset& ds, int lag, int align) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < ds.size(); ++k) {
    if (utc_hour(ds.states[k].time) % align != 0) continue;
    if (ds.index_of(ds.states[k].time + std::chrono::hours(lag))) out.push_back(k);
  }
  return out;
}

/// Indices of the T + 1 consecutive hourly states used by one stage-2 sample.
inline std::optional<std::vector<std::size_t>> hourly_window(const Dataset& ds, std::size_t start, std::size_t T) {
  std::vector<std::size_t> idx{start};
  for (std::size_t h = 1; h <= T; ++h) {
    auto j = ds.index_of(ds.states[start].time + std::chrono::hours(h));
    if (!j) return std::nullopt;
    idx.push_back(*j);
  }
  return idx;
}

inline std::vector<std::size_t> window_starts(const Dataset& ds, std::size_t T, int align) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < ds.size(); ++k) {
    if (utc_hour(ds.states[k].time) % align == 0 && hourly_window(ds, k, T)) out.push_back(k);
  }
  return out;
}

struct Stage1Sample {
  std::size_t start = 0, end = 0;
  double t = 0;
};

inline std::vector<Stage1Sample> sample_stage1_batch(const Dataset& ds, const std::vector<std::size_t>& starts, int lag,
                                                     std::size_t batch, TimeSampling ts, std::mt19937_64& rng) {
  if (starts.empty()) throw Error("sample_stage1_batch: dataset has no aligned pairs");
  std::vector<Stage1Sample> out;
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t k = starts[pick(rng, starts.size())];
    const double t = ts == TimeSampling::Zero ? 0.0 : unit_open(rng);
    out.push_back({k, *ds.index_of(ds.states[k].time + std::chrono::hours(lag)), t});
  }
  return out;
}

// ---- trainer -------------------------------------------------------------

struct MetricRow {
  std::size_t step = 0;
  double loss = 0, lr = 0, grad_norm = 0;
};

template <typename T>
class Trainer {
 public:
  using Grads = std::vector<std::vector<T>>;
  struct SampleResult {
    double loss = 0;
    Grads grads;
  };

  Trainer(TrainConfig cfg, const TrainingSet& set) : cfg_(std::move(cfg)), set_(&set), net_(cfg_.model), rng_(cfg_.seed) {
    cfg_.validate();
    const auto& ds = set.data;
    if (cfg_.model.channels() != ds.registry.n_channels() || cfg_.model.n_lat != ds.grid.n_lat() || cfg_.model.n_lon != ds.grid.n_lon()) {
      throw ConfigError("model geometry does not match the dataset");
    }
    if (cfg_.model.cond_channels != model::conditioning_channels(ds.registry.static_vars().size())) {
      throw ConfigError("model cond_channels does not match the dataset's static fields");
    }
    weight_field_ = set.weights.template field_as<T>(ds.grid.n_lon());
    starts_ = cfg_.stage == 1 ? pair_starts(ds, cfg_.pair_lag_hours, cfg_.align_hours) : window_starts(ds, cfg_.ar_steps, cfg_.align_hours);
    if (starts_.empty()) throw ConfigError("dataset has no usable training samples for this stage");
    adam_.beta1 = cfg_.beta1;
    adam_.beta2 = cfg_.beta2;
    adam_.weight_decay = cfg_.weight_decay;
    adam_.init(net_.parameters());
    ema_.decay = cfg_.ema_decay;
    ema_.init(net_.parameters());
  }

  const TrainConfig& config() const { return cfg_; }
  model::VelocityNet<T>& net() { return net_; }
  const model::VelocityNet<T>& net() const { return net_; }
  const EMAState<T>& ema() const { return ema_; }
  std::size_t step_count() const { return step_; }
  const std::vector<MetricRow>& metrics() const { return metrics_; }
  const std::vector<std::size_t>& starts() const { return starts_; }
  std::size_t steps_per_epoch() const { return std::max<std::size_t>(1, starts_.size() / cfg_.batch_size); }

  /// Starts from another run's weights (stage 2 from the stage-1 EMA).
  void load_weights(const model::Checkpoint<T>& ck, const std::string& group = "ema/") {
    ck.restore(group, net_.parameters());
    ema_.init(net_.parameters());
  }

  /// Restores everything needed to continue a run bit for bit.
  void resume(const model::Checkpoint<T>& ck) {
    ck.restore("param/", net_.parameters());
    adam_.m = ck.buffers("adam_m/", net_.parameters());
    adam_.v = ck.buffers("adam_v/", net_.parameters());
    ema_.shadow = ck.buffers("ema/", net_.parameters());
    adam_.t = ck.meta.at("adam_t").template get<std::size_t>();
    step_ = ck.meta.at("step").template get<std::size_t>();
    std::istringstream in(ck.meta.at("rng").template get<std::string>());
    in >> rng_;
  }

  model::Checkpoint<T> checkpoint() const {
    model::Checkpoint<T> ck;
    ck.config = cfg_.model;
    ck.add("param/", net_.parameters());
    ck.add("ema/", net_.parameters(), ema_.shadow);
    ck.add("adam_m/", net_.parameters(), adam_.m);
    ck.add("adam_v/", net_.parameters(), adam_.v);
    std::ostringstream r;
    r << rng_;
    auto& m = ck.meta;
    m["stage"] = cfg_.stage;
    m["step"] = step_;
    m["adam_t"] = adam_.t;
    m["rng"] = r.str();
    const auto& ds = set_->data;
    m["norm_mean"] = ds.stats->mean;
    m["norm_std"] = ds.stats->std;
    m["w_lat"] = set_->weights.w_lat;
    m["w_lev"] = set_->weights.w_lev;
    m["w_var"] = set_->weights.w_var;
    std::vector<std::string> names;
    for (const auto& c : ds.registry.channels()) names.push_back(c.name);
    m["channels"] = names;
    m["static_vars"] = ds.registry.static_vars();
    nlohmann::json tc = nlohmann::json::object();
    const auto kv = cfg_.to_keyvalue();
    for (const auto& k : kv.keys()) tc[k] = kv.get(k);
    m["train_config"] = tc;
    return ck;
  }

  /// Loss and parameter gradients of one flow-matching pair.
  SampleResult stage1_sample(const Stage1Sample& s, bool want_grad = true) const {
    const auto& ds = set_->data;
    const auto& xk = ds.states[s.start].values;
    const auto& xk6 = ds.states[s.end].values;
    const auto path = transport::dynamic_path_sample(xk, xk6, s.t, 0.0);
    const auto valid = ds.states[s.start].time +
                       std::chrono::seconds(std::llround(s.t * cfg_.pair_lag_hours * 3600.0));
    const auto cond = conditioning(valid);
    ad::Tape<T> tape(want_grad);
    const std::size_t hw = ds.grid.size(), C = ds.registry.n_channels();
    auto x = tape.input(std::vector<T>(path.x_t.begin(), path.x_t.end()), C, hw);
    auto c = tape.input(std::vector<T>(cond.begin(), cond.end()), cond.size() / hw, hw);
    auto v = net_.forward(tape, x, s.t, c);
    const std::vector<T> target(path.u_target.begin(), path.u_target.end());
    auto L = ad::weighted_square_error(v, target, weight_field_, T(1) / static_cast<T>(target.size()));
    SampleResult r{static_cast<double>(L.data()[0]), {}};
    if (want_grad) {
      tape.backward(L);
      r.grads = collect(tape);
    }
    return r;
  }

  /// Loss and gradients of one rollout of ar_steps hours from `start`,
  /// backpropagated through every Euler step.
  SampleResult stage2_sample(std::size_t start, bool want_grad = true) const {
    return cfg_.recompute && want_grad ? stage2_recompute(start) : stage2_taped(start, want_grad);
  }

  /// One optimizer step over a freshly drawn batch; returns the batch loss.
  double step() {
    std::vector<Stage1Sample> s1;
    std::vector<std::size_t> s2;
    if (cfg_.stage == 1) {
      s1 = sample_stage1_batch(set_->data, starts_, cfg_.pair_lag_hours, cfg_.batch_size, cfg_.t_sampling, rng_);
    } else {
      for (std::size_t b = 0; b < cfg_.batch_size; ++b) s2.push_back(starts_[pick(rng_, starts_.size())]);
    }
    std::vector<SampleResult> results(cfg_.batch_size);
    std::vector<std::exception_ptr> errors(cfg_.batch_size);
    auto work = [&](std::size_t b) {
      try {
        results[b] = cfg_.stage == 1 ? stage1_sample(s1[b]) : stage2_sample(s2[b]);
      } catch (...) {
        errors[b] = std::current_exception();
      }
    };
    const std::size_t nt = std::min(thread_cap(), cfg_.batch_size);
    if (nt <= 1) {
      for (std::size_t b = 0; b < cfg_.batch_size; ++b) work(b);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < nt; ++w) {
        pool.emplace_back([&, w] {
          for (std::size_t b = w; b < cfg_.batch_size; b += nt) work(b);
        });
      }
      for (auto& th : pool) th.join();
    }
    for (auto& e : errors) {
      if (!e) continue;
      try {
        std::rethrow_exception(e);
      } catch (const NumericalError& ne) {
        throw TrainingAbort(std::string(ne.what()) + " at step " + std::to_string(step_ + 1));
      }
    }
    // Fixed-order reduction keeps results independent of the thread count.
    double loss = 0;
    Grads g = net_.parameters().zeros_like();
    const double inv = 1.0 / static_cast<double>(cfg_.batch_size);
    for (const auto& r : results) {
      loss += r.loss * inv;
      for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t k = 0; k < g[i].size(); ++k) g[i][k] += static_cast<T>(r.grads[i][k] * inv);
    }
    if (!std::isfinite(loss)) throw TrainingAbort("non-finite loss at step " + std::to_string(step_ + 1));
    double sq = 0;
    for (const auto& gi : g)
      for (T x : gi) sq += static_cast<double>(x) * x;
    const double norm = std::sqrt(sq);
    if (!std::isfinite(norm)) throw TrainingAbort("non-finite gradient at step " + std::to_string(step_ + 1));
    if (cfg_.grad_clip > 0 && norm > cfg_.grad_clip) {
      const double s = cfg_.grad_clip / norm;
      for (auto& gi : g)
        for (T& x : gi) x = static_cast<T>(x * s);
    }
    const double lr = learning_rate(cfg_.schedule, cfg_.lr, step_, cfg_.steps);
    adam_.step(net_.parameters(), g, lr);
    ++step_;
    // Short runs would otherwise keep a large share of the initial weights in the average.
    ema_.decay = std::min(cfg_.ema_decay, (1.0 + static_cast<double>(step_)) / (10.0 + static_cast<double>(step_)));
    ema_.update(net_.parameters());
    metrics_.push_back({step_, loss, lr, norm});
    return loss;
  }

  /// Runs to cfg.steps, appending to metrics.csv and saving checkpoint.bin in
  /// `out` at every checkpoint interval and at the end. A non-finite loss
  /// aborts with the previous checkpoint left in place.
  void run(const std::filesystem::path& out, const std::function<void(const MetricRow&)>& on_step = {}) {
    std::filesystem::create_directories(out);
    const auto csv_path = out / "metrics.csv";
    const bool fresh = step_ == 0 || !std::filesystem::exists(csv_path);
    std::ofstream csv(csv_path, fresh ? std::ios::trunc : std::ios::app);
    if (fresh) csv << "step,loss,lr,grad_norm\n";
    const std::size_t every = cfg_.checkpoint_every ? cfg_.checkpoint_every : steps_per_epoch();
    while (step_ < cfg_.steps) {
      step();
      const auto& m = metrics_.back();
      csv << m.step << ',' << KeyValueFile::format_double(m.loss) << ',' << KeyValueFile::format_double(m.lr) << ','
          << KeyValueFile::format_double(m.grad_norm) << '\n';
      csv.flush();
      if (on_step) on_step(m);
      if (step_ % every == 0 || step_ == cfg_.steps) checkpoint().save(out / "checkpoint.bin");
    }
  }

  std::vector<double> conditioning(Timestamp valid) const {
    const auto& ds = set_->data;
    return model::build_conditioning(ds.grid, ds.statics, ds.registry.static_vars().size(), valid);
  }

 private:
  Grads collect(const ad::Tape<T>& tape) const {
    const auto& ps = net_.parameters();
    Grads g(ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const auto pg = tape.param_grad(ps[i]);
      if (pg.empty()) {
        g[i].assign(ps[i].size(), T(0));
      } else {
        g[i].assign(pg.begin(), pg.end());
      }
    }
    return g;
  }

  std::vector<T> as_t(const std::vector<double>& v) const { return {v.begin(), v.end()}; }

  SampleResult stage2_taped(std::size_t start, bool want_grad) const {
    const auto& ds = set_->data;
    const auto idx = *hourly_window(ds, start, cfg_.ar_steps);
    const std::size_t hw = ds.grid.size(), C = ds.registry.n_channels();
    const T dt = T(1) / T(6);
    const T inv_n = T(1) / static_cast<T>(C * hw);
    ad::Tape<T> tape(want_grad);
    auto x = tape.input(as_t(ds.states[start].values), C, hw);
    std::optional<ad::Var<T>> L;
    for (std::size_t n = 1; n <= cfg_.ar_steps; ++n) {
      const double t = static_cast<double>((n - 1) % 6) / 6.0;
      const auto cond = conditioning(ds.states[start].time + std::chrono::hours(n - 1));
      auto c = tape.input(as_t(cond), cond.size() / hw, hw);
      auto v = net_.forward(tape, x, t, c);
      x = ad::axpy(x, v, dt);
      const std::vector<T> truth = as_t(ds.states[idx[n]].values);
      auto term = ad::weighted_square_error(x, truth, weight_field_, static_cast<T>(w_tau(static_cast<double>(n))) * inv_n);
      L = L ? ad::add(*L, term) : term;
    }
    SampleResult r{static_cast<double>(L->data()[0]), {}};
    if (want_grad) {
      tape.backward(*L);
      r.grads = collect(tape);
    }
    return r;
  }

  /// Adjoint sweep that keeps only the hourly states and re-runs each step's
  /// forward pass while going backwards.
  SampleResult stage2_recompute(std::size_t start) const {
    const auto& ds = set_->data;
    const auto idx = *hourly_window(ds, start, cfg_.ar_steps);
    const std::size_t hw = ds.grid.size(), C = ds.registry.n_channels(), N = C * hw, T_ = cfg_.ar_steps;
    const T dt = T(1) / T(6);
    const auto& W = *weight_field_;
    std::vector<std::vector<T>> xs{as_t(ds.states[start].values)};
    std::vector<std::vector<double>> conds;
    double loss = 0;
    for (std::size_t n = 1; n <= T_; ++n) {
      const double t = static_cast<double>((n - 1) % 6) / 6.0;
      conds.push_back(conditioning(ds.states[start].time + std::chrono::hours(n - 1)));
      const auto v = net_.evaluate(xs.back(), t, as_t(conds.back()));
      std::vector<T> x = xs.back();
      for (std::size_t k = 0; k < N; ++k) x[k] += dt * v[k];
      const auto& truth = ds.states[idx[n]].values;
      double acc = 0;
      for (std::size_t k = 0; k < N; ++k) {
        const double d = static_cast<double>(x[k]) - truth[k];
        acc += W[k] * d * d;
      }
      loss += w_tau(static_cast<double>(n)) * acc / static_cast<double>(N);
      xs.push_back(std::move(x));
    }
    Grads total = net_.parameters().zeros_like();
    std::vector<T> a(N, T(0));
    for (std::size_t n = T_; n >= 1; --n) {
      const T scale = static_cast<T>(2.0 * w_tau(static_cast<double>(n)) / static_cast<double>(N));
      const auto& truth = ds.states[idx[n]].values;
      for (std::size_t k = 0; k < N; ++k) a[k] += scale * W[k] * (xs[n][k] - static_cast<T>(truth[k]));
      const double t = static_cast<double>((n - 1) % 6) / 6.0;
      ad::Tape<T> tape(true);
      auto xin = tape.input(xs[n - 1], C, hw, true);
      auto c = tape.input(as_t(conds[n - 1]), conds[n - 1].size() / hw, hw);
      auto v = net_.forward(tape, xin, t, c);
      std::vector<T> seed(N);
      for (std::size_t k = 0; k < N; ++k) seed[k] = dt * a[k];
      tape.backward(v, seed);
      const auto g = collect(tape);
      for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t k = 0; k < g[i].size(); ++k) total[i][k] += g[i][k];
      const auto gx = tape.grad_of(xin);
      if (!gx.empty()) {
        for (std::size_t k = 0; k < N; ++k) a[k] += gx[k];
      }
    }
    return {loss, std::move(total)};
  }

  TrainConfig cfg_;
  const TrainingSet* set_;
  model::VelocityNet<T> net_;
  std::mt19937_64 rng_;
  AdamW<T> adam_;
  EMAState<T> ema_;
  std::shared_ptr<const std::vector<T>> weight_field_;
  std::vector<std::size_t> starts_;
  std::size_t step_ = 0;
  std::vector<MetricRow> metrics_;
};

/// Normalization statistics stored with a checkpoint.
template <typename T>
NormStats stats_from(const model::Checkpoint<T>& ck) {
  NormStats s;
  s.mean = ck.meta.at("norm_mean").template get<std::vector<double>>();
  s.std = ck.meta.at("norm_std").template get<std::vector<double>>();
  return s;
}

template <typename T>
WeightScheme weights_from(const model::Checkpoint<T>& ck) {
  return {ck.meta.at("w_lat").template get<std::vector<double>>(), ck.meta.at("w_lev").template get<std::vector<double>>(),
          ck.meta.at("w_var").template get<std::vector<double>>()};
}

}  // namespace flowcast::train
