#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowcast/core/binary_io.hpp"
#include "flowcast/core/dataset.hpp"
#include "flowcast/core/keyvalue.hpp"
#include "flowcast/diag/csv.hpp"
#include "flowcast/diag/energy.hpp"
#include "flowcast/diag/jumps.hpp"
#include "flowcast/diag/rmse.hpp"
#include "flowcast/diag/spectrum.hpp"
#include "flowcast/model/checkpoint.hpp"
#include "flowcast/ode/forecast.hpp"
#include "flowcast/ode/rollout.hpp"
#include "flowcast/synth/atmosphere.hpp"
#include "flowcast/track/cyclone.hpp"
#include "flowcast/train/trainer.hpp"

#ifndef FLOWCAST_VERSION
#define FLOWCAST_VERSION "0.0.0"
#endif

namespace flowcast::app {

enum ExitCode : int { kOk = 0, kUsage = 2, kTrainingAbort = 3, kNumerical = 4 };

/// One JSON record per command invocation, written as run_manifest.json in
/// the output directory.
struct RunManifest {
  std::string command;
  std::string config_hash;
  std::optional<std::uint64_t> seed;
  std::map<std::string, std::string> inputs, outputs, extra;
  std::vector<std::string> argv;
  double wall_time_s = 0;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["command"] = command;
    j["config_hash"] = config_hash;
    j["seed"] = seed ? nlohmann::json(*seed) : nlohmann::json(nullptr);
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["code_version"] = FLOWCAST_VERSION;
    j["wall_time_s"] = wall_time_s;
    j["argv"] = argv;
    if (!extra.empty()) j["details"] = extra;
    return j;
  }

  void write(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    io::write_file(dir / "run_manifest.json", to_json().dump(2) + "\n");
  }
};

/// Fingerprint of a config file's bytes plus any command-line overrides.
inline std::string config_hash(const std::optional<std::filesystem::path>& config, const std::string& overrides) {
  std::string text = config ? io::read_file(*config) : std::string();
  text += "\n#overrides\n" + overrides;
  return io::hex64(io::fnv1a(text));
}

inline KeyValueFile load_config(const std::filesystem::path& path) { return KeyValueFile::load(path); }

inline Dataset read_dataset(const std::filesystem::path& dir, const std::string& what) {
  if (!std::filesystem::exists(dir / dataset_io::kManifest)) throw ConfigError(what + " is not a dataset directory: " + dir.string());
  return dataset_io::read(dir);
}

// ---- gen-data ------------------------------------------------------------

struct GenDataArgs {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::optional<double> jump_eps;
  std::filesystem::path out;
};

inline RunManifest gen_data(const GenDataArgs& a, std::ostream& log) {
  auto cfg = synth::SynthConfig::from_keyvalue(load_config(a.config));
  std::string ov;
  if (a.seed) {
    cfg.seed = *a.seed;
    ov += "seed=" + std::to_string(*a.seed) + "\n";
  }
  if (a.jump_eps) {
    cfg.jump_eps = *a.jump_eps;
    ov += "jump_eps=" + KeyValueFile::format_double(*a.jump_eps) + "\n";
  }
  cfg.validate();
  const auto ds = synth::generate(cfg);
  dataset_io::write(ds, a.out);
  log << "wrote " << ds.size() << " hourly states (" << ds.registry.n_channels() << " channels, " << cfg.n_lat << "x" << cfg.n_lon
      << ") to " << a.out.string() << "\n";
  RunManifest m;
  m.command = "gen-data";
  m.config_hash = config_hash(a.config, ov);
  m.seed = cfg.seed;
  m.inputs["config"] = a.config.string();
  m.outputs["dataset"] = a.out.string();
  m.extra["jump_eps"] = KeyValueFile::format_double(cfg.jump_eps);
  return m;
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
  int stage = 1;
  std::filesystem::path config, data, out;
  std::optional<std::filesystem::path> ckpt;
  std::optional<std::size_t> ar_steps;
  std::optional<std::uint64_t> seed;
  bool resume = false;
};

/// Sets the geometry fields of a model config from a dataset.
inline void fit_model_to(model::ModelConfig& m, const Dataset& ds) {
  m.n_lat = ds.grid.n_lat();
  m.n_lon = ds.grid.n_lon();
  m.n_surface = ds.registry.n_surface();
  m.n_pressure_vars = ds.registry.n_pressure();
  m.n_levels = ds.registry.n_levels();
  m.cond_channels = model::conditioning_channels(ds.registry.static_vars().size());
  m.validate();
}

template <typename T>
void check_dataset_matches(const model::Checkpoint<T>& ck, const Dataset& ds) {
  std::vector<std::string> names;
  for (const auto& c : ds.registry.channels()) names.push_back(c.name);
  if (ck.meta.at("channels").template get<std::vector<std::string>>() != names) throw ConfigError("dataset channels differ from the checkpoint's");
  if (ck.meta.at("static_vars").template get<std::vector<std::string>>() != ds.registry.static_vars())
    throw ConfigError("dataset static fields differ from the checkpoint's");
  if (ck.config.n_lat != ds.grid.n_lat() || ck.config.n_lon != ds.grid.n_lon()) throw ConfigError("dataset grid differs from the checkpoint's");
}

template <typename T>
std::map<std::string, std::string> train_impl(train::TrainConfig tc, const TrainArgs& a, std::ostream& log) {
  const Dataset raw = read_dataset(a.data, "--data");
  std::optional<model::Checkpoint<T>> init;
  if (tc.stage == 2) {
    init = model::Checkpoint<T>::load(*a.ckpt);
    check_dataset_matches(*init, raw);
    tc.model = init->config;
  } else {
    fit_model_to(tc.model, raw);
  }
  const auto set = tc.stage == 2 ? train::prepare_training_set(raw, train::stats_from(*init), train::weights_from(*init))
                                 : train::prepare_training_set(raw, std::nullopt, std::nullopt, tc.pair_lag_hours, tc.align_hours);
  train::Trainer<T> tr(tc, set);
  const auto ckpt_path = a.out / "checkpoint.bin";
  if (a.resume && std::filesystem::exists(ckpt_path)) {
    tr.resume(model::Checkpoint<T>::load(ckpt_path));
    log << "resumed at step " << tr.step_count() << "\n";
  } else if (init) {
    tr.load_weights(*init, "ema/");
  }
  log << "stage " << tc.stage << ": " << tr.net().parameters().total() << " parameters, " << tr.starts().size() << " samples, "
      << tc.steps << " steps\n";
  const std::size_t every = std::max<std::size_t>(1, tc.steps / 20);
  tr.run(a.out, [&](const train::MetricRow& r) {
    if (r.step % every == 0 || r.step == tc.steps) log << "step " << r.step << " loss " << r.loss << " lr " << r.lr << "\n";
  });
  std::map<std::string, std::string> extra;
  extra["final_loss"] = KeyValueFile::format_double(tr.metrics().empty() ? 0.0 : tr.metrics().back().loss);
  extra["steps"] = std::to_string(tr.step_count());
  return extra;
}

inline RunManifest train_command(const TrainArgs& a, std::ostream& log) {
  const auto kv = load_config(a.config);
  auto tc = train::TrainConfig::from_keyvalue(kv);
  std::string ov = "stage=" + std::to_string(a.stage) + "\n";
  tc.stage = a.stage;
  if (a.ar_steps) {
    tc.ar_steps = *a.ar_steps;
    ov += "ar_steps=" + std::to_string(*a.ar_steps) + "\n";
  }
  if (a.seed) {
    tc.seed = *a.seed;
    tc.model.seed = *a.seed;
    ov += "seed=" + std::to_string(*a.seed) + "\n";
  }
  tc.validate();
  if (tc.stage == 2 && !a.ckpt) throw ConfigError("stage 2 requires --ckpt with a stage-1 checkpoint");
  if (a.ckpt && !std::filesystem::exists(*a.ckpt)) throw ConfigError("checkpoint not found: " + a.ckpt->string());
  const std::string dtype = kv.get("dtype", "f32");
  if (dtype != "f32" && dtype != "f64") throw ConfigError("dtype must be f32 or f64");
  if (a.ckpt && model::checkpoint_dtype(*a.ckpt) != dtype) throw ConfigError("--ckpt dtype differs from the config's dtype");
  RunManifest m;
  m.extra = dtype == "f32" ? train_impl<float>(tc, a, log) : train_impl<double>(tc, a, log);
  m.command = "train";
  m.config_hash = config_hash(a.config, ov);
  m.seed = tc.seed;
  m.inputs["config"] = a.config.string();
  m.inputs["data"] = a.data.string();
  if (a.ckpt) m.inputs["ckpt"] = a.ckpt->string();
  m.outputs["checkpoint"] = (a.out / "checkpoint.bin").string();
  m.outputs["metrics"] = (a.out / "metrics.csv").string();
  m.extra["stage"] = std::to_string(tc.stage);
  return m;
}

// ---- forecast ------------------------------------------------------------

struct ForecastArgs {
  std::filesystem::path ckpt, data, out;
  std::optional<std::string> init;
  std::size_t horizon = 24;
  std::size_t max_horizon = 120;
};

/// Rollout settings implied by how a checkpoint was trained: models trained
/// on hourly pairs step once per hour with t = 0.
template <typename T>
ode::RolloutConfig rollout_config_for(const model::Checkpoint<T>& ck, std::size_t horizon) {
  ode::RolloutConfig rc;
  rc.horizon_hours = horizon;
  if (ck.meta.contains("train_config")) {
    const auto& tc = ck.meta.at("train_config");
    if (tc.contains("pair_lag_hours") && tc.at("stage").template get<std::string>() == "1" &&
        tc.at("pair_lag_hours").template get<std::string>() == "1") {
      rc.steps_per_block = 1;
      rc.delta_t = 1.0;
    }
  }
  return rc;
}

template <typename T>
std::map<std::string, std::string> forecast_impl(const ForecastArgs& a, std::ostream& log) {
  const auto ck = model::Checkpoint<T>::load(a.ckpt);
  model::VelocityNet<T> net(ck.config);
  ck.restore(ck.has_group("ema/") ? "ema/" : "param/", net.parameters());
  Dataset ds = read_dataset(a.data, "--data");
  check_dataset_matches(ck, ds);
  ds.stats = train::stats_from(ck);
  std::size_t k = 0;
  if (a.init) {
    const auto idx = ds.index_of(parse_iso8601(*a.init));
    if (!idx) throw ConfigError("--init " + *a.init + " is not in the dataset");
    k = *idx;
  }
  StateField x0 = ds.states[k];
  apply_tp_transform(x0, ds.registry);
  x0 = normalize(x0, *ds.stats);
  const auto rc = rollout_config_for(ck, a.horizon);
  std::size_t evals = 0;
  const auto v = ode::model_velocity(net, ds.grid, ds.statics, ds.registry.static_vars().size(), x0.time, rc, &evals);
  const auto states = ode::rollout_states(v, x0, rc);
  ode::write_forecast(a.out, ds, states, x0.time, model::checkpoint_hash(a.ckpt), evals);
  log << "forecast " << a.horizon << " h from " << format_iso8601(x0.time) << ": " << evals << " model evaluations\n";
  return {{"model_evaluations", std::to_string(evals)}, {"init_time", format_iso8601(x0.time)}};
}

inline RunManifest forecast_command(const ForecastArgs& a, std::ostream& log) {
  if (a.horizon == 0 || a.horizon > a.max_horizon)
    throw ConfigError("--horizon must be in 1.." + std::to_string(a.max_horizon));
  if (!std::filesystem::exists(a.ckpt)) throw ConfigError("checkpoint not found: " + a.ckpt.string());
  RunManifest m;
  m.extra = model::checkpoint_dtype(a.ckpt) == "f64" ? forecast_impl<double>(a, log) : forecast_impl<float>(a, log);
  m.command = "forecast";
  m.config_hash = config_hash(std::nullopt, "horizon=" + std::to_string(a.horizon) + "\ninit=" + a.init.value_or("") + "\n");
  m.inputs["ckpt"] = a.ckpt.string();
  m.inputs["ckpt_hash"] = model::checkpoint_hash(a.ckpt);
  m.inputs["data"] = a.data.string();
  m.outputs["forecast"] = a.out.string();
  m.extra["horizon_hours"] = std::to_string(a.horizon);
  return m;
}

// ---- evaluate ------------------------------------------------------------

struct EvaluateArgs {
  std::string kind;
  std::filesystem::path forecast, out;
  std::optional<std::filesystem::path> truth, reference;
  std::vector<std::string> channels;
  std::optional<double> init_lat, init_lon;
  std::string storm_id = "S1";
  double threshold = 3.0;
  std::vector<int> boundary_hours{9, 21};
};

namespace detail {

inline std::optional<Timestamp> init_time_of(const Dataset& ds) {
  const auto it = ds.meta.find("init_time");
  if (it == ds.meta.end()) return std::nullopt;
  return parse_iso8601(it->second);
}

inline double lead_hours(const Dataset& ds, const StateField& s) {
  const auto init = init_time_of(ds);
  const Timestamp t0 = init ? *init : ds.states.front().time;
  return static_cast<double>((s.time - t0).count()) / 3600.0;
}

inline std::vector<std::size_t> select_channels(const Dataset& ds, const std::vector<std::string>& names) {
  std::vector<std::size_t> out;
  if (names.empty()) {
    for (std::size_t c = 0; c < ds.registry.n_channels(); ++c) out.push_back(c);
    return out;
  }
  const auto chans = ds.registry.channels();
  for (const auto& n : names) {
    std::size_t c = 0;
    while (c < chans.size() && chans[c].name != n) ++c;
    if (c == chans.size()) throw ConfigError("channel " + n + " is not in the dataset");
    out.push_back(c);
  }
  return out;
}

/// Forecast states, preceded by the truth's initial state when both are known.
inline std::vector<StateField> with_initial_state(const Dataset& fc, const std::optional<Dataset>& truth) {
  std::vector<StateField> out;
  if (truth) {
    if (const auto init = init_time_of(fc)) {
      if (const auto k = truth->index_of(*init)) out.push_back(truth->states[*k]);
    }
  }
  out.insert(out.end(), fc.states.begin(), fc.states.end());
  return out;
}

}  // namespace detail

inline RunManifest evaluate_command(const EvaluateArgs& a, std::ostream& log) {
  const Dataset fc = read_dataset(a.forecast, "--forecast");
  if (fc.states.empty()) throw ConfigError("--forecast has no states");
  std::optional<Dataset> truth;
  if (a.truth) {
    truth = read_dataset(*a.truth, "--truth");
    if (!(truth->grid == fc.grid)) throw ConfigError("forecast and truth grids differ");
  }
  RunManifest m;
  m.command = "evaluate";
  m.inputs["forecast"] = a.forecast.string();
  if (a.truth) m.inputs["truth"] = a.truth->string();
  m.extra["kind"] = a.kind;
  const auto chans = fc.registry.channels();

  if (a.kind == "rmse") {
    if (!truth) throw ConfigError("rmse needs --truth");
    if (truth->registry.n_channels() != fc.registry.n_channels()) throw ConfigError("forecast and truth channels differ");
    std::vector<diag::RmseRow> rows;
    for (const auto& s : fc.states) {
      const auto k = truth->index_of(s.time);
      if (!k) continue;
      for (std::size_t c : detail::select_channels(fc, a.channels))
        rows.push_back({static_cast<std::size_t>(detail::lead_hours(fc, s)), chans[c].name, diag::weighted_rmse(s, truth->states[*k], fc.grid, c)});
    }
    if (rows.empty()) throw ConfigError("no forecast times are present in --truth");
    diag::write_rmse_csv(a.out / "rmse.csv", rows);
    m.outputs["rmse"] = (a.out / "rmse.csv").string();
    log << "rmse: " << rows.size() << " rows\n";
  } else if (a.kind == "spectrum") {
    auto emit = [&](const Dataset& src, const std::vector<Timestamp>& times, const std::filesystem::path& path) {
      std::vector<diag::SpectrumRow> rows;
      for (Timestamp t : times) {
        const auto k = src.index_of(t);
        if (!k) continue;
        const double day = detail::lead_hours(fc, src.states[*k]) / 24.0;
        for (std::size_t c : detail::select_channels(src, a.channels)) {
          const auto sp = diag::zonal_power_spectrum(src.states[*k].channel(c), src.grid);
          for (std::size_t w = 0; w < sp.energy.size(); ++w) rows.push_back({sp.wavenumbers[w], sp.energy[w], day, chans[c].name});
        }
      }
      diag::write_spectrum_csv(path, rows);
      return rows.size();
    };
    std::vector<Timestamp> times;
    for (const auto& s : fc.states) {
      const double lh = detail::lead_hours(fc, s);
      if (std::fmod(lh, 24.0) == 0.0) times.push_back(s.time);
    }
    if (times.empty()) times.push_back(fc.states.back().time);
    const auto n = emit(fc, times, a.out / "spectrum.csv");
    m.outputs["spectrum"] = (a.out / "spectrum.csv").string();
    if (truth) {
      emit(*truth, times, a.out / "spectrum_truth.csv");
      m.outputs["spectrum_truth"] = (a.out / "spectrum_truth.csv").string();
    }
    log << "spectrum: " << n << " rows\n";
  } else if (a.kind == "energy") {
    std::vector<diag::EnergyBudget> rows;
    for (const auto& s : fc.states) rows.push_back(diag::energy_components(s, fc.registry, fc.grid));
    diag::write_energy_csv(a.out / "energy.csv", rows);
    m.outputs["energy"] = (a.out / "energy.csv").string();
    log << "energy: " << rows.size() << " rows\n";
  } else if (a.kind == "jumps") {
    const auto states = detail::with_initial_state(fc, truth);
    std::vector<double> ke;
    for (const auto& s : states) ke.push_back(diag::domain_kinetic_energy(s, fc.registry, fc.grid));
    const auto rep = diag::discontinuity_score(ke, utc_hour(states.front().time), a.boundary_hours, a.threshold);
    diag::write_jumps_csv(a.out / "jumps.csv", rep);
    m.outputs["jumps"] = (a.out / "jumps.csv").string();
    const auto flagged = rep.flagged();
    m.extra["flags"] = std::to_string(flagged.size());
    log << "jumps: " << flagged.size() << " flagged increments";
    for (const auto& r : flagged) log << " [" << r.utc_hour << " UTC z=" << r.z << "]";
    log << "\n";
  } else if (a.kind == "track") {
    if (!a.init_lat || !a.init_lon) throw ConfigError("track needs --init-lat and --init-lon");
    std::vector<track::CycloneFields> seq;
    const auto states = detail::with_initial_state(fc, truth);
    const Timestamp t0 = states.front().time;
    for (const auto& s : states) {
      const auto h = (s.time - t0).count() / 3600;
      if (h % 6 == 0) seq.push_back(track::fields_from_state(s, fc.registry, fc.grid, fc.statics));
    }
    const auto t = track::track_cyclone(seq, fc.grid, *a.init_lat, *a.init_lon);
    std::vector<track::TrackPoint> ref;
    if (a.reference) ref = track::read_reference_csv(*a.reference);
    const auto path = a.out / "tracks.csv";
    if (std::filesystem::exists(path)) std::filesystem::remove(path);
    track::write_track_csv(path, a.storm_id, t, ref);
    m.outputs["tracks"] = path.string();
    m.extra["termination"] = t.termination;
    m.extra["fixes"] = std::to_string(t.points.size());
    log << "track: " << t.points.size() << " fixes, " << t.termination << "\n";
  } else {
    throw ConfigError("--kind must be one of rmse, spectrum, energy, jumps, track");
  }
  m.config_hash = config_hash(std::nullopt, "kind=" + a.kind + "\n");
  return m;
}

/// Runs a command, writes its manifest and maps failures to exit codes.
inline int run_guarded(const std::function<RunManifest()>& body, const std::filesystem::path& out, const std::vector<std::string>& argv,
                       std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    RunManifest m = body();
    m.argv = argv;
    m.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    m.write(out);
    return kOk;
  } catch (const TrainingAbort& e) {
    err << "training aborted: " << e.what() << "\n";
    return kTrainingAbort;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
}

}  // namespace flowcast::app
