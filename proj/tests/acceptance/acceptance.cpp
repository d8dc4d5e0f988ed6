// Acceptance checks: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "flowcast/app/experiment.hpp"
#include "flowcast/core/dataset.hpp"
#include "flowcast/diag/energy.hpp"
#include "flowcast/diag/rmse.hpp"
#include "flowcast/diag/spectrum.hpp"
#include "flowcast/model/checkpoint.hpp"
#include "flowcast/model/conditioning.hpp"
#include "flowcast/model/param_count.hpp"
#include "flowcast/model/velocity_net.hpp"
#include "flowcast/ode/rollout.hpp"
#include "flowcast/synth/atmosphere.hpp"
#include "flowcast/track/cyclone.hpp"
#include "flowcast/train/losses.hpp"
#include "flowcast/train/trainer.hpp"
#include "flowcast/transport/paths.hpp"
#include "flowcast/transport/table_oracle.hpp"

using namespace flowcast;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

std::vector<double> randn(std::size_t n, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> d(0.0, sd);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// Travelling wave on a small grid with one static field.
Dataset wave_dataset(std::size_t hours, std::size_t n_lat = 8, std::size_t n_lon = 16) {
  Dataset ds{GridSpec::without_poles(n_lat, n_lon), VariableRegistry({"T2M"}, {"U"}, {500, 850}, {"LSM"})};
  ds.statics.assign(ds.grid.size(), 0.0);
  for (std::size_t i = 0; i < n_lat; ++i)
    for (std::size_t j = 0; j < n_lon / 2; ++j) ds.statics[i * n_lon + j] = 1.0;
  const Timestamp t0 = make_timestamp(2021, 3, 1, 0);
  const double w = 2 * std::numbers::pi / 24;
  for (std::size_t h = 0; h < hours; ++h) {
    auto s = StateField::like(ds.registry, ds.grid, t0 + std::chrono::hours(h));
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < n_lat; ++i)
        for (std::size_t j = 0; j < n_lon; ++j) {
          const double lon = ds.grid.lon(j) * kDegToRad, lat = ds.grid.lat(i) * kDegToRad;
          s.at(c, i, j) = 10.0 * c + (1.0 + c) * std::cos(lat) * std::sin(lon - w * h + 0.7 * c) + 0.3 * std::sin(2 * lat + 0.05 * h);
        }
    ds.states.push_back(std::move(s));
  }
  return ds;
}

model::ModelConfig small_model(const Dataset& ds) {
  auto m = model::ModelConfig::tiny();
  m.n_lat = ds.grid.n_lat();
  m.n_lon = ds.grid.n_lon();
  m.n_surface = 1;
  m.n_pressure_vars = 1;
  m.n_levels = 2;
  m.cond_channels = model::conditioning_channels(ds.registry.static_vars().size());
  return m;
}

// ---- 1 -------------------------------------------------------------------
Outcome transport_paths() {
  Outcome o;
  const auto table = transport::path_tables_agree(1000, 8, 20240601);
  o.require(table.agree && table.max_abs_error < 1e-12, "table cells");
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  const double h = 1e-4;
  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto x0 = randn(8, rng), x1 = randn(8, rng), noise = randn(8, rng);
    const double t = u(rng), sm = trial % 2 ? 0.0 : 0.1;
    const std::span<const double> nz(noise);
    const auto op = transport::ot_path_sample(noise, x1, t + h, sm), om = transport::ot_path_sample(noise, x1, t - h, sm);
    const auto o0 = transport::ot_path_sample(noise, x1, t, sm);
    const auto dp = transport::dynamic_path_sample(x0, x1, t + h, sm, nz), dm = transport::dynamic_path_sample(x0, x1, t - h, sm, nz);
    const auto d0 = transport::dynamic_path_sample(x0, x1, t, sm, nz);
    for (std::size_t i = 0; i < 8; ++i) {
      worst = std::max(worst, std::abs((op.x_t[i] - om.x_t[i]) / (2 * h) - o0.u_target[i]) / std::max(1.0, std::abs(o0.u_target[i])));
      worst = std::max(worst, std::abs((dp.x_t[i] - dm.x_t[i]) / (2 * h) - d0.u_target[i]) / std::max(1.0, std::abs(d0.u_target[i])));
    }
  }
  o.require(worst < 1e-6, "finite-difference velocity");
  o.detail << "cases=" << table.cases << " max_abs_err=" << table.max_abs_error << " fd_rel_err=" << worst;
  return o;
}

// ---- 2 -------------------------------------------------------------------
Outcome euler() {
  Outcome o;
  const ode::VelocityFn v = [](std::span<const double> x, double, std::size_t) { return std::vector<double>(x.begin(), x.end()); };
  ode::RolloutConfig rc;
  rc.horizon_hours = 6;
  const double got = ode::euler_block(v, std::vector<double>{1.0}, 0, rc).back()[0];
  // The same recursion in exact integer arithmetic: x <- x + x/6.
  long long num = 1, den = 1;
  for (int n = 0; n < 6; ++n) {
    num = num * 6 + num;
    den *= 6;
  }
  o.require(num == 117649 && den == 46656, "rational recursion");
  const double exact = static_cast<double>(num) / static_cast<double>(den);
  const double ulps = std::abs(got - exact) / std::numeric_limits<double>::epsilon() / exact;
  o.require(ulps <= 4, "double result within 4 ulp of 7^6/6^6");
  auto f = [](std::span<const double> x, double) { return std::vector<double>(x.begin(), x.end()); };
  const auto probe = ode::solve_convergence_probe(f, std::vector<double>{1.0}, {std::exp(1.0)}, {1.0 / 6, 1.0 / 12, 1.0 / 24});
  o.require(probe.slope >= 0.8 && probe.slope <= 1.2, "convergence slope");
  o.detail << "x6=" << got << " (7^6/6^6=" << num << "/" << den << ", " << ulps << " ulp) slope=" << probe.slope;
  return o;
}

// ---- 3 -------------------------------------------------------------------
Outcome identity_at_init() {
  Outcome o;
  for (auto cfg : {model::ModelConfig::tiny(), model::ModelConfig::desk()}) {
    model::VelocityNet<double> net(cfg);
    std::mt19937_64 rng(3);
    const std::size_t hw = cfg.n_lat * cfg.n_lon;
    const auto state = randn(cfg.channels() * hw, rng), cond = randn(cfg.cond_channels * hw, rng);
    model::ForwardTrace trace;
    const auto out = net.evaluate(state, 0.4, cond, &trace);
    for (const auto& b : trace.blocks) o.require(b.attn_max == 0.0 && b.mlp_max == 0.0, "sub-block output " + b.block);
    ad::Tape<double> tape(false);
    auto z = net.embed(tape, tape.input(state, cfg.channels(), hw), tape.input(cond, cfg.cond_channels, hw));
    auto ref = net.recover(tape, ad::add(z, z));
    double err = 0;
    for (std::size_t k = 0; k < out.size(); ++k) err = std::max(err, std::abs(out[k] - ref.data()[k]));
    o.require(err <= 1e-10, "output equals recover(embed)");
    o.detail << "blocks=" << trace.blocks.size() << " max_err=" << err << " ";
  }
  return o;
}

// ---- 4 -------------------------------------------------------------------
Outcome gradient_check() {
  Outcome o;
  const auto raw = wave_dataset(48);
  const auto set = train::prepare_training_set(raw);
  train::TrainConfig tc;
  tc.model = small_model(raw);
  tc.seed = 4;
  train::Trainer<double> tr(tc, set);
  auto& ps = tr.net().parameters();
  o.require(ps.total() <= 50'000, "parameter budget");
  std::mt19937_64 rng(44);
  std::normal_distribution<double> d(0.0, 0.3);
  for (std::size_t i = 0; i < ps.size(); ++i)
    for (auto& v : ps[i].value) v = d(rng);
  const train::Stage1Sample sample{6, 12, 0.37};
  const auto base = tr.stage1_sample(sample, true);
  std::uniform_int_distribution<std::size_t> pick_param(0, ps.size() - 1);
  double worst = 0;
  const double h = 1e-4;
  for (int checked = 0; checked < 20; ++checked) {
    const std::size_t pi = pick_param(rng);
    auto& p = ps[pi];
    std::uniform_int_distribution<std::size_t> pick(0, p.size() - 1);
    const std::size_t k = pick(rng);
    const double keep = p.value[k];
    p.value[k] = keep + h;
    const double fp = tr.stage1_sample(sample, false).loss;
    p.value[k] = keep - h;
    const double fm = tr.stage1_sample(sample, false).loss;
    p.value[k] = keep;
    const double numeric = (fp - fm) / (2 * h), analytic = base.grads[pi][k];
    worst = std::max(worst, std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8}));
  }
  o.require(worst < 1e-4, "relative error");
  o.detail << "params=" << ps.total() << " coords=20 max_rel_err=" << worst;
  return o;
}

// ---- 5 -------------------------------------------------------------------
Outcome loss_oracles() {
  Outcome o;
  const std::size_t C = 3, H = 4, W = 8;
  const auto grid = GridSpec::without_poles(H, W);
  const VariableRegistry reg({"A"}, {"B"}, {500, 850}, {});
  std::mt19937_64 rng(55);
  std::uniform_real_distribution<double> pos(0.2, 2.0);
  double worst_loss = 0, worst_rmse = 0;
  for (int trial = 0; trial < 100; ++trial) {
    train::WeightScheme w;
    for (std::size_t i = 0; i < H; ++i) w.w_lat.push_back(pos(rng));
    for (std::size_t c = 0; c < C; ++c) {
      w.w_lev.push_back(pos(rng));
      w.w_var.push_back(pos(rng));
    }
    const auto v = randn(C * H * W, rng), a = randn(C * H * W, rng), b = randn(C * H * W, rng);
    double ref = 0;
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < W; ++j) {
          const std::size_t k = c * H * W + i * W + j;
          const double e = v[k] - (b[k] - a[k]);
          ref += w.w_lat[i] * w.w_lev[c] * w.w_var[c] * e * e;
        }
    ref /= static_cast<double>(C * H * W);
    worst_loss = std::max(worst_loss, std::abs(train::stage1_loss(v, a, b, w, W) - ref));

    StateField f = StateField::like(reg, grid), t = StateField::like(reg, grid);
    f.values = v;
    t.values = a;
    std::vector<double> cw(H);
    double mean = 0;
    for (std::size_t i = 0; i < H; ++i) mean += cw[i] = std::cos(grid.lat(i) * std::numbers::pi / 180.0);
    mean /= static_cast<double>(H);
    for (std::size_t c = 0; c < C; ++c) {
      double acc = 0;
      for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < W; ++j) {
          const double e = v[c * H * W + i * W + j] - a[c * H * W + i * W + j];
          acc += cw[i] / mean * e * e;
        }
      worst_rmse = std::max(worst_rmse, std::abs(diag::weighted_rmse(f, t, grid, c) - std::sqrt(acc / static_cast<double>(H * W))));
    }
  }
  const double e0 = std::abs(train::w_tau(0) - 1.0), e24 = std::abs(train::w_tau(24) - 1.0 / std::sqrt(2.0)),
               e48 = std::abs(train::w_tau(48) - 1.0 / std::sqrt(3.0));
  o.require(worst_loss <= 1e-12, "stage1_loss");
  o.require(worst_rmse <= 1e-12, "weighted_rmse");
  o.require(e0 <= 1e-12 && e24 <= 1e-12 && e48 <= 1e-12, "w_tau");
  o.detail << "loss_err=" << worst_loss << " rmse_err=" << worst_rmse << " w_tau_err=" << std::max({e0, e24, e48});
  return o;
}

// ---- 6 -------------------------------------------------------------------
Outcome phenomenon() {
  Outcome o;
  const app::JumpExperimentConfig cfg;
  const auto r = app::run_jump_experiment(cfg, &std::cerr);
  std::size_t truth_flags = 0;
  for (const auto& t : r.truth) truth_flags += t.flagged().size();
  std::size_t forecast_flags = 0;
  for (const auto& s : r.two_stage) forecast_flags += s.ke.flagged().size();
  const double z2 = r.max_boundary_z(r.two_stage), zb = r.max_boundary_z(r.baseline);
  const double rmse2 = app::JumpExperimentResult::mean_rmse(r.two_stage), rmseb = app::JumpExperimentResult::mean_rmse(r.baseline);
  o.require(z2 < 3.0 && forecast_flags == 0, "(a) two-stage rollout free of boundary flags");
  o.require(r.truth_flags_all_boundaries(), "(b) truth flags 09 and 21 UTC");
  o.require(rmse2 <= rmseb, "(c) two-stage RMSE at 48 h <= baseline");
  o.detail << "grid=" << cfg.n_lat << "x" << cfg.n_lon << " inits=" << cfg.test_inits << " (a) max_boundary_z=" << z2
           << " flags=" << forecast_flags << " (b) truth_flags=" << truth_flags << " (c) rmse48 two-stage=" << rmse2
           << " baseline=" << rmseb << " baseline_max_boundary_z=" << zb << " wall=" << r.seconds << "s";
  return o;
}

// ---- 7 -------------------------------------------------------------------
Outcome spectrum() {
  Outcome o;
  const auto grid = GridSpec::without_poles(32, 64);
  double worst_frac = 1, worst_parseval = 0, worst_rot = 0;
  std::mt19937_64 rng(77);
  for (int m : {1, 3, 7, 16, 31}) {
    std::vector<double> f(grid.size());
    for (std::size_t i = 0; i < 32; ++i)
      for (std::size_t j = 0; j < 64; ++j) f[i * 64 + j] = std::cos(m * grid.lon(j) * kDegToRad + 0.3);
    const auto sp = diag::zonal_power_spectrum(f, grid);
    double total = 0;
    for (double e : sp.energy) total += e;
    worst_frac = std::min(worst_frac, sp.energy[static_cast<std::size_t>(m)] / total);
  }
  for (int trial = 0; trial < 10; ++trial) {
    const auto f = randn(grid.size(), rng);
    const auto sp = diag::zonal_power_spectrum(f, grid);
    double total = 0, direct = 0;
    for (double e : sp.energy) total += e;
    std::size_t rows = 0;
    for (std::size_t i = 0; i < 32; ++i) {
      if (grid.lat(i) < -60 || grid.lat(i) > 60) continue;
      ++rows;
      for (std::size_t j = 0; j < 64; ++j) direct += f[i * 64 + j] * f[i * 64 + j] / 64.0;
    }
    direct /= static_cast<double>(rows);
    worst_parseval = std::max(worst_parseval, std::abs(total - direct) / direct);
    const std::size_t shift = 1 + static_cast<std::size_t>(trial) * 5;
    std::vector<double> g(f.size());
    for (std::size_t i = 0; i < 32; ++i)
      for (std::size_t j = 0; j < 64; ++j) g[i * 64 + (j + shift) % 64] = f[i * 64 + j];
    const auto sg = diag::zonal_power_spectrum(g, grid);
    for (std::size_t k = 0; k < sp.energy.size(); ++k) worst_rot = std::max(worst_rot, std::abs(sp.energy[k] - sg.energy[k]));
  }
  o.require(worst_frac >= 0.999, "harmonic concentration");
  o.require(worst_parseval <= 1e-10, "Parseval");
  o.require(worst_rot <= 1e-10, "rotation invariance");
  o.detail << "min_fraction_at_m=" << worst_frac << " parseval_rel_err=" << worst_parseval << " rotation_err=" << worst_rot;
  return o;
}

// ---- 8 -------------------------------------------------------------------
Outcome energy() {
  Outcome o;
  const std::vector<double> levels{200, 500, 850, 1000};
  const double c = 3.7;
  const double got = diag::column_integral(levels, std::vector<double>(levels.size(), c));
  const double exact = c * (1000.0 - 200.0) * 100.0 / diag::kGravity;
  o.require(got == exact || std::abs(got - exact) <= 4 * std::numeric_limits<double>::epsilon() * exact, "constant column");
  const double k = diag::kinetic_density(3, 4);
  o.require(k == 12.5, "k(3,4)");
  // Latent term on a pressure-level state: doubling q doubles it, q = 0 gives 0.
  const auto grid = GridSpec::without_poles(4, 8);
  const VariableRegistry reg({}, {"U", "V", "T", "Z", "Q"}, {500, 850}, {});
  std::mt19937_64 rng(88);
  std::uniform_real_distribution<double> q(0.0, 0.02), tt(250, 300);
  auto s = StateField::like(reg, grid);
  for (std::size_t ch = 0; ch < reg.n_channels(); ++ch)
    for (auto& v : s.channel(ch)) v = reg.channels()[ch].variable == "Q" ? q(rng) : tt(rng);
  auto s2 = s, s0 = s;
  for (double lev : reg.levels()) {
    for (auto& v : s2.channel(reg.channel("Q", lev))) v *= 2;
    for (auto& v : s0.channel(reg.channel("Q", lev))) v = 0;
  }
  const double l1 = diag::energy_components(s, reg, grid).latent, l2 = diag::energy_components(s2, reg, grid).latent;
  const double l0 = diag::energy_components(s0, reg, grid).latent;
  o.require(l0 == 0.0 && std::abs(l2 - 2 * l1) <= 1e-12 * std::abs(l1), "latent linear in q");
  o.detail << "column=" << got << " exact=" << exact << " k=" << k << " latent_ratio=" << l2 / l1;
  return o;
}

// ---- 9 -------------------------------------------------------------------
Outcome tracker() {
  Outcome o;
  const auto grid = GridSpec::with_poles(181, 360);
  auto moving = [&](double lat0, double lon0, double dlat, double dlon) {
    std::vector<track::CycloneFields> seq;
    for (int k = 0; k < 20; ++k)
      seq.push_back(track::synthetic_vortex(grid, lat0 + dlat * k, lon0 + dlon * k, 2500, 300, 30,
                                            make_timestamp(2021, 8, 1, 0) + std::chrono::hours(6 * k)));
    return seq;
  };
  auto lon_diff = [](double a, double b) {
    double d = std::fmod(a - b + 540.0, 360.0) - 180.0;
    return std::abs(d);
  };
  double worst = 0;
  std::size_t fixes = 0;
  for (const auto& [lat0, lon0, dlat, dlon] : std::vector<std::array<double, 4>>{{12.3, 150.7, 0.8, -1.8}, {-14.6, 80.2, -0.7, -1.5}}) {
    const auto t = track::track_cyclone(moving(lat0, lon0, dlat, dlon), grid, lat0, lon0);
    o.require(t.points.size() == 20, "track length");
    fixes += t.points.size();
    for (std::size_t k = 0; k < t.points.size(); ++k)
      worst = std::max({worst, std::abs(t.points[k].lat - (lat0 + dlat * k)), lon_diff(t.points[k].lon, lon0 + dlon * k)});
  }
  o.require(worst <= 1.0, "within one grid cell");
  // Southern vortex with the northern sign convention fails the vorticity test.
  const auto south = track::synthetic_vortex(grid, -15, 80, 2500, 300, 30);
  auto flipped = south;
  for (auto& v : flipped.u850) v = -v;
  for (auto& v : flipped.v850) v = -v;
  const bool sh_ok = track::check_criteria(south, grid, -15, 80, {}).accept && !track::check_criteria(flipped, grid, -15, 80, {}).accept;
  o.require(sh_ok, "southern hemisphere sign");
  const double eq = track::haversine_km(0, 0, 0, 1);
  const double quarter = track::haversine_km(0, 0, 90, 0);
  o.require(std::abs(eq - 111.195) / 111.195 < 1e-3, "111.195 km per degree");
  o.require(std::abs(quarter - 6371.0 * std::numbers::pi / 2) / quarter < 1e-3, "quarter meridian");
  o.detail << "fixes=" << fixes << " max_offset_deg=" << worst << " km_per_deg=" << eq;
  return o;
}

// ---- 10 ------------------------------------------------------------------
Outcome parameter_accounting() {
  Outcome o;
  const auto cfg = model::ModelConfig::desk();
  model::VelocityNet<double> net(cfg);
  const auto& ps = net.parameters();
  std::size_t blocks = 0;
  for (std::size_t l = 0; l < 3; ++l) {
    const std::size_t C = cfg.layer_dim(l);
    for (std::size_t b = 0; b < cfg.depths[l]; ++b) {
      const auto prefix = model::VelocityNet<double>::block_name(l, b) + ".mod.";
      std::size_t n = 0;
      for (std::size_t i = 0; i < ps.size(); ++i)
        if (ps[i].name.find(prefix) != std::string::npos) n += ps[i].size();
      o.require(n == cfg.time_embed_dim * cfg.lowrank_r + cfg.lowrank_r * 6 * C + 6 * C, prefix);
      ++blocks;
    }
  }
  const auto paper = model::ModelConfig::paper();
  const auto low = model::count_parameters(paper, true), full = model::count_parameters(paper, false);
  o.require(low.total < full.total, "low rank smaller at paper scale");
  o.detail << "blocks=" << blocks << " paper_full=" << full.total << " paper_low_rank=" << low.total;
  return o;
}

// ---- 11 ------------------------------------------------------------------
Outcome determinism() {
  Outcome o;
  const fs::path dir = fs::temp_directory_path() / "flowcast_acceptance";
  fs::remove_all(dir);
  synth::SynthConfig sc;
  sc.n_lat = 16;
  sc.n_lon = 32;
  sc.hours = 24;
  sc.jump_eps = 0.2;
  const auto ds = synth::generate(sc);
  dataset_io::write(ds, dir / "a");
  const auto back = dataset_io::read(dir / "a");
  dataset_io::write(back, dir / "b");
  bool same_files = true;
  for (const auto& e : fs::directory_iterator(dir / "a")) same_files &= io::read_file(e.path()) == io::read_file(dir / "b" / e.path().filename());
  bool values = back.states.size() == ds.states.size();
  for (std::size_t k = 0; values && k < ds.states.size(); ++k)
    for (std::size_t i = 0; i < ds.states[k].values.size(); ++i)
      values &= back.states[k].values[i] == static_cast<double>(static_cast<float>(ds.states[k].values[i]));
  o.require(same_files && values, "dataset roundtrip");

  const auto raw = wave_dataset(72);
  const auto set = train::prepare_training_set(raw);
  train::TrainConfig tc;
  tc.model = small_model(raw);
  tc.steps = 12;
  tc.lr = 3e-3;
  tc.seed = 11;
  tc.checkpoint_every = 6;
  train::Trainer<float> a(tc, set), b(tc, set);
  a.run(dir / "run_a");
  b.run(dir / "run_b");
  bool curves = a.metrics().size() == b.metrics().size();
  for (std::size_t i = 0; curves && i < a.metrics().size(); ++i) curves &= a.metrics()[i].loss == b.metrics()[i].loss;
  o.require(curves && io::read_file(dir / "run_a" / "metrics.csv") == io::read_file(dir / "run_b" / "metrics.csv"), "loss curves");
  const auto ck_bytes = io::read_file(dir / "run_a" / "checkpoint.bin");
  const auto ck = model::Checkpoint<float>::parse(ck_bytes);
  o.require(ck.serialize() == ck_bytes, "checkpoint roundtrip");
  o.require(ck_bytes == io::read_file(dir / "run_b" / "checkpoint.bin"), "checkpoints identical");
  // Stopping halfway and resuming from the checkpoint reproduces the tail.
  train::Trainer<float> c(tc, set);
  for (int i = 0; i < 6; ++i) c.step();
  const auto mid = model::Checkpoint<float>::parse(c.checkpoint().serialize());
  train::Trainer<float> d(tc, set);
  d.resume(mid);
  while (d.step_count() < tc.steps) d.step();
  bool tail = d.metrics().size() == 6;
  for (std::size_t i = 0; tail && i < 6; ++i) tail &= d.metrics()[i].loss == a.metrics()[6 + i].loss;
  o.require(tail, "resume");
  o.detail << "states=" << ds.states.size() << " steps=" << tc.steps << " final_loss=" << a.metrics().back().loss;
  fs::remove_all(dir);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"transport path oracle", transport_paths},
      {"euler correctness", euler},
      {"identity at initialization", identity_at_init},
      {"stage-1 gradient check", gradient_check},
      {"loss oracles", loss_oracles},
      {"two-stage training removes boundary jumps", phenomenon},
      {"zonal spectrum", spectrum},
      {"energy diagnostics", energy},
      {"cyclone tracker", tracker},
      {"parameter accounting", parameter_accounting},
      {"determinism and persistence", determinism},
  };
  // Optional list of criterion numbers to run, e.g. `acceptance 1 2 7`.
  std::vector<bool> selected(criteria.size(), argc == 1);
  for (int i = 1; i < argc; ++i) {
    const int k = std::atoi(argv[i]);
    if (k >= 1 && k <= static_cast<int>(criteria.size())) selected[static_cast<std::size_t>(k - 1)] = true;
  }
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected[i]) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %2zu %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.str().c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed;
}
