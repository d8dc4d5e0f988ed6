#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "flowcast/app/commands.hpp"

namespace fs = std::filesystem;
using namespace flowcast;

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"flowcast: flow-matching weather forecasting on synthetic atmospheres"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(FLOWCAST_VERSION));

  // gen-data
  app::GenDataArgs gen;
  auto* g = app.add_subcommand("gen-data", "generate a synthetic hourly dataset");
  g->add_option("--config", gen.config, "generator config (key = value)")->required();
  g->add_option("--out", gen.out, "output dataset directory")->required();
  std::uint64_t gen_seed = 0;
  double gen_eps = 0;
  auto* gs = g->add_option("--seed", gen_seed, "overrides the config seed");
  auto* ge = g->add_option("--jump-eps", gen_eps, "overrides jump_eps (relative to channel std)");

  // train
  app::TrainArgs tr;
  auto* t = app.add_subcommand("train", "run stage-1 or stage-2 training");
  t->add_option("--stage", tr.stage, "1 (flow matching) or 2 (hourly rollout fine-tuning)")->required()->check(CLI::IsMember({1, 2}));
  t->add_option("--config", tr.config, "training config")->required();
  t->add_option("--data", tr.data, "training dataset directory")->required();
  t->add_option("--out", tr.out, "run directory for checkpoint.bin and metrics.csv")->required();
  std::string tr_ckpt;
  std::size_t tr_ar = 0;
  std::uint64_t tr_seed = 0;
  auto* tc = t->add_option("--ckpt", tr_ckpt, "initial checkpoint (required for stage 2)");
  auto* ta = t->add_option("--ar-steps", tr_ar, "stage-2 rollout length in hours");
  auto* ts = t->add_option("--seed", tr_seed, "overrides the config seed");
  t->add_flag("--resume", tr.resume, "continue from checkpoint.bin in --out");

  // forecast
  app::ForecastArgs fc;
  auto* f = app.add_subcommand("forecast", "roll a trained model forward hour by hour");
  f->add_option("--ckpt", fc.ckpt, "trained checkpoint")->required();
  f->add_option("--data", fc.data, "dataset holding the initial state")->required();
  f->add_option("--out", fc.out, "forecast directory")->required();
  f->add_option("--horizon", fc.horizon, "lead time in hours")->default_val(24);
  f->add_option("--max-horizon", fc.max_horizon, "horizon cap")->default_val(120);
  std::string fc_init;
  auto* fi = f->add_option("--init", fc_init, "initial time (YYYY-MM-DDTHH:MM:SS); default first state");

  // evaluate
  app::EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "compute diagnostics as CSV");
  e->add_option("--kind", ev.kind, "rmse | spectrum | energy | jumps | track")
      ->required()
      ->check(CLI::IsMember({"rmse", "spectrum", "energy", "jumps", "track"}));
  e->add_option("--forecast", ev.forecast, "forecast (or any dataset) directory")->required();
  e->add_option("--out", ev.out, "output directory")->required();
  std::string ev_truth, ev_ref;
  double ev_lat = 0, ev_lon = 0;
  auto* et = e->add_option("--truth", ev_truth, "verifying dataset");
  auto* er = e->add_option("--reference", ev_ref, "reference track CSV (time,lat,lon)");
  auto* ela = e->add_option("--init-lat", ev_lat, "initial storm latitude");
  auto* elo = e->add_option("--init-lon", ev_lon, "initial storm longitude");
  e->add_option("--channels", ev.channels, "restrict rmse/spectrum to these channels");
  e->add_option("--storm-id", ev.storm_id, "storm identifier for the track CSV");
  e->add_option("--threshold", ev.threshold, "jump flag threshold")->default_val(3.0);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? app::kOk : app::kUsage;
  }

  if (g->parsed()) {
    if (*gs) gen.seed = gen_seed;
    if (*ge) gen.jump_eps = gen_eps;
    return app::run_guarded([&] { return app::gen_data(gen, std::cout); }, gen.out, args, std::cerr);
  }
  if (t->parsed()) {
    if (*tc) tr.ckpt = fs::path(tr_ckpt);
    if (*ta) tr.ar_steps = tr_ar;
    if (*ts) tr.seed = tr_seed;
    return app::run_guarded([&] { return app::train_command(tr, std::cout); }, tr.out, args, std::cerr);
  }
  if (f->parsed()) {
    if (*fi) fc.init = fc_init;
    return app::run_guarded([&] { return app::forecast_command(fc, std::cout); }, fc.out, args, std::cerr);
  }
  if (*et) ev.truth = fs::path(ev_truth);
  if (*er) ev.reference = fs::path(ev_ref);
  if (*ela) ev.init_lat = ev_lat;
  if (*elo) ev.init_lon = ev_lon;
  return app::run_guarded([&] { return app::evaluate_command(ev, std::cout); }, ev.out, args, std::cerr);
}
