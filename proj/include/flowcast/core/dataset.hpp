#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "flowcast/core/binary_io.hpp"
#include "flowcast/core/error.hpp"
#include "flowcast/core/grid.hpp"
#include "flowcast/core/keyvalue.hpp"
#include "flowcast/core/norm.hpp"
#include "flowcast/core/registry.hpp"
#include "flowcast/core/state.hpp"
#include "flowcast/core/time.hpp"

namespace flowcast {

inline std::string default_units(const std::string& variable) {
  static const std::map<std::string, std::string> units = {
      {"Z", "m2 s-2"},   {"Q", "kg kg-1"}, {"T", "K"},       {"U", "m s-1"},   {"V", "m s-1"},
      {"U10M", "m s-1"}, {"V10M", "m s-1"}, {"T2M", "K"},    {"TD2M", "K"},    {"MSLP", "Pa"},
      {"TP", "kg m-2"},  {"ZS", "m2 s-2"},  {"LSM", "1"},    {"SOIL", "1"}};
  auto it = units.find(variable);
  return it == units.end() ? "1" : it->second;
}

/// In-memory dataset: time-ordered states on one grid plus static fields.
struct Dataset {
  GridSpec grid;
  VariableRegistry registry;
  std::vector<StateField> states;
  /// static_vars x H x W, same layout as StateField values.
  std::vector<double> statics;
  std::optional<NormStats> stats;
  std::string stats_provenance = "none";
  /// Free-form key/values echoed into the manifest (generator config, forecast metadata).
  std::map<std::string, std::string> meta;

  std::size_t size() const { return states.size(); }

  std::optional<std::size_t> index_of(Timestamp ts) const {
    auto it = std::lower_bound(states.begin(), states.end(), ts,
                               [](const StateField& s, Timestamp t) { return s.time < t; });
    if (it == states.end() || it->time != ts) return std::nullopt;
    return static_cast<std::size_t>(it - states.begin());
  }

  std::span<const double> static_field(std::size_t k) const {
    return {statics.data() + k * grid.size(), grid.size()};
  }
};

/// Non-owning subset of a dataset's timesteps.
class DatasetView {
 public:
  explicit DatasetView(const Dataset& base) : base_(&base) {
    index_.resize(base.size());
    for (std::size_t i = 0; i < index_.size(); ++i) index_[i] = i;
  }
  DatasetView(const Dataset& base, std::vector<std::size_t> index) : base_(&base), index_(std::move(index)) {}

  const Dataset& base() const { return *base_; }
  std::size_t size() const { return index_.size(); }
  const StateField& operator[](std::size_t i) const { return base_->states[index_[i]]; }
  std::size_t base_index(std::size_t i) const { return index_[i]; }
  const std::vector<std::size_t>& indices() const { return index_; }

 private:
  const Dataset* base_;
  std::vector<std::size_t> index_;
};

namespace dataset_io {

inline constexpr const char* kManifest = "manifest.txt";
inline constexpr const char* kStatics = "static.f32";

inline std::string state_filename(Timestamp ts) { return format_iso8601(ts) + ".f32"; }

inline std::string encode_values(const std::vector<double>& values) {
  std::vector<float> f(values.begin(), values.end());
  std::string bytes;
  io::append_f32(bytes, f);
  return bytes;
}

inline std::vector<double> decode_values(const std::string& bytes, std::size_t expected,
                                         const std::string& what) {
  auto f = io::decode_f32({bytes.data(), bytes.size()});
  if (f.size() != expected) throw Error(what + ": expected " + std::to_string(expected) + " values");
  return {f.begin(), f.end()};
}

inline KeyValueFile manifest_of(const Dataset& ds) {
  KeyValueFile kv;
  kv.set("format", std::string("flowcast-dataset"));
  kv.set("version", 1);
  kv.set("n_lat", ds.grid.n_lat());
  kv.set("n_lon", ds.grid.n_lon());
  kv.set("latitudes", KeyValueFile::join(ds.grid.latitudes()));
  kv.set("longitudes", KeyValueFile::join(ds.grid.longitudes()));
  kv.set("surface_vars", KeyValueFile::join(ds.registry.surface_vars()));
  kv.set("pressure_vars", KeyValueFile::join(ds.registry.pressure_vars()));
  kv.set("levels", KeyValueFile::join(ds.registry.levels()));
  kv.set("static_vars", KeyValueFile::join(ds.registry.static_vars()));
  kv.set("clock_vars", KeyValueFile::join(ds.registry.clock_vars()));
  kv.set("layout", std::string("C H W, little-endian float32, one file per timestamp"));
  std::vector<std::string> times;
  for (const auto& s : ds.states) times.push_back(format_iso8601(s.time));
  kv.set("timestamps", KeyValueFile::join(times));
  kv.set("normalized", std::string(!ds.states.empty() && ds.states.front().normalized ? "true" : "false"));
  kv.set("norm_stats_provenance", ds.stats_provenance);
  for (const auto& [k, v] : ds.meta) kv.set("meta." + k, v);
  for (const auto& ch : ds.registry.channels()) {
    kv.add_row("variables", {ch.name, ch.variable, ch.level ? KeyValueFile::format_double(*ch.level) : "-",
                             default_units(ch.variable)});
  }
  for (const auto& s : ds.registry.static_vars()) kv.add_row("variables", {s, s, "static", default_units(s)});
  if (ds.stats) {
    const auto chans = ds.registry.channels();
    for (std::size_t c = 0; c < ds.stats->size(); ++c) {
      kv.add_row("norm_stats", {chans[c].name, KeyValueFile::format_double(ds.stats->mean[c]),
                                KeyValueFile::format_double(ds.stats->std[c])});
    }
  }
  return kv;
}

/// Writes manifest.txt, static.f32 (if any) and one <ISO-8601>.f32 per state.
inline void write(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& s : ds.states) {
    s.check_shape(ds.registry, ds.grid);
    io::write_file(dir / state_filename(s.time), encode_values(s.values));
  }
  if (!ds.registry.static_vars().empty()) {
    if (ds.statics.size() != ds.registry.static_vars().size() * ds.grid.size()) {
      throw Error("dataset_io::write: static field size mismatch");
    }
    io::write_file(dir / kStatics, encode_values(ds.statics));
  }
  io::write_file(dir / kManifest, manifest_of(ds).serialize());
}

inline Dataset read(const std::filesystem::path& dir) {
  const auto kv = KeyValueFile::load(dir / kManifest);
  if (kv.get("format") != "flowcast-dataset") throw Error(dir.string() + ": not a flowcast dataset");
  GridSpec grid(kv.get_doubles("latitudes"), kv.get_doubles("longitudes"));
  if (grid.n_lat() != static_cast<std::size_t>(kv.get_int("n_lat")) ||
      grid.n_lon() != static_cast<std::size_t>(kv.get_int("n_lon"))) {
    throw Error(dir.string() + ": grid size disagrees with coordinate lists");
  }
  VariableRegistry reg(kv.get_list("surface_vars"), kv.get_list("pressure_vars"), kv.get_doubles("levels"),
                       kv.get_list("static_vars"), kv.get_list("clock_vars"));
  Dataset ds{grid, reg, {}, {}, std::nullopt, kv.get("norm_stats_provenance", "none"), {}};
  const bool normalized = kv.get("normalized", "false") == "true";
  for (const auto& iso : kv.get_list("timestamps")) {
    const Timestamp ts = parse_iso8601(iso);
    StateField s = StateField::like(reg, grid, ts);
    s.normalized = normalized;
    s.values = decode_values(io::read_file(dir / state_filename(ts)), s.size(), iso);
    ds.states.push_back(std::move(s));
  }
  if (!reg.static_vars().empty()) {
    ds.statics = decode_values(io::read_file(dir / kStatics), reg.static_vars().size() * grid.size(), kStatics);
  }
  if (const auto* rows = kv.table("norm_stats")) {
    NormStats st;
    for (const auto& r : *rows) {
      if (r.size() != 3) throw Error("malformed norm_stats row");
      st.mean.push_back(std::stod(r[1]));
      st.std.push_back(std::stod(r[2]));
    }
    ds.stats = st;
  }
  for (const auto& k : kv.keys()) {
    if (k.rfind("meta.", 0) == 0) ds.meta[k.substr(5)] = kv.get(k);
  }
  return ds;
}

}  // namespace dataset_io
}  // namespace flowcast
