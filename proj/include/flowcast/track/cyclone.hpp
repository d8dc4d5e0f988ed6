#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "flowcast/core/error.hpp"
#include "flowcast/core/grid.hpp"
#include "flowcast/core/keyvalue.hpp"
#include "flowcast/core/registry.hpp"
#include "flowcast/core/state.hpp"
#include "flowcast/core/time.hpp"

namespace flowcast::track {

inline constexpr double kEarthRadiusKm = 6371.0;

/// Great-circle distance in km.
inline double haversine_km(double lat1, double lon1, double lat2, double lon2) {
  const double p1 = lat1 * kDegToRad, p2 = lat2 * kDegToRad;
  const double dp = p2 - p1, dl = (lon2 - lon1) * kDegToRad;
  const double h = std::sin(dp / 2) * std::sin(dp / 2) + std::cos(p1) * std::cos(p2) * std::sin(dl / 2) * std::sin(dl / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

struct CriteriaConfig {
  double vort_threshold = 5e-5;      // s^-1, sign flipped south of the equator
  double criteria_radius_km = 278;
  double wind_threshold = 8;         // m/s, over land only
  double search_radius_km = 445;
  double step_hours = 6;
  std::optional<double> thickness_threshold;  // m^2 s^-2; reported only unless set

  void validate() const {
    if (!(criteria_radius_km > 0) || !(search_radius_km > 0)) throw ConfigError("tracker radii must be positive");
  }
};

struct TrackPoint {
  Timestamp time{};
  double lat = 0, lon = 0;
  double mslp_min = 0;  // Pa
};

struct Track {
  std::vector<TrackPoint> points;
  std::string termination;  // "criteria failed", "no minimum", "end of sequence"
};

/// Fields the tracker reads at one time, each H x W.
struct CycloneFields {
  Timestamp time{};
  std::vector<double> mslp, u850, v850, z850, z200, u10, v10, lsm;
};

struct MslpMinimum {
  std::size_t i = 0, j = 0;
  double lat = 0, lon = 0, value = 0;
};

/// Grid point of lowest MSLP within radius_km of the centre. Ties go to the
/// smallest row index, then the smallest column index.
inline MslpMinimum find_mslp_minimum(const std::vector<double>& mslp, const GridSpec& grid, double lat, double lon,
                                     double radius_km) {
  if (mslp.size() != grid.size()) throw Error("find_mslp_minimum: field does not match grid");
  std::optional<MslpMinimum> best;
  for (std::size_t i = 0; i < grid.n_lat(); ++i)
    for (std::size_t j = 0; j < grid.n_lon(); ++j) {
      if (haversine_km(lat, lon, grid.lat(i), grid.lon(j)) > radius_km) continue;
      const double v = mslp[i * grid.n_lon() + j];
      if (!best || v < best->value) best = MslpMinimum{i, j, grid.lat(i), grid.lon(j), v};
    }
  if (!best) throw Error("find_mslp_minimum: no grid point within the search radius");
  return *best;
}

/// zeta = dv/dx - du/dy with dx = R cos(phi) dlambda and dy = R dphi. Centred
/// differences, longitude wrapped, one-sided in the first and last rows. The
/// metric term u tan(phi) / R is not included. Rows at a pole get dv/dx = 0.
inline std::vector<double> relative_vorticity(const std::vector<double>& u, const std::vector<double>& v, const GridSpec& grid) {
  const std::size_t H = grid.n_lat(), W = grid.n_lon();
  if (u.size() != grid.size() || v.size() != grid.size()) throw Error("relative_vorticity: fields do not match grid");
  const double R = kEarthRadiusKm * 1000.0;
  const double dlam = grid.dlon_deg() * kDegToRad;
  std::vector<double> z(grid.size());
  for (std::size_t i = 0; i < H; ++i) {
    const double c = std::cos(grid.lat(i) * kDegToRad);
    const std::size_t a = i == 0 ? 0 : i - 1, b = i + 1 == H ? H - 1 : i + 1;
    const double dphi = (grid.lat(a) - grid.lat(b)) * kDegToRad;
    for (std::size_t j = 0; j < W; ++j) {
      const std::size_t e = (j + 1) % W, w = (j + W - 1) % W;
      const double dvdx = std::abs(c) < 1e-12 ? 0.0 : (v[i * W + e] - v[i * W + w]) / (2.0 * R * c * dlam);
      const double dudy = (u[a * W + j] - u[b * W + j]) / (R * dphi);
      z[i * W + j] = dvdx - dudy;
    }
  }
  return z;
}

struct CriteriaResult {
  bool accept = false;
  std::vector<std::string> reasons;  // failed criteria
  double vorticity = 0;              // hemisphere-signed maximum within the radius
  double max_wind10 = 0;
  double thickness_max = 0;          // Z200 - Z850 maximum within the radius
  bool over_land = false;
};

inline CriteriaResult check_criteria(const CycloneFields& f, const GridSpec& grid, double lat, double lon, const CriteriaConfig& cfg) {
  cfg.validate();
  const std::size_t n = grid.size();
  for (const auto* v : {&f.mslp, &f.u850, &f.v850, &f.z850, &f.z200, &f.u10, &f.v10})
    if (v->size() != n) throw ConfigError("tracker fields missing or misshaped (MSLP, U/V 850, Z 850/200, U10M/V10M)");
  const double sign = lat >= 0 ? 1.0 : -1.0;
  const auto zeta = relative_vorticity(f.u850, f.v850, grid);
  CriteriaResult r;
  r.vorticity = -std::numeric_limits<double>::infinity();
  r.thickness_max = -std::numeric_limits<double>::infinity();
  std::size_t nearest = 0;
  double nearest_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.n_lat(); ++i)
    for (std::size_t j = 0; j < grid.n_lon(); ++j) {
      const double d = haversine_km(lat, lon, grid.lat(i), grid.lon(j));
      const std::size_t q = i * grid.n_lon() + j;
      if (d < nearest_d) {
        nearest_d = d;
        nearest = q;
      }
      if (d > cfg.criteria_radius_km) continue;
      r.vorticity = std::max(r.vorticity, sign * zeta[q]);
      r.max_wind10 = std::max(r.max_wind10, std::hypot(f.u10[q], f.v10[q]));
      r.thickness_max = std::max(r.thickness_max, f.z200[q] - f.z850[q]);
    }
  if (!std::isfinite(r.vorticity)) throw Error("check_criteria: no grid point within the criteria radius");
  r.over_land = f.lsm.size() == n && f.lsm[nearest] > 0.5;
  if (!(r.vorticity > cfg.vort_threshold)) r.reasons.push_back("vorticity");
  if (r.over_land && !(r.max_wind10 > cfg.wind_threshold)) r.reasons.push_back("wind");
  if (cfg.thickness_threshold && r.thickness_max > *cfg.thickness_threshold) r.reasons.push_back("thickness");
  r.accept = r.reasons.empty();
  return r;
}

/// Steps through the sequence, each time taking the MSLP minimum within the
/// search radius of the previous fix (the initial position for the first) and
/// stopping at the first minimum that fails the criteria.
inline Track track_cyclone(const std::vector<CycloneFields>& seq, const GridSpec& grid, double init_lat, double init_lon,
                   const CriteriaConfig& cfg = {}) {
  Track t;
  double lat = init_lat, lon = init_lon;
  for (const auto& f : seq) {
    MslpMinimum m;
    try {
      m = find_mslp_minimum(f.mslp, grid, lat, lon, cfg.search_radius_km);
    } catch (const Error&) {
      t.termination = "no minimum";
      return t;
    }
    if (!check_criteria(f, grid, m.lat, m.lon, cfg).accept) {
      t.termination = "criteria failed";
      return t;
    }
    t.points.push_back({f.time, m.lat, m.lon, m.value});
    lat = m.lat;
    lon = m.lon;
  }
  t.termination = "end of sequence";
  return t;
}

/// Pulls the tracker's inputs out of a state (physical units). LSM comes from
/// the static fields when present; otherwise every point counts as ocean.
inline CycloneFields fields_from_state(const StateField& s, const VariableRegistry& reg, const GridSpec& grid,
                                       const std::vector<double>& statics = {}) {
  s.check_shape(reg, grid);
  auto take = [&](std::optional<std::size_t> c, const std::string& name) {
    if (!c) throw ConfigError("tracker needs channel " + name);
    const auto span = s.channel(*c);
    return std::vector<double>(span.begin(), span.end());
  };
  CycloneFields f;
  f.time = s.time;
  f.mslp = take(reg.find_surface("MSLP"), "MSLP");
  f.u850 = take(reg.find_pressure("U", 850), "U850");
  f.v850 = take(reg.find_pressure("V", 850), "V850");
  f.z850 = take(reg.find_pressure("Z", 850), "Z850");
  f.z200 = take(reg.find_pressure("Z", 200), "Z200");
  f.u10 = take(reg.find_surface("U10M"), "U10M");
  f.v10 = take(reg.find_surface("V10M"), "V10M");
  const auto& sv = reg.static_vars();
  const auto it = std::find(sv.begin(), sv.end(), "LSM");
  if (it != sv.end() && statics.size() == sv.size() * grid.size()) {
    const std::size_t k = static_cast<std::size_t>(it - sv.begin());
    f.lsm.assign(statics.begin() + static_cast<std::ptrdiff_t>(k * grid.size()),
                 statics.begin() + static_cast<std::ptrdiff_t>((k + 1) * grid.size()));
  }
  return f;
}

// ---- track errors --------------------------------------------------------

struct TrackError {
  double lead_hour = 0;
  double distance_km = 0;
};

/// Distance between fixes at matching times; lead hours count from the
/// first forecast fix.
inline std::vector<TrackError> track_errors(const Track& forecast, const std::vector<TrackPoint>& reference) {
  std::vector<TrackError> out;
  if (forecast.points.empty()) throw Error("track_errors: empty forecast track");
  const Timestamp t0 = forecast.points.front().time;
  for (const auto& p : forecast.points) {
    for (const auto& r : reference) {
      if (r.time != p.time) continue;
      out.push_back({static_cast<double>((p.time - t0).count()) / 3600.0, haversine_km(p.lat, p.lon, r.lat, r.lon)});
      break;
    }
  }
  if (out.empty()) throw Error("track_errors: no overlapping timestamps");
  return out;
}

/// Mean distance per lead hour over several storms.
inline std::map<double, double> track_mae(const std::vector<std::vector<TrackError>>& storms) {
  std::map<double, std::pair<double, std::size_t>> acc;
  for (const auto& s : storms)
    for (const auto& e : s) {
      auto& a = acc[e.lead_hour];
      a.first += e.distance_km;
      a.second += 1;
    }
  std::map<double, double> out;
  for (const auto& [h, a] : acc) out[h] = a.first / static_cast<double>(a.second);
  return out;
}

/// Reference track CSV: header with columns time (ISO-8601), lat, lon in any order.
inline std::vector<TrackPoint> read_reference_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read reference track " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty reference track " + path.string());
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string tok; std::getline(ss, tok, ',');) out.push_back(KeyValueFile::trim(tok));
    return out;
  };
  const auto head = split(line);
  auto col = [&](const std::string& name) {
    const auto it = std::find(head.begin(), head.end(), name);
    if (it == head.end()) throw ConfigError("reference track needs a '" + name + "' column");
    return static_cast<std::size_t>(it - head.begin());
  };
  const std::size_t ct = col("time"), ca = col("lat"), co = col("lon");
  std::vector<TrackPoint> out;
  while (std::getline(in, line)) {
    if (KeyValueFile::trim(line).empty()) continue;
    const auto f = split(line);
    if (f.size() < head.size()) throw ConfigError("short row in reference track: " + line);
    TrackPoint p;
    p.time = parse_iso8601(f[ct]);
    p.lat = std::stod(f[ca]);
    p.lon = std::fmod(std::stod(f[co]) + 360.0, 360.0);
    p.mslp_min = std::numeric_limits<double>::quiet_NaN();
    out.push_back(p);
  }
  return out;
}

/// storm_id, lead_hour, lat, lon, mslp, distance_km (empty when no reference fix).
inline void write_track_csv(const std::filesystem::path& path, const std::string& storm_id, const Track& t,
                            const std::vector<TrackPoint>& reference = {}) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const bool fresh = !std::filesystem::exists(path);
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error("cannot write " + path.string());
  if (fresh) out << "storm_id,lead_hour,lat,lon,mslp,distance_km\n";
  if (t.points.empty()) return;
  const Timestamp t0 = t.points.front().time;
  for (const auto& p : t.points) {
    out << storm_id << ',' << KeyValueFile::format_double(static_cast<double>((p.time - t0).count()) / 3600.0) << ','
        << KeyValueFile::format_double(p.lat) << ',' << KeyValueFile::format_double(p.lon) << ','
        << KeyValueFile::format_double(p.mslp_min) << ',';
    for (const auto& r : reference)
      if (r.time == p.time) {
        out << KeyValueFile::format_double(haversine_km(p.lat, p.lon, r.lat, r.lon));
        break;
      }
    out << '\n';
  }
}

/// Idealised cyclone: Gaussian MSLP depression over `background` Pa plus a
/// tangential wind peaking at the radius, cyclonic in either hemisphere.
/// Centre vorticity is 2 e^(1/2) vmax / radius.
inline CycloneFields synthetic_vortex(const GridSpec& grid, double lat, double lon, double depth_pa, double radius_km, double vmax,
                                      Timestamp time = {}, double background = 101325.0) {
  CycloneFields f;
  f.time = time;
  const std::size_t n = grid.size();
  for (auto* v : {&f.mslp, &f.u850, &f.v850, &f.z850, &f.z200, &f.u10, &f.v10, &f.lsm}) v->assign(n, 0.0);
  const double sign = lat >= 0 ? 1.0 : -1.0;
  for (std::size_t i = 0; i < grid.n_lat(); ++i)
    for (std::size_t j = 0; j < grid.n_lon(); ++j) {
      const std::size_t q = i * grid.n_lon() + j;
      const double r = haversine_km(lat, lon, grid.lat(i), grid.lon(j));
      const double x = r / radius_km;
      f.mslp[q] = background - depth_pa * std::exp(-x * x);
      f.z850[q] = 14000.0 - 10.0 * depth_pa * std::exp(-x * x) / 100.0;
      f.z200[q] = 116000.0;
      double dx = grid.lon(j) - lon;
      dx -= 360.0 * std::round(dx / 360.0);
      dx *= std::cos(grid.lat(i) * kDegToRad);
      const double dy = grid.lat(i) - lat;
      const double d = std::hypot(dx, dy);
      if (d == 0) continue;
      const double vt = vmax * x * std::exp(0.5 * (1.0 - x * x));
      const double u = -sign * vt * dy / d, v = sign * vt * dx / d;
      f.u850[q] = u;
      f.v850[q] = v;
      f.u10[q] = 0.7 * u;
      f.v10[q] = 0.7 * v;
    }
  return f;
}

}  // namespace flowcast::track
