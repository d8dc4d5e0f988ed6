#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "flowcast/core/dataset.hpp"
#include "flowcast/core/error.hpp"
#include "flowcast/core/keyvalue.hpp"

namespace flowcast::synth {

/// Toy atmosphere settings. Every channel is an independent set of spectral
/// modes (zonal wavenumber m, meridional index n) obeying
///
///   da/dt = -(relax + diffusion (m^2 + n^2)) a - i m omega a + F(t)
///
/// integrated with RK4. omega is the zonal advection rate of the channel; the
/// forcing drifts slowly eastward and carries a diurnal part locked to the sun.
struct SynthConfig {
  std::size_t n_lat = 32, n_lon = 64;
  VariableRegistry registry = default_registry();
  std::size_t hours = 96;
  std::uint64_t seed = 0;
  Timestamp start = make_timestamp(2021, 7, 1, 0);
  std::size_t zonal_modes = 4;       // m = 0..zonal_modes
  std::size_t meridional_modes = 4;  // n = 0..meridional_modes-1
  double advection_deg_per_hour = 1.5;
  double diffusion = 2e-3;   // per hour, multiplies m^2 + n^2
  double relaxation = 1.0 / 72.0;  // per hour
  double forcing_amplitude = 1.0;
  double diurnal_amplitude = 0.6;
  double dt_minutes = 10.0;
  double jump_eps = 0.0;
  std::vector<int> jump_hours{9, 21};
  // Optional travelling cyclone written into MSLP and the wind channels.
  bool vortex = false;
  double vortex_lat = 15.0, vortex_lon = 260.0;
  double vortex_dlat_per_6h = 0.5, vortex_dlon_per_6h = -2.0;
  double vortex_depth_pa = 3000.0, vortex_radius_km = 600.0, vortex_wind = 25.0;

  static VariableRegistry default_registry() {
    return VariableRegistry({"MSLP", "T2M", "TP", "U10M", "V10M"}, {"U", "V", "T", "Z", "Q"}, {200, 500, 850}, {"LSM"});
  }

  void validate() const {
    if (hours < 24) throw ConfigError("hours must be at least 24");
    if (!(jump_eps >= 0)) throw ConfigError("jump_eps must be non-negative");
    if (n_lat < 2 || n_lon < 4) throw ConfigError("grid too small");
    if (!(dt_minutes > 0) || std::fmod(60.0, dt_minutes) > 1e-9 * 60.0) throw ConfigError("dt_minutes must divide 60");
    if (!(diffusion >= 0) || !(relaxation >= 0)) throw ConfigError("diffusion and relaxation must be non-negative");
    for (int h : jump_hours)
      if (h < 0 || h > 23) throw ConfigError("jump_hours must lie in 0..23");
  }

  GridSpec grid() const { return GridSpec::without_poles(n_lat, n_lon); }

  KeyValueFile to_keyvalue() const {
    KeyValueFile kv;
    kv.set("n_lat", std::to_string(n_lat));
    kv.set("n_lon", std::to_string(n_lon));
    kv.set("hours", std::to_string(hours));
    kv.set("seed", std::to_string(seed));
    kv.set("start", format_iso8601(start));
    kv.set("zonal_modes", std::to_string(zonal_modes));
    kv.set("meridional_modes", std::to_string(meridional_modes));
    kv.set("advection_deg_per_hour", KeyValueFile::format_double(advection_deg_per_hour));
    kv.set("diffusion", KeyValueFile::format_double(diffusion));
    kv.set("relaxation", KeyValueFile::format_double(relaxation));
    kv.set("forcing_amplitude", KeyValueFile::format_double(forcing_amplitude));
    kv.set("diurnal_amplitude", KeyValueFile::format_double(diurnal_amplitude));
    kv.set("dt_minutes", KeyValueFile::format_double(dt_minutes));
    kv.set("jump_eps", KeyValueFile::format_double(jump_eps));
    std::vector<std::string> jh;
    for (int h : jump_hours) jh.push_back(std::to_string(h));
    kv.set("jump_hours", KeyValueFile::join(jh));
    kv.set("surface", KeyValueFile::join(registry.surface_vars()));
    kv.set("pressure", KeyValueFile::join(registry.pressure_vars()));
    std::vector<std::string> lv;
    for (double p : registry.levels()) lv.push_back(KeyValueFile::format_double(p));
    kv.set("levels", KeyValueFile::join(lv));
    kv.set("statics", KeyValueFile::join(registry.static_vars()));
    kv.set("vortex", vortex ? "true" : "false");
    kv.set("vortex_lat", KeyValueFile::format_double(vortex_lat));
    kv.set("vortex_lon", KeyValueFile::format_double(vortex_lon));
    kv.set("vortex_dlat_per_6h", KeyValueFile::format_double(vortex_dlat_per_6h));
    kv.set("vortex_dlon_per_6h", KeyValueFile::format_double(vortex_dlon_per_6h));
    kv.set("vortex_depth_pa", KeyValueFile::format_double(vortex_depth_pa));
    kv.set("vortex_radius_km", KeyValueFile::format_double(vortex_radius_km));
    kv.set("vortex_wind", KeyValueFile::format_double(vortex_wind));
    return kv;
  }

  static SynthConfig from_keyvalue(const KeyValueFile& kv) {
    SynthConfig c;
    auto size = [&](const char* k, std::size_t d) { return static_cast<std::size_t>(kv.get_int(k, static_cast<long long>(d))); };
    c.n_lat = size("n_lat", c.n_lat);
    c.n_lon = size("n_lon", c.n_lon);
    c.hours = size("hours", c.hours);
    c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long long>(c.seed)));
    if (kv.has("start")) c.start = parse_iso8601(kv.get("start"));
    c.zonal_modes = size("zonal_modes", c.zonal_modes);
    c.meridional_modes = size("meridional_modes", c.meridional_modes);
    c.advection_deg_per_hour = kv.get_double("advection_deg_per_hour", c.advection_deg_per_hour);
    c.diffusion = kv.get_double("diffusion", c.diffusion);
    c.relaxation = kv.get_double("relaxation", c.relaxation);
    c.forcing_amplitude = kv.get_double("forcing_amplitude", c.forcing_amplitude);
    c.diurnal_amplitude = kv.get_double("diurnal_amplitude", c.diurnal_amplitude);
    c.dt_minutes = kv.get_double("dt_minutes", c.dt_minutes);
    c.jump_eps = kv.get_double("jump_eps", c.jump_eps);
    if (kv.has("jump_hours")) {
      c.jump_hours.clear();
      for (double h : kv.get_doubles("jump_hours")) c.jump_hours.push_back(static_cast<int>(h));
    }
    if (kv.has("surface") || kv.has("pressure") || kv.has("levels") || kv.has("statics")) {
      const auto& d = c.registry;
      const auto surf = kv.has("surface") ? kv.get_list("surface") : d.surface_vars();
      const auto pres = kv.has("pressure") ? kv.get_list("pressure") : d.pressure_vars();
      const auto lev = kv.has("levels") ? kv.get_doubles("levels") : d.levels();
      const auto stat = kv.has("statics") ? kv.get_list("statics") : d.static_vars();
      try {
        c.registry = VariableRegistry(surf, pres, lev, stat);
      } catch (const ConfigError&) {
        throw;
      } catch (const Error& e) {
        throw ConfigError(e.what());
      }
    }
    const auto v = kv.get("vortex", "false");
    if (v != "true" && v != "false") throw ConfigError("vortex must be true or false");
    c.vortex = v == "true";
    c.vortex_lat = kv.get_double("vortex_lat", c.vortex_lat);
    c.vortex_lon = kv.get_double("vortex_lon", c.vortex_lon);
    c.vortex_dlat_per_6h = kv.get_double("vortex_dlat_per_6h", c.vortex_dlat_per_6h);
    c.vortex_dlon_per_6h = kv.get_double("vortex_dlon_per_6h", c.vortex_dlon_per_6h);
    c.vortex_depth_pa = kv.get_double("vortex_depth_pa", c.vortex_depth_pa);
    c.vortex_radius_km = kv.get_double("vortex_radius_km", c.vortex_radius_km);
    c.vortex_wind = kv.get_double("vortex_wind", c.vortex_wind);
    c.validate();
    return c;
  }
};

namespace detail {

inline constexpr double kGravity = 9.80665;
inline constexpr double kEarthRadiusKm = 6371.0;

/// Advection rate in radians per hour; upper levels run faster.
inline double channel_omega(const SynthConfig& cfg, const ChannelInfo& ch) {
  const double f = ch.level ? 0.6 + (1000.0 - *ch.level) / 1000.0 : 0.5;
  return cfg.advection_deg_per_hour * f * std::numbers::pi / 180.0;
}

/// Meridional basis in colatitude; m > 0 terms vanish at the poles.
inline double basis(std::size_t m, std::size_t n, double lat_deg) {
  const double colat = (90.0 - lat_deg) * std::numbers::pi / 180.0;
  const double s = std::cos(static_cast<double>(n) * colat);
  return m == 0 ? s : s * std::sin(colat);
}

/// Coefficients of one channel's modes, indexed [m * N + n].
struct ChannelModes {
  std::vector<std::complex<double>> a, force;
  std::vector<double> mod_period, mod_phase;
  double omega = 0, omega_force = 0;
};

/// exp(-i m lambda_sun) with the sun overhead at local noon.
inline std::complex<double> solar_phase(std::size_t m, double hour_utc) {
  const double lon_sun = std::numbers::pi - 2.0 * std::numbers::pi * hour_utc / 24.0;
  return std::polar(1.0, -static_cast<double>(m) * lon_sun);
}

/// Tendency of the mode amplitudes at `hour` (hours since start, UTC hour via offset).
inline void tendency(const SynthConfig& cfg, const ChannelModes& cm, const std::vector<std::complex<double>>& a, double hour,
                     double start_hour_utc, std::vector<std::complex<double>>& out) {
  const std::size_t M = cfg.zonal_modes + 1, N = cfg.meridional_modes;
  const double utc = std::fmod(start_hour_utc + hour, 24.0);
  const double w_day = 2.0 * std::numbers::pi / 24.0;
  out.resize(a.size());
  for (std::size_t m = 0; m < M; ++m)
    for (std::size_t n = 0; n < N; ++n) {
      const std::size_t k = m * N + n;
      const double md = static_cast<double>(m);
      const double damp = cfg.relaxation + cfg.diffusion * (md * md + static_cast<double>(n * n));
      const double mod = 1.0 + 0.5 * std::cos(2.0 * std::numbers::pi * hour / cm.mod_period[k] + cm.mod_phase[k]);
      std::complex<double> f = cm.force[k] * mod * std::polar(1.0, -md * cm.omega_force * hour);
      if (n < 2 && m <= 1) {
        // Sun-locked heating: a global pulse (m = 0) and a wave following the sun (m = 1).
        const std::complex<double> d = m == 0 ? std::complex<double>(std::cos(w_day * utc), 0.0) : solar_phase(1, utc);
        f += cfg.diurnal_amplitude * w_day * d * (n == 0 ? 1.0 : 0.5);
      }
      out[k] = -damp * a[k] - std::complex<double>(0.0, md * cm.omega) * a[k] + f;
    }
}

/// Largest RK4 amplification factor over all modes for step dt (hours).
inline double rk4_gain(const SynthConfig& cfg, const std::vector<ChannelModes>& modes, double dt) {
  double worst = 0;
  const std::size_t M = cfg.zonal_modes + 1, N = cfg.meridional_modes;
  for (const auto& cm : modes)
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t n = 0; n < N; ++n) {
        const double md = static_cast<double>(m);
        const std::complex<double> z =
            dt * std::complex<double>(-(cfg.relaxation + cfg.diffusion * (md * md + static_cast<double>(n * n))), -md * cm.omega);
        const auto R = 1.0 + z + z * z / 2.0 + z * z * z / 6.0 + z * z * z * z / 24.0;
        worst = std::max(worst, std::abs(R));
      }
  return worst;
}

inline double great_circle_km(double lat1, double lon1, double lat2, double lon2) {
  const double p1 = lat1 * kDegToRad, p2 = lat2 * kDegToRad;
  const double dp = p2 - p1, dl = (lon2 - lon1) * kDegToRad;
  const double h = std::sin(dp / 2) * std::sin(dp / 2) + std::cos(p1) * std::cos(p2) * std::sin(dl / 2) * std::sin(dl / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

/// Geopotential height of a pressure level in a 7.4 km scale-height atmosphere.
inline double level_height_m(double p_hpa) { return 7400.0 * std::log(1013.25 / p_hpa); }

/// Maps a unit-scale anomaly g to physical units for a channel.
inline double to_physical(const ChannelInfo& ch, double g, double lat_deg) {
  const double phi = lat_deg * kDegToRad;
  const double s2 = std::sin(phi) * std::sin(phi), c = std::cos(phi);
  const std::string& v = ch.variable;
  if (ch.level) {
    const double p = *ch.level;
    if (v == "U") return (10.0 + 20.0 * (1000.0 - p) / 800.0) * c * c + 8.0 * g;
    if (v == "V") return 6.0 * g;
    if (v == "T") return 288.15 - 0.0065 * level_height_m(p) - 30.0 * s2 + 4.0 * g;
    if (v == "Z") return kGravity * level_height_m(p) - 2000.0 * s2 + 400.0 * g;
    if (v == "Q") return 0.018 * std::pow(p / 1000.0, 3.0) * c * c * std::exp(0.3 * g);
    return g;
  }
  if (v == "MSLP") return 101325.0 - 600.0 * s2 + 800.0 * g;
  if (v == "T2M") return 288.15 - 30.0 * s2 + 4.0 * g;
  if (v == "TP") return 1e-3 * std::log1p(std::exp(2.0 * g - 1.0));
  if (v == "U10M") return 6.0 * c * c + 5.0 * g;
  if (v == "V10M") return 4.0 * g;
  return g;
}

inline double static_value(const std::string& name, double lat, double lon) {
  const double phi = lat * kDegToRad, lam = lon * kDegToRad;
  const double shape = std::cos(2 * lam) * std::cos(phi) + 0.5 * std::sin(3 * lam + 1.0) * std::cos(2 * phi) - 0.2;
  if (name == "LSM") return shape > 0 ? 1.0 : 0.0;
  if (name == "Z_SFC" || name == "OROG") return kGravity * 1500.0 * std::max(0.0, shape);
  return shape;
}

inline double wrap_lon(double lon) {
  lon = std::fmod(lon, 360.0);
  return lon < 0 ? lon + 360.0 : lon;
}

}  // namespace detail

/// Centre of the optional cyclone `hour` hours after the start.
inline std::pair<double, double> vortex_center(const SynthConfig& cfg, double hour) {
  return {cfg.vortex_lat + cfg.vortex_dlat_per_6h * hour / 6.0, detail::wrap_lon(cfg.vortex_lon + cfg.vortex_dlon_per_6h * hour / 6.0)};
}

/// Hourly trajectory in physical units. Throws ConfigError naming a stable
/// step when dt_minutes violates the RK4 stability limit.
inline Dataset generate_trajectory(const SynthConfig& cfg) {
  cfg.validate();
  const GridSpec grid = cfg.grid();
  Dataset ds{grid, cfg.registry};
  const auto chans = cfg.registry.channels();
  const std::size_t M = cfg.zonal_modes + 1, N = cfg.meridional_modes, K = M * N;
  const std::size_t H = grid.n_lat(), W = grid.n_lon();

  std::mt19937_64 rng(cfg.seed);
  auto unit = [&] { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
  auto gauss = [&] {
    // Box-Muller on the raw engine keeps streams identical across standard libraries.
    const double u1 = unit(), u2 = unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  };
  std::vector<detail::ChannelModes> modes(chans.size());
  for (std::size_t c = 0; c < chans.size(); ++c) {
    auto& cm = modes[c];
    cm.omega = detail::channel_omega(cfg, chans[c]);
    cm.omega_force = 0.5 * cm.omega;
    cm.a.resize(K);
    cm.force.resize(K);
    cm.mod_period.resize(K);
    cm.mod_phase.resize(K);
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t n = 0; n < N; ++n) {
        const std::size_t k = m * N + n;
        const double scale = 1.0 / std::sqrt(1.0 + static_cast<double>(m * m + n * n));
        const std::complex<double> c0(gauss(), m == 0 ? 0.0 : gauss());
        cm.a[k] = scale * c0;
        cm.force[k] = cfg.forcing_amplitude * cfg.relaxation * scale * std::complex<double>(gauss(), m == 0 ? 0.0 : gauss());
        cm.mod_period[k] = 72.0 + 168.0 * unit();
        cm.mod_phase[k] = 2.0 * std::numbers::pi * unit();
      }
  }

  const double dt = cfg.dt_minutes / 60.0;
  if (detail::rk4_gain(cfg, modes, dt) > 1.0) {
    double ok = dt;
    while (ok > 1e-6 && detail::rk4_gain(cfg, modes, ok) > 1.0) ok /= 2.0;
    std::ostringstream msg;
    msg << "synthetic dynamics unstable at dt_minutes = " << cfg.dt_minutes << "; try dt_minutes <= " << ok * 60.0;
    throw ConfigError(msg.str());
  }

  // Basis tables.
  std::vector<double> S(K * H);
  for (std::size_t m = 0; m < M; ++m)
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t i = 0; i < H; ++i) S[(m * N + n) * H + i] = detail::basis(m, n, grid.lat(i));
  std::vector<std::complex<double>> E(M * W);
  for (std::size_t m = 0; m < M; ++m)
    for (std::size_t j = 0; j < W; ++j) E[m * W + j] = std::polar(1.0, static_cast<double>(m) * grid.lon(j) * kDegToRad);

  ds.statics.resize(cfg.registry.static_vars().size() * H * W);
  for (std::size_t s = 0; s < cfg.registry.static_vars().size(); ++s)
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t j = 0; j < W; ++j)
        ds.statics[(s * H + i) * W + j] = detail::static_value(cfg.registry.static_vars()[s], grid.lat(i), grid.lon(j));

  const double start_utc = static_cast<double>(utc_hour(cfg.start));
  const std::size_t sub = static_cast<std::size_t>(std::llround(1.0 / dt));
  std::vector<std::complex<double>> k1, k2, k3, k4, tmp;
  std::vector<double> g(H * W);
  for (std::size_t h = 0; h < cfg.hours; ++h) {
    StateField st = StateField::like(cfg.registry, grid, cfg.start + std::chrono::hours(h));
    for (std::size_t c = 0; c < chans.size(); ++c) {
      const auto& a = modes[c].a;
      std::fill(g.begin(), g.end(), 0.0);
      for (std::size_t m = 0; m < M; ++m)
        for (std::size_t n = 0; n < N; ++n) {
          const std::size_t k = m * N + n;
          const double mult = m == 0 ? 1.0 : 2.0;
          for (std::size_t j = 0; j < W; ++j) {
            const double wave = mult * (a[k] * E[m * W + j]).real();
            for (std::size_t i = 0; i < H; ++i) g[i * W + j] += wave * S[k * H + i];
          }
        }
      for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < W; ++j) st.at(c, i, j) = detail::to_physical(chans[c], g[i * W + j] / 2.0, grid.lat(i));
    }
    if (cfg.vortex) {
      const auto [clat, clon] = vortex_center(cfg, static_cast<double>(h));
      const double sign = clat >= 0 ? 1.0 : -1.0;
      const double R = cfg.vortex_radius_km;
      for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < W; ++j) {
          const double r = detail::great_circle_km(clat, clon, grid.lat(i), grid.lon(j));
          const double q = r / R;
          if (auto c = cfg.registry.find_surface("MSLP")) st.at(*c, i, j) -= cfg.vortex_depth_pa * std::exp(-q * q);
          // Tangential wind peaking at r = R, counter-clockwise in the north.
          const double vt = cfg.vortex_wind * q * std::exp(0.5 * (1.0 - q * q));
          double dx = (grid.lon(j) - clon);
          dx -= 360.0 * std::round(dx / 360.0);
          dx *= std::cos(grid.lat(i) * kDegToRad);
          const double dy = grid.lat(i) - clat;
          const double d = std::hypot(dx, dy);
          if (d == 0) continue;
          const double u = -sign * vt * dy / d, v = sign * vt * dx / d;
          auto add = [&](std::optional<std::size_t> ch, double val) {
            if (ch) st.at(*ch, i, j) += val;
          };
          add(cfg.registry.find_surface("U10M"), 0.7 * u);
          add(cfg.registry.find_surface("V10M"), 0.7 * v);
          for (double p : cfg.registry.levels()) {
            if (p < 700) continue;
            add(cfg.registry.find_pressure("U", p), u);
            add(cfg.registry.find_pressure("V", p), v);
          }
        }
    }
    ds.states.push_back(std::move(st));
    if (h + 1 == cfg.hours) break;
    for (std::size_t s = 0; s < sub; ++s) {
      const double t0 = static_cast<double>(h) + static_cast<double>(s) * dt;
      for (auto& cm : modes) {
        auto& a = cm.a;
        detail::tendency(cfg, cm, a, t0, start_utc, k1);
        tmp.resize(K);
        for (std::size_t k = 0; k < K; ++k) tmp[k] = a[k] + 0.5 * dt * k1[k];
        detail::tendency(cfg, cm, tmp, t0 + 0.5 * dt, start_utc, k2);
        for (std::size_t k = 0; k < K; ++k) tmp[k] = a[k] + 0.5 * dt * k2[k];
        detail::tendency(cfg, cm, tmp, t0 + 0.5 * dt, start_utc, k3);
        for (std::size_t k = 0; k < K; ++k) tmp[k] = a[k] + dt * k3[k];
        detail::tendency(cfg, cm, tmp, t0 + dt, start_utc, k4);
        for (std::size_t k = 0; k < K; ++k) a[k] += dt / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
      }
    }
  }
  for (const auto& st : ds.states)
    if (!st.all_finite()) throw NumericalError("synthetic trajectory became non-finite");
  const auto kv = cfg.to_keyvalue();
  for (const auto& k : kv.keys()) ds.meta["synth." + k] = kv.get(k);
  return ds;
}

/// Reassimilation-style jumps. At every state whose UTC hour is in
/// `jump_hours` a new offset replaces the previous one and persists until the
/// next such hour. Each offset has RMS jump_eps times the channel's standard
/// deviation over the dataset. Its shape mixes the state's own spatial anomaly
/// with a smooth random field. Signs alternate through the sorted hour list
/// (+ at the first hour, - at the second, ...). Moisture and precipitation are
/// clipped at zero afterwards.
inline Dataset inject_assimilation_jumps(Dataset ds, double jump_eps, const std::vector<int>& jump_hours, std::uint64_t seed) {
  if (!(jump_eps >= 0)) throw ConfigError("jump_eps must be non-negative");
  if (jump_eps == 0 || ds.states.empty()) return ds;
  std::vector<int> hours(jump_hours.begin(), jump_hours.end());
  std::sort(hours.begin(), hours.end());
  hours.erase(std::unique(hours.begin(), hours.end()), hours.end());
  const auto& grid = ds.grid;
  const std::size_t C = ds.registry.n_channels(), P = grid.size();
  const auto chans = ds.registry.channels();

  std::vector<double> ch_std(C);
  for (std::size_t c = 0; c < C; ++c) {
    double s = 0, s2 = 0, n = 0;
    for (const auto& st : ds.states)
      for (double v : st.channel(c)) {
        s += v;
        s2 += v * v;
        n += 1;
      }
    const double m = s / n;
    ch_std[c] = std::sqrt(std::max(0.0, s2 / n - m * m));
  }

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  auto unit = [&] { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
  auto rms_normalize = [&](std::vector<double>& f) {
    double mean = 0;
    for (double v : f) mean += v;
    mean /= static_cast<double>(f.size());
    double ss = 0;
    for (double& v : f) {
      v -= mean;
      ss += v * v;
    }
    const double r = std::sqrt(ss / static_cast<double>(f.size()));
    if (r > 0)
      for (double& v : f) v /= r;
    return r > 0;
  };

  std::vector<double> offset(C * P, 0.0);
  const std::vector<StateField> clean = ds.states;
  for (std::size_t k = 0; k < ds.states.size(); ++k) {
    const int hour = utc_hour(ds.states[k].time);
    const auto it = std::find(hours.begin(), hours.end(), hour);
    if (it != hours.end()) {
      const double sign = ((it - hours.begin()) % 2 == 0) ? 1.0 : -1.0;
      for (std::size_t c = 0; c < C; ++c) {
        std::vector<double> anomaly(clean[k].channel(c).begin(), clean[k].channel(c).end());
        const bool has_anomaly = rms_normalize(anomaly);
        std::vector<double> smooth(P, 0.0);
        const double a1 = 2 * std::numbers::pi * unit(), a2 = 2 * std::numbers::pi * unit(), a3 = 2 * std::numbers::pi * unit();
        for (std::size_t i = 0; i < grid.n_lat(); ++i)
          for (std::size_t j = 0; j < grid.n_lon(); ++j) {
            const double lam = grid.lon(j) * kDegToRad, phi = grid.lat(i) * kDegToRad;
            smooth[i * grid.n_lon() + j] =
                std::cos(phi) * std::cos(lam + a1) + 0.6 * std::sin(2 * phi + a2) + 0.4 * std::cos(phi) * std::cos(2 * lam + a3);
          }
        rms_normalize(smooth);
        std::vector<double> shape(P);
        for (std::size_t q = 0; q < P; ++q) shape[q] = (has_anomaly ? anomaly[q] : 0.0) + 0.5 * smooth[q];
        rms_normalize(shape);
        for (std::size_t q = 0; q < P; ++q) offset[c * P + q] = sign * jump_eps * ch_std[c] * shape[q];
      }
    }
    auto& st = ds.states[k];
    for (std::size_t c = 0; c < C; ++c) {
      auto f = st.channel(c);
      const bool clip = chans[c].variable == "TP" || chans[c].variable == "Q";
      for (std::size_t q = 0; q < P; ++q) {
        f[q] += offset[c * P + q];
        if (clip) f[q] = std::max(0.0, f[q]);
      }
    }
  }
  return ds;
}

/// States at 00/06/12/18 UTC, sharing the dataset's buffers.
inline DatasetView split_6h_view(const Dataset& ds) {
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < ds.size(); ++k)
    if (utc_hour(ds.states[k].time) % 6 == 0) idx.push_back(k);
  return DatasetView(ds, std::move(idx));
}

/// Copies a view into a standalone dataset.
inline Dataset materialize(const DatasetView& view) {
  const Dataset& b = view.base();
  Dataset out{b.grid, b.registry};
  out.statics = b.statics;
  out.stats = b.stats;
  out.stats_provenance = b.stats_provenance;
  out.meta = b.meta;
  for (std::size_t i = 0; i < view.size(); ++i) out.states.push_back(view[i]);
  return out;
}

/// Trajectory plus jumps, as configured.
inline Dataset generate(const SynthConfig& cfg) {
  auto ds = inject_assimilation_jumps(generate_trajectory(cfg), cfg.jump_eps, cfg.jump_hours, cfg.seed);
  return ds;
}

}  // namespace flowcast::synth
