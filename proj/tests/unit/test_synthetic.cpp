#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "flowcast/diag/energy.hpp"
#include "flowcast/diag/jumps.hpp"
#include "flowcast/diag/spectrum.hpp"
#include "flowcast/synth/atmosphere.hpp"

using namespace flowcast;
using namespace flowcast::synth;

namespace {

SynthConfig small(std::uint64_t seed = 1, std::size_t hours = 72) {
  SynthConfig c;
  c.n_lat = 16;
  c.n_lon = 32;
  c.hours = hours;
  c.seed = seed;
  return c;
}

std::vector<double> ke_series(const Dataset& ds) {
  std::vector<double> ke;
  for (const auto& s : ds.states) ke.push_back(diag::domain_kinetic_energy(s, ds.registry, ds.grid));
  return ke;
}

std::vector<double> increments(const std::vector<double>& s) {
  std::vector<double> d;
  for (std::size_t k = 1; k < s.size(); ++k) d.push_back(std::abs(s[k] - s[k - 1]));
  return d;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Synthetic, SameSeedIsBitwiseIdentical) {
  const auto a = generate(small(3)), b = generate(small(3)), c = generate(small(4));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a.states[k].values, b.states[k].values);
  EXPECT_NE(a.states[5].values, c.states[5].values);
  const auto root = std::filesystem::temp_directory_path() / "flowcast_synth_det";
  std::filesystem::remove_all(root);
  dataset_io::write(a, root / "a");
  dataset_io::write(b, root / "b");
  for (const auto& e : std::filesystem::directory_iterator(root / "a"))
    EXPECT_EQ(read_bytes(e.path()), read_bytes(root / "b" / e.path().filename())) << e.path();
  std::filesystem::remove_all(root);
}

TEST(Synthetic, ShapeUnitsAndManifestEcho) {
  const auto ds = generate(small(2, 30));
  ASSERT_EQ(ds.size(), 30u);
  EXPECT_EQ(ds.registry.n_channels(), 20u);
  EXPECT_EQ(ds.statics.size(), ds.grid.size());
  EXPECT_EQ(ds.meta.at("synth.seed"), "2");
  const auto mslp = *ds.registry.find_surface("MSLP"), tp = *ds.registry.find_surface("TP");
  const auto q = *ds.registry.find_pressure("Q", 850);
  for (const auto& s : ds.states) {
    EXPECT_TRUE(s.all_finite());
    for (double v : s.channel(mslp)) EXPECT_NEAR(v, 101000, 6000);
    for (double v : s.channel(tp)) EXPECT_GE(v, 0.0);
    for (double v : s.channel(q)) EXPECT_GE(v, 0.0);
  }
  EXPECT_EQ(ds.states[1].time - ds.states[0].time, std::chrono::hours(1));
}

TEST(Synthetic, ConfigRoundTripsThroughKeyValue) {
  auto c = small(9);
  c.jump_eps = 0.25;
  c.jump_hours = {3, 15};
  c.vortex = true;
  c.registry = VariableRegistry({"MSLP"}, {"U", "V"}, {500, 850}, {"LSM"});
  const auto back = SynthConfig::from_keyvalue(c.to_keyvalue());
  EXPECT_EQ(back.to_keyvalue().serialize(), c.to_keyvalue().serialize());
  EXPECT_EQ(back.registry.n_channels(), 5u);
}

TEST(Synthetic, RejectsBadConfig) {
  auto c = small();
  c.hours = 12;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small();
  c.jump_eps = -1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small();
  c.dt_minutes = 7;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Synthetic, UnstableStepSuggestsSmallerOne) {
  auto c = small();
  c.advection_deg_per_hour = 200;
  c.dt_minutes = 60;
  try {
    generate_trajectory(c);
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("try dt_minutes <="), std::string::npos) << msg;
    const double suggested = std::stod(msg.substr(msg.find("<=") + 2));
    c.dt_minutes = 60.0 / std::ceil(60.0 / suggested);
    EXPECT_NO_THROW(generate_trajectory(c));
  }
}

TEST(Synthetic, CleanEnergyIsContinuous) {
  const auto ke = ke_series(generate(small(5, 96)));
  const auto inc = increments(ke);
  EXPECT_LT(*std::max_element(inc.begin(), inc.end()), 5 * median(inc));
}

TEST(Synthetic, NoFalseJumpsOverManySeeds) {
  std::size_t flags = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    auto c = small(s, 48);
    c.n_lat = 8;
    c.n_lon = 16;
    flags += diag::discontinuity_score(ke_series(generate(c)), 0).flagged().size();
  }
  EXPECT_EQ(flags, 0u);
}

TEST(Synthetic, DiffusionDampsHighWavenumbers) {
  double prev = std::numeric_limits<double>::infinity();
  for (double d : {1e-3, 2e-3, 4e-3, 8e-3}) {
    auto c = small(6, 48);
    c.diffusion = d;
    const auto ds = generate_trajectory(c);
    const auto ch = *ds.registry.find_pressure("T", 500);
    const auto sp = diag::zonal_power_spectrum(ds.states.back().channel(ch), ds.grid);
    double high = 0;
    for (std::size_t m = 3; m < sp.energy.size(); ++m) high += sp.energy[m];
    EXPECT_LT(high, prev) << "diffusion " << d;
    prev = high;
  }
}

TEST(Jumps, ZeroEpsLeavesDataUntouched) {
  const auto clean = generate_trajectory(small(7, 48));
  const auto same = inject_assimilation_jumps(clean, 0.0, {9, 21}, 7);
  for (std::size_t k = 0; k < clean.size(); ++k) EXPECT_EQ(clean.states[k].values, same.states[k].values);
}

TEST(Jumps, OffsetsChangeOnlyAtBoundaryHours) {
  const auto clean = generate_trajectory(small(7, 48));
  const auto jumped = inject_assimilation_jumps(clean, 0.3, {9, 21}, 7);
  const auto u = *clean.registry.find_pressure("U", 500);
  auto offset = [&](std::size_t k) {
    std::vector<double> d;
    const auto a = jumped.states[k].channel(u), b = clean.states[k].channel(u);
    for (std::size_t q = 0; q < a.size(); ++q) d.push_back(a[q] - b[q]);
    return d;
  };
  auto changed = [&](std::size_t k) {
    const auto x = offset(k), y = offset(k - 1);
    double m = 0;
    for (std::size_t q = 0; q < x.size(); ++q) m = std::max(m, std::abs(x[q] - y[q]));
    return m > 1e-9;
  };
  for (std::size_t k = 1; k < clean.size(); ++k) {
    const int h = utc_hour(clean.states[k].time);
    EXPECT_EQ(changed(k), h == 9 || h == 21) << "hour " << k;
  }
  for (double v : offset(3)) EXPECT_EQ(v, 0.0);  // before the first jump
}

TEST(Jumps, DetectorFindsExactlyTheInjectedHours) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    auto c = small(s, 96);
    c.jump_eps = 0.3;
    const auto ke = ke_series(generate(c));
    const auto rep = diag::discontinuity_score(ke, 0);
    std::size_t hits = 0;
    for (const auto& r : rep.rows) {
      EXPECT_EQ(r.flag, r.boundary) << "seed " << s << " index " << r.index << " z " << r.z;
      hits += r.flag;
    }
    EXPECT_EQ(hits, 8u);
  }
}

TEST(SixHourView, KeepsSynopticHoursWithoutCopies) {
  const auto ds = generate_trajectory(small(1, 48));
  const auto view = split_6h_view(ds);
  ASSERT_EQ(view.size(), 8u);
  for (std::size_t i = 0; i < view.size(); ++i) {
    EXPECT_EQ(utc_hour(view[i].time) % 6, 0);
    EXPECT_EQ(&view[i], &ds.states[view.base_index(i)]);
  }
  EXPECT_EQ(materialize(view).size(), 8u);
}

TEST(SixHourView, HidesBoundaryJumps) {
  auto c = small(2, 96);
  c.jump_eps = 0.3;
  const auto ds = generate(c);
  const auto ke = ke_series(ds);
  double boundary = 0, n_b = 0;
  for (std::size_t k = 1; k < ke.size(); ++k) {
    const int h = utc_hour(ds.states[k].time);
    if (h == 9 || h == 21) {
      boundary += std::abs(ke[k] - ke[k - 1]);
      n_b += 1;
    }
  }
  boundary /= n_b;
  const auto view = split_6h_view(ds);
  double six = 0;
  for (std::size_t i = 1; i < view.size(); ++i) {
    const double a = diag::domain_kinetic_energy(view[i], ds.registry, ds.grid);
    const double b = diag::domain_kinetic_energy(view[i - 1], ds.registry, ds.grid);
    six += std::abs(a - b) / 6.0;  // per hour of separation
  }
  six /= static_cast<double>(view.size() - 1);
  EXPECT_LT(six, boundary);
}

TEST(Synthetic, VortexDeepensMslpAlongItsTrack) {
  auto c = small(3, 24);
  c.n_lat = 32;
  c.n_lon = 64;
  c.vortex = true;
  const auto ds = generate_trajectory(c);
  const auto mslp = *ds.registry.find_surface("MSLP");
  for (std::size_t h : {0u, 12u, 23u}) {
    const auto [lat, lon] = vortex_center(c, static_cast<double>(h));
    const auto f = ds.states[h].channel(mslp);
    const auto it = std::min_element(f.begin(), f.end());
    const std::size_t q = static_cast<std::size_t>(it - f.begin());
    EXPECT_LT(synth::detail::great_circle_km(lat, lon, ds.grid.lat(q / 64), ds.grid.lon(q % 64)), 800.0) << h;
  }
}
