#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "flowcast/track/cyclone.hpp"

using namespace flowcast;
using namespace flowcast::track;

namespace {

const GridSpec& grid2() {
  static const GridSpec g = GridSpec::with_poles(91, 180);
  return g;
}

double lon_diff(double a, double b) {
  double d = std::fmod(std::abs(a - b), 360.0);
  return std::min(d, 360.0 - d);
}

}  // namespace

TEST(Haversine, ClosedForms) {
  EXPECT_EQ(haversine_km(10, 20, 10, 20), 0.0);
  EXPECT_NEAR(haversine_km(0, 0, 0, 1), 111.195, 111.195e-3);
  EXPECT_NEAR(haversine_km(0, 0, 0, 1), kEarthRadiusKm * std::numbers::pi / 180, 1e-9);
  EXPECT_NEAR(haversine_km(30, 10, -30, 190), std::numbers::pi * 6371.0, 1e-6);
  EXPECT_NEAR(std::numbers::pi * 6371.0, 20015.1, 0.1);
}

TEST(Haversine, SymmetricAndTriangular) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> la(-90, 90), lo(0, 360);
  for (int k = 0; k < 200; ++k) {
    const double a1 = la(rng), o1 = lo(rng), a2 = la(rng), o2 = lo(rng), a3 = la(rng), o3 = lo(rng);
    const double ab = haversine_km(a1, o1, a2, o2), bc = haversine_km(a2, o2, a3, o3), ac = haversine_km(a1, o1, a3, o3);
    EXPECT_NEAR(ab, haversine_km(a2, o2, a1, o1), 1e-9);
    EXPECT_LE(ac, ab + bc + 1e-9);
  }
}

TEST(MslpMinimum, FindsDepressionCentre) {
  const auto& g = grid2();
  const auto f = synthetic_vortex(g, 20, 130, 2000, 300, 25);
  const auto m = find_mslp_minimum(f.mslp, g, 21, 131, 445);
  EXPECT_EQ(m.lat, 20.0);
  EXPECT_EQ(m.lon, 130.0);
  EXPECT_NEAR(m.value, 101325 - 2000, 1e-9);
}

TEST(MslpMinimum, UniformFieldUsesTieBreak) {
  const auto& g = grid2();
  const std::vector<double> flat(g.size(), 101000.0);
  const auto m = find_mslp_minimum(flat, g, 20, 130, 445);
  // First row in scan order (north to south) within the radius, then first column.
  std::size_t first_i = g.n_lat(), first_j = 0;
  for (std::size_t i = 0; i < g.n_lat() && first_i == g.n_lat(); ++i)
    for (std::size_t j = 0; j < g.n_lon(); ++j)
      if (haversine_km(20, 130, g.lat(i), g.lon(j)) <= 445) {
        first_i = i;
        first_j = j;
        break;
      }
  EXPECT_EQ(m.i, first_i);
  EXPECT_EQ(m.j, first_j);
}

TEST(MslpMinimum, IgnoresDepressionOutsideRadius) {
  const auto& g = grid2();
  auto f = synthetic_vortex(g, 20, 130, 2000, 200, 25);
  const auto m = find_mslp_minimum(f.mslp, g, -30, 300, 445);
  EXPECT_GT(haversine_km(m.lat, m.lon, 20, 130), 5000);
  EXPECT_NEAR(m.value, 101325, 1e-6);
}

TEST(MslpMinimum, EmptyNeighbourhoodThrows) {
  const auto& g = grid2();
  EXPECT_THROW(find_mslp_minimum(std::vector<double>(g.size(), 0.0), g, 1, 1, 10), Error);
}

TEST(Vorticity, CalmAndUniformZonalFlowsGiveZero) {
  const auto& g = grid2();
  const std::vector<double> zero(g.size(), 0.0), ten(g.size(), 10.0);
  for (double z : relative_vorticity(zero, zero, g)) EXPECT_EQ(z, 0.0);
  for (double z : relative_vorticity(ten, zero, g)) EXPECT_EQ(z, 0.0);
}

TEST(Vorticity, LinearMeridionalWindRamp) {
  // v = c * x with x the eastward distance along one latitude circle.
  const auto& g = grid2();
  const double c = 2e-5, R = kEarthRadiusKm * 1000.0;
  const std::size_t row = 35;  // 20 N
  std::vector<double> u(g.size(), 0.0), v(g.size(), 0.0);
  for (std::size_t i = 0; i < g.n_lat(); ++i)
    for (std::size_t j = 0; j < g.n_lon(); ++j)
      v[i * g.n_lon() + j] = c * R * std::cos(g.lat(row) * kDegToRad) * (g.lon(j) - 180.0) * kDegToRad;
  const auto z = relative_vorticity(u, v, g);
  for (std::size_t j = 10; j < 170; ++j) EXPECT_NEAR(z[row * g.n_lon() + j], c, 1e-12 * R * c);
}

TEST(Vorticity, SecondOrderUnderRefinement) {
  const double R = kEarthRadiusKm * 1000.0, U0 = 10, V0 = 8;
  auto max_error = [&](std::size_t n_lat, std::size_t n_lon) {
    const auto g = GridSpec::with_poles(n_lat, n_lon);
    std::vector<double> u(g.size()), v(g.size());
    for (std::size_t i = 0; i < g.n_lat(); ++i)
      for (std::size_t j = 0; j < g.n_lon(); ++j) {
        const double phi = g.lat(i) * kDegToRad, lam = g.lon(j) * kDegToRad;
        u[i * n_lon + j] = U0 * std::sin(2 * phi);
        v[i * n_lon + j] = V0 * std::sin(lam) * std::cos(phi);
      }
    const auto z = relative_vorticity(u, v, g);
    double err = 0;
    for (std::size_t i = 0; i < g.n_lat(); ++i) {
      if (std::abs(g.lat(i)) > 60) continue;
      const double phi = g.lat(i) * kDegToRad;
      for (std::size_t j = 0; j < g.n_lon(); ++j) {
        const double exact = (V0 * std::cos(g.lon(j) * kDegToRad) - 2 * U0 * std::cos(2 * phi)) / R;
        err = std::max(err, std::abs(z[i * n_lon + j] - exact));
      }
    }
    return err;
  };
  const double e1 = max_error(37, 72), e2 = max_error(73, 144), e3 = max_error(145, 288);
  EXPECT_GE(std::log2(e1 / e2), 1.8);
  EXPECT_GE(std::log2(e2 / e3), 1.8);
}

TEST(Criteria, NorthernVortexPasses) {
  const auto& g = grid2();
  // Centre vorticity 2 e^(1/2) vmax / R = 1e-4 s^-1.
  const double R = 300.0, vmax = 1e-4 * R * 1000.0 / (2 * std::exp(0.5));
  const auto f = synthetic_vortex(g, 20, 130, 2000, R, vmax);
  const auto r = check_criteria(f, g, 20, 130, {});
  EXPECT_TRUE(r.accept);
  EXPECT_GT(r.vorticity, 5e-5);
  EXPECT_LT(r.vorticity, 1.2e-4);
}

TEST(Criteria, SouthernVortexUsesSignedTest) {
  const auto& g = grid2();
  const double R = 300.0, vmax = 1e-4 * R * 1000.0 / (2 * std::exp(0.5));
  const auto f = synthetic_vortex(g, -20, 130, 2000, R, vmax);
  const auto z = relative_vorticity(f.u850, f.v850, g);
  const std::size_t centre = 55 * g.n_lon() + 65;  // -20, 130
  EXPECT_LT(z[centre], -5e-5);
  EXPECT_TRUE(check_criteria(f, g, -20, 130, {}).accept);
  // An anticyclone in the south fails.
  auto anti = f;
  for (auto* v : {&anti.u850, &anti.v850}) for (double& x : *v) x = -x;
  EXPECT_FALSE(check_criteria(anti, g, -20, 130, {}).accept);
}

TEST(Criteria, CalmFieldRejectedForVorticity) {
  const auto& g = grid2();
  const auto f = synthetic_vortex(g, 20, 130, 0, 300, 0);
  const auto r = check_criteria(f, g, 20, 130, {});
  EXPECT_FALSE(r.accept);
  ASSERT_EQ(r.reasons.size(), 1u);
  EXPECT_EQ(r.reasons[0], "vorticity");
}

TEST(Criteria, WeakWindOverLandFails) {
  const auto& g = grid2();
  auto f = synthetic_vortex(g, 20, 130, 2000, 300, 10);  // 10 m/s aloft, 7 m/s at 10 m
  EXPECT_TRUE(check_criteria(f, g, 20, 130, {}).accept);
  std::fill(f.lsm.begin(), f.lsm.end(), 1.0);
  const auto r = check_criteria(f, g, 20, 130, {});
  EXPECT_TRUE(r.over_land);
  EXPECT_FALSE(r.accept);
  EXPECT_EQ(r.reasons.back(), "wind");
}

TEST(Criteria, ThicknessReportedNotEnforcedByDefault) {
  const auto& g = grid2();
  const auto f = synthetic_vortex(g, 20, 130, 2000, 300, 25);
  auto r = check_criteria(f, g, 20, 130, {});
  EXPECT_TRUE(r.accept);
  EXPECT_GT(r.thickness_max, 100000);
  CriteriaConfig strict;
  strict.thickness_threshold = 1000;
  EXPECT_FALSE(check_criteria(f, g, 20, 130, strict).accept);
}

TEST(Criteria, MissingFieldsThrow) {
  const auto& g = grid2();
  auto f = synthetic_vortex(g, 20, 130, 2000, 300, 25);
  f.z200.clear();
  EXPECT_THROW(check_criteria(f, g, 20, 130, {}), ConfigError);
}

namespace {

std::vector<CycloneFields> moving(std::size_t steps, double lat0, double lon0, double dlat, double dlon,
                                  std::optional<std::size_t> dies_at = std::nullopt) {
  std::vector<CycloneFields> seq;
  for (std::size_t k = 0; k < steps; ++k) {
    const bool alive = !dies_at || k < *dies_at;
    seq.push_back(synthetic_vortex(grid2(), lat0 + dlat * k, std::fmod(lon0 + dlon * k + 360, 360), alive ? 2000 : 0, 300,
                                   alive ? 25 : 0, make_timestamp(2021, 8, 1, 0) + std::chrono::hours(6 * k)));
  }
  return seq;
}

}  // namespace

TEST(Tracker, FollowsMovingVortexWithinOneCell) {
  const auto seq = moving(20, 12.3, 150.7, 0.8, -1.8);  // about 2 degrees per 6 h
  const auto t = track_cyclone(seq, grid2(), 12.3, 150.7);
  ASSERT_EQ(t.points.size(), 20u);
  EXPECT_EQ(t.termination, "end of sequence");
  for (std::size_t k = 0; k < 20; ++k) {
    EXPECT_LE(std::abs(t.points[k].lat - (12.3 + 0.8 * k)), 2.0) << k;
    EXPECT_LE(lon_diff(t.points[k].lon, 150.7 - 1.8 * k), 2.0) << k;
  }
}

TEST(Tracker, StopsWhenVortexDissipates) {
  const auto t = track_cyclone(moving(10, 15, 140, 0, -2, 5), grid2(), 15, 140);
  EXPECT_EQ(t.points.size(), 5u);
  EXPECT_EQ(t.termination, "criteria failed");
}

TEST(Tracker, StationaryVortexGivesIdenticalFixes) {
  const auto t = track_cyclone(moving(6, 16, 120, 0, 0), grid2(), 16.5, 120.5);
  ASSERT_EQ(t.points.size(), 6u);
  for (const auto& p : t.points) {
    EXPECT_EQ(p.lat, t.points[0].lat);
    EXPECT_EQ(p.lon, t.points[0].lon);
  }
  // Deterministic.
  const auto again = track_cyclone(moving(6, 16, 120, 0, 0), grid2(), 16.5, 120.5);
  EXPECT_EQ(again.points.back().mslp_min, t.points.back().mslp_min);
}

TEST(TrackErrors, IdenticalAndShiftedTracks) {
  Track t;
  std::vector<TrackPoint> ref, shifted;
  for (int k = 0; k < 4; ++k) {
    const auto time = make_timestamp(2021, 8, 1, 0) + std::chrono::hours(6 * k);
    t.points.push_back({time, 0, 100.0 + k, 1e5});
    ref.push_back({time, 0, 100.0 + k, 0});
    shifted.push_back({time, 0, 101.0 + k, 0});
  }
  for (const auto& e : track_errors(t, ref)) EXPECT_EQ(e.distance_km, 0.0);
  const auto es = track_errors(t, shifted);
  ASSERT_EQ(es.size(), 4u);
  EXPECT_EQ(es[3].lead_hour, 18.0);
  for (const auto& e : es) EXPECT_NEAR(e.distance_km, 111.195, 0.001);
  const auto mae = track_mae({es, track_errors(t, ref)});
  EXPECT_NEAR(mae.at(6.0), 111.195 / 2, 0.001);
  std::vector<TrackPoint> later{{make_timestamp(2022, 1, 1, 0), 0, 0, 0}};
  EXPECT_THROW(track_errors(t, later), Error);
}

TEST(TrackCsv, WritesAndReadsBack) {
  const auto dir = std::filesystem::temp_directory_path() / "flowcast_track_csv";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  {
    std::ofstream ref(dir / "ref.csv");
    ref << "time,lat,lon\n2021-08-01T00:00:00Z,16,140\n2021-08-01T06:00:00Z,16,138\n";
  }
  const auto ref = read_reference_csv(dir / "ref.csv");
  ASSERT_EQ(ref.size(), 2u);
  const auto t = track_cyclone(moving(2, 16, 140, 0, -2), grid2(), 16, 140);
  write_track_csv(dir / "tracks.csv", "S1", t, ref);
  std::ifstream in(dir / "tracks.csv");
  std::string header, row0, row1;
  std::getline(in, header);
  std::getline(in, row0);
  std::getline(in, row1);
  EXPECT_EQ(header, "storm_id,lead_hour,lat,lon,mslp,distance_km");
  EXPECT_EQ(row0, "S1,0,16,140,99325,0");
  EXPECT_EQ(row1.substr(0, 5), "S1,6,");
  std::filesystem::remove_all(dir);
}
