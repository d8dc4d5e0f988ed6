#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "flowcast/core/dataset.hpp"
#include "flowcast/core/grid.hpp"
#include "flowcast/core/norm.hpp"

using namespace flowcast;

namespace {

double mean_over_grid(const std::vector<double>& w, std::size_t n_lon) {
  double s = 0.0;
  for (double v : w) s += v * static_cast<double>(n_lon);
  return s / static_cast<double>(w.size() * n_lon);
}

VariableRegistry small_registry() { return VariableRegistry({"MSLP", "TP"}, {"T", "U"}, {500.0, 850.0}); }

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("flowcast_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST(GridSpec, RejectsDegenerateGrids) {
  EXPECT_THROW(GridSpec({0.0}, GridSpec::uniform_longitudes(8)), Error);
  EXPECT_THROW(GridSpec({10.0, 0.0}, GridSpec::uniform_longitudes(3)), Error);
  EXPECT_THROW(GridSpec({10.0, 10.0}, GridSpec::uniform_longitudes(8)), Error);
  EXPECT_THROW(GridSpec({10.0, 0.0}, {0.0, 90.0, 180.0, 271.0}), Error);
  EXPECT_THROW(GridSpec({100.0, 0.0}, GridSpec::uniform_longitudes(8)), Error);
  EXPECT_NO_THROW(GridSpec::with_poles(181, 360));
}

TEST(LatitudeWeights, SingleRowIsOne) {
  const std::vector<double> lat{0.0};
  EXPECT_EQ(latitude_weights(std::span<const double>(lat)), std::vector<double>{1.0});
}

TEST(LatitudeWeights, UnitMeanOnManyGrids) {
  for (auto grid : {GridSpec::with_poles(181, 360), GridSpec::without_poles(32, 64), GridSpec::with_poles(5, 8),
                    GridSpec({-60.0, 0.0, 60.0}, GridSpec::uniform_longitudes(4))}) {
    EXPECT_NEAR(mean_over_grid(latitude_weights(grid), grid.n_lon()), 1.0, 1e-12);
  }
}

TEST(LatitudeWeights, ThreeRowsFollowCosine) {
  GridSpec grid({60.0, 0.0, -60.0}, GridSpec::uniform_longitudes(4));
  const auto w = latitude_weights(grid);
  EXPECT_NEAR(w[1] / w[0], 2.0, 1e-12);
  EXPECT_NEAR(w[1] / w[2], 2.0, 1e-12);
}

TEST(LatitudeWeights, InteriorRowsProportionalToCosineAndPolesGetHalfCells) {
  const auto grid = GridSpec::with_poles(19, 8);  // 10 degree spacing
  const auto w = latitude_weights(grid);
  for (std::size_t i = 2; i + 2 < grid.n_lat(); ++i) {
    EXPECT_NEAR(w[i] / w[9], std::cos(grid.lat(i) * kDegToRad), 1e-12);
  }
  // Pole cap [85, 90] against equatorial band [-5, 5].
  const double cap = 1.0 - std::sin(85.0 * kDegToRad);
  const double band = 2.0 * std::sin(5.0 * kDegToRad);
  EXPECT_NEAR(w[0] / w[9], cap / band, 1e-12);
  EXPECT_EQ(w[0], w[18]);
}

TEST(NormStats, HandComputedTwoStates) {
  VariableRegistry reg({"A"}, {}, {});
  StateField a(1, 2, 4), b(1, 2, 4);
  std::fill(b.values.begin(), b.values.end(), 2.0);
  const std::vector<StateField> ds{a, b};
  const auto st = compute_norm_stats(ds, reg);
  EXPECT_DOUBLE_EQ(st.mean[0], 1.0);
  EXPECT_DOUBLE_EQ(st.std[0], 1.0);
}

TEST(NormStats, ZeroVarianceNamesTheChannel) {
  const auto reg = small_registry();
  std::vector<StateField> ds(3, StateField(reg.n_channels(), 2, 4));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  for (auto& s : ds)
    for (double& v : s.values) v = n(rng);
  for (auto& s : ds)
    for (double& v : s.channel(3)) v = 7.0;
  try {
    compute_norm_stats(ds, reg);
    FAIL() << "expected zero-variance error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("T850"), std::string::npos) << e.what();
  }
  EXPECT_THROW(compute_norm_stats(std::span<const StateField>(ds.data(), 1), reg), Error);
}

TEST(Normalize, PointValuesAndFlagChecks) {
  NormStats st{{10.0}, {4.0}};
  StateField s(1, 2, 4);
  s.values = {10, 14, 6, 10, 10, 10, 10, 10};
  const auto n = normalize(s, st);
  EXPECT_DOUBLE_EQ(n.values[0], 0.0);
  EXPECT_DOUBLE_EQ(n.values[1], 1.0);
  EXPECT_DOUBLE_EQ(n.values[2], -1.0);
  EXPECT_TRUE(n.normalized);
  EXPECT_THROW(normalize(n, st), Error);
  EXPECT_THROW(denormalize(s, st), Error);
}

TEST(Normalize, RoundTripAndStandardisedMoments) {
  const auto reg = small_registry();
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n;
  std::vector<StateField> ds;
  for (int k = 0; k < 5; ++k) {
    StateField s(reg.n_channels(), 4, 8);
    for (std::size_t c = 0; c < s.channels; ++c)
      for (double& v : s.channel(c)) v = 100.0 * static_cast<double>(c) + (1.0 + static_cast<double>(c)) * n(rng);
    ds.push_back(s);
  }
  const auto st = compute_norm_stats(ds, reg);
  std::vector<StateField> normed;
  for (const auto& s : ds) {
    const auto z = normalize(s, st);
    const auto back = denormalize(z, st);
    for (std::size_t i = 0; i < s.size(); ++i) {
      EXPECT_NEAR(back.values[i], s.values[i], 1e-10 * std::max(1.0, std::abs(s.values[i])));
    }
    normed.push_back(z);
    normed.back().normalized = false;
  }
  const auto st2 = compute_norm_stats(normed, reg);
  for (std::size_t c = 0; c < reg.n_channels(); ++c) {
    EXPECT_NEAR(st2.mean[c], 0.0, 1e-12);
    EXPECT_NEAR(st2.std[c], 1.0, 1e-12);
  }
}

TEST(PrecipitationTransform, ClosedFormValues) {
  EXPECT_EQ(tp_transform(0.0), 0.0);
  EXPECT_NEAR(tp_transform(1.0), 23.0319605742048887, 1e-12);
  EXPECT_NEAR(tp_transform(0.005), 0.177125040453520695, 1e-14);
  EXPECT_NEAR(tp_inverse(tp_transform(0.005)), 0.005, 0.005 * 1e-8);
  EXPECT_THROW(tp_transform(-1e-9), Error);
}

TEST(PrecipitationTransform, InverseAndMonotoneOnRandomInputs) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  double prev_x = -1.0, prev_y = -1.0;
  std::vector<double> xs(2000);
  for (double& x : xs) x = u(rng);
  xs.push_back(1e-6);
  std::sort(xs.begin(), xs.end());
  for (double x : xs) {
    const double y = tp_transform(x);
    EXPECT_NEAR(tp_inverse(y), x, 1e-8 * x);
    if (x > prev_x) {
      EXPECT_GT(y, prev_y);
    }
    prev_x = x;
    prev_y = y;
  }
}

TEST(DatasetIo, RoundTripsBitExactly) {
  const auto grid = GridSpec::without_poles(6, 8);
  VariableRegistry reg({"MSLP", "TP"}, {"T", "U"}, {500.0, 850.0}, {"LSM"});
  Dataset ds{grid, reg, {}, {}, std::nullopt, "test", {{"seed", "3"}}};
  std::mt19937_64 rng(17);
  std::normal_distribution<float> n;
  for (int k = 0; k < 3; ++k) {
    StateField s = StateField::like(reg, grid, make_timestamp(2021, 7, 1, k));
    for (double& v : s.values) v = static_cast<double>(n(rng));
    ds.states.push_back(s);
  }
  ds.statics.resize(grid.size());
  for (double& v : ds.statics) v = static_cast<double>(n(rng) > 0.0f);
  ds.stats = NormStats{std::vector<double>(reg.n_channels(), 0.1), std::vector<double>(reg.n_channels(), 1.0 / 3.0)};

  const auto dir = scratch("dataset_roundtrip");
  dataset_io::write(ds, dir);
  EXPECT_TRUE(std::filesystem::exists(dir / "2021-07-01T02:00:00Z.f32"));
  const auto back = dataset_io::read(dir);
  EXPECT_EQ(back.grid, grid);
  EXPECT_EQ(back.registry, reg);
  ASSERT_EQ(back.states.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(back.states[k].time, ds.states[k].time);
    EXPECT_EQ(back.states[k].values, ds.states[k].values);
  }
  EXPECT_EQ(back.statics, ds.statics);
  ASSERT_TRUE(back.stats.has_value());
  EXPECT_EQ(back.stats->std, ds.stats->std);
  EXPECT_EQ(back.meta.at("seed"), "3");

  // Re-writing what was read produces identical files.
  const auto dir2 = scratch("dataset_roundtrip2");
  dataset_io::write(back, dir2);
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    EXPECT_EQ(io::read_file(entry.path()), io::read_file(dir2 / entry.path().filename())) << entry.path();
  }
}

TEST(Timestamps, IsoRoundTripAndClock) {
  const auto ts = make_timestamp(2021, 12, 31, 21);
  EXPECT_EQ(format_iso8601(ts), "2021-12-31T21:00:00Z");
  EXPECT_EQ(parse_iso8601("2021-12-31T21:00:00Z"), ts);
  EXPECT_EQ(utc_hour(ts), 21);
  EXPECT_NEAR(day_fraction(ts), 21.0 / 24.0, 1e-15);
  EXPECT_GE(year_fraction(ts), 0.99);
  EXPECT_LT(year_fraction(ts), 1.0);
}
