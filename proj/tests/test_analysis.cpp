// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "q_oracle.hpp"
#include "test_support.hpp"

using namespace vlcpos;

TEST(QFunction, ReferenceValues) {
  EXPECT_EQ(q_function(0.0), 0.5);
  EXPECT_NEAR(q_function(1.0), 0.158655, 5e-7);
  for (const double x : {0.1, 0.7, 1.9, 3.3, 6.0})
    EXPECT_NEAR(q_function(-x), 1.0 - q_function(x), 1e-15);
}

TEST(QFunction, MatchesHighPrecisionOracle) {
  for (double x = 0.0; x <= 8.0; x += 0.0625) {
    const double want = vlcpos::testing::q_reference(x);
    EXPECT_LE(std::abs(q_function(x) - want), 1e-12 * want) << "x = " << x;
  }
}

TEST(QuantizationFloor, BruteForceNearestAnchorOracle) {
  // Uniform points over the anchor footprint mapped to their nearest anchor.
  const GridSpec& g = vlcpos::testing::reference_grid();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> ux(g.origin.x, g.extent().x), uy(g.origin.y, g.extent().y);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const Vec2 p{ux(rng), uy(rng)};
    sum += squared_norm(p - g.point(g.nearest(p)));
  }
  EXPECT_NEAR(std::sqrt(sum / n) / quantization_floor(0.14), 1.0, 0.01);
  EXPECT_NEAR(quantization_floor(0.14), 0.0571548, 1e-7);
}

TEST(MonteCarlo, TrialPositionsAreUniformOverTheFootprint) {
  const ChannelModel model(vlcpos::testing::single_pd_scene({1.5, 1.5, 3.0}));
  const GridSpec& g = vlcpos::testing::reference_grid();
  const TrialSet t = make_trials(model, g, g.origin, g.extent(), 20000, 9, 1e-10);
  double sum = 0.0, mean_x = 0.0;
  for (const Vec2 p : t.samples.positions) {
    ASSERT_TRUE(p.x >= g.origin.x && p.x <= g.extent().x && p.y >= g.origin.y && p.y <= g.extent().y);
    sum += squared_norm(p - g.point(g.nearest(p)));
    mean_x += p.x;
  }
  EXPECT_NEAR(std::sqrt(sum / 20000) / quantization_floor(0.14), 1.0, 0.03);
  EXPECT_NEAR(mean_x / 20000, 2.5, 0.03);
}

TEST(MonteCarlo, NoiselessAnchorSamplingHasZeroError) {
  const ErrorReport r = monte_carlo_rms(vlcpos::testing::reference_model(), vlcpos::testing::reference_db(), {0.0, 30.0}, 500,
                                        1, ObservationSet::kThree, Metric::kWhitened, PositionSampling::kAnchors);
  EXPECT_EQ(r.rms_m, 0.0);
  EXPECT_EQ(r.n_trials, 500u);
}

TEST(MonteCarlo, IndependentOfWorkerCount) {
  const ChannelModel& model = vlcpos::testing::reference_model();
  const FingerprintDatabase& db = vlcpos::testing::reference_db();
  const NoiseModel n{sigma2_for_snr(mean_los_power(db), 30.0), 30.0};
  const ErrorReport a = monte_carlo_rms(model, db, n, 1500, 3, ObservationSet::kThree, Metric::kWhitened,
                                        PositionSampling::kUniform, 1);
  const ErrorReport b = monte_carlo_rms(model, db, n, 1500, 3, ObservationSet::kThree, Metric::kWhitened,
                                        PositionSampling::kUniform, 4);
  EXPECT_EQ(a.rms_m, b.rms_m);
  EXPECT_EQ(a.p90_m, b.p90_m);
  EXPECT_EQ(a.config_digest, b.config_digest);
  const ErrorReport c = monte_carlo_rms(model, db, n, 1500, 4, ObservationSet::kThree);
  EXPECT_NE(a.config_digest, c.config_digest);
}

TEST(MonteCarlo, ReportInvariants) {
  const FingerprintDatabase& db = vlcpos::testing::reference_db();
  const NoiseModel n{sigma2_for_snr(mean_los_power(db), 10.0), 30.0};
  const ErrorReport r = monte_carlo_rms(vlcpos::testing::reference_model(), db, n, 1000, 5, ObservationSet::kTwo);
  EXPECT_GE(r.rms_m, 0.0);
  EXPECT_LE(r.rms_m * r.rms_m, 5.0 * 5.0 * 2.0);
  EXPECT_LE(r.p50_m, r.p90_m);
  EXPECT_LE(r.p90_m, r.p99_m);
  EXPECT_LE(r.p99_m, r.max_m);
  EXPECT_GT(r.std_error_m, 0.0);
  EXPECT_THROW(monte_carlo_rms(vlcpos::testing::reference_model(), db, n, 0, 5, ObservationSet::kTwo), ConfigError);
}

TEST(MonteCarlo, ConvergesWithTrialCount) {
  // Doubling 1e5 trials moves the estimate by < 2%.
  const ChannelModel model(vlcpos::testing::single_pd_scene({1.5, 1.5, 3.0}));
  const GridSpec& g = vlcpos::testing::reference_grid();
  const FingerprintDatabase db = build_database(model, g, 1e-10);
  const NoiseModel n{sigma2_for_snr(mean_los_power(db), 50.0), 30.0};
  const TrialSet all = make_trials(model, g, g.origin, g.extent(), 200000, 17, 1e-10);
  TrialSet half;
  half.samples.dims = all.samples.dims;
  half.samples.positions.assign(all.samples.positions.begin(), all.samples.positions.begin() + 100000);
  half.samples.features.assign(all.samples.features.begin(), all.samples.features.begin() + 100000 * 3);
  half.unit_noise.assign(all.unit_noise.begin(), all.unit_noise.begin() + 100000 * 3);
  const double a = evaluate_trials(half, db, n, ObservationSet::kThree).rms_m;
  const double b = evaluate_trials(all, db, n, ObservationSet::kThree).rms_m;
  EXPECT_LT(std::abs(a - b) / b, 0.02);
}

TEST(MonteCarlo, MirroredPdAndRoomGiveTheSameError) {
  const GridSpec& g = vlcpos::testing::reference_grid();
  auto rms = [&](Vec3 pd) {
    const ChannelModel model(vlcpos::testing::single_pd_scene(pd));
    const FingerprintDatabase db = build_database(model, g, 1e-10);
    const NoiseModel n{sigma2_for_snr(mean_los_power(db), 30.0), 30.0};
    return monte_carlo_rms(model, db, n, 4000, 21, ObservationSet::kThree);
  };
  const ErrorReport a = rms({1.5, 1.5, 3.0});
  const ErrorReport b = rms({3.5, 1.5, 3.0});  // reflected across x = 2.5
  EXPECT_LE(std::abs(a.rms_m - b.rms_m), 3.0 * std::hypot(a.std_error_m, b.std_error_m));
}

namespace {

/// One-PD database over a 1 x n line of anchors with hand-made features.
FingerprintDatabase line_db(std::vector<double> features) {
  FingerprintDatabase db;
  db.scene = vlcpos::testing::single_pd_scene({2.5, 2.5, 3.0});
  db.grid.origin = {1.0, 1.0};
  db.grid.step = 1.0;
  db.grid.n_x = 1;
  db.grid.n_y = features.size() / 3;
  db.features = std::move(features);
  return db;
}

}  // namespace

TEST(LowerBound, VanishesAtAnchorsWithoutNoise) {
  const FingerprintDatabase& db = vlcpos::testing::reference_db();
  SampleSet s;
  s.dims = db.dims();
  for (std::size_t k = 0; k < db.size(); k += 7) {
    s.positions.push_back(db.grid.point(k));
    s.features.insert(s.features.end(), db.entry(k).begin(), db.entry(k).end());
  }
  EXPECT_EQ(lower_bound_rms(db, {0.0, 30.0}, s, ObservationSet::kThree).rms_lb_m, 0.0);
  EXPECT_EQ(lower_bound_rms(db, {1e-40, 30.0}, s, ObservationSet::kThree).rms_lb_m, 0.0);
}

TEST(LowerBound, EquidistantPointSplitsEvenly) {
  const FingerprintDatabase db = line_db({0, 0, 0, 2, 0, 0, 10, 0, 0});
  SampleSet s;
  s.dims = 3;
  s.positions = {{1.0, 1.25}};
  s.features = {1.0, 0.0, 0.0};  // on the bisector of anchors 0 and 1
  const LowerBoundReport r = lower_bound_rms(db, {1.0, 30.0}, s, ObservationSet::kThree);
  EXPECT_EQ(r.boundary_distances[0], 0.0);
  const double want = std::sqrt(0.5 * 0.25 * 0.25 + 0.5 * 0.75 * 0.75);
  EXPECT_NEAR(r.rms_lb_m, want, 1e-15);
}

TEST(LowerBound, UsesTheWhitenedBoundaryDistance) {
  const FingerprintDatabase db = line_db({0, 0, 0, 4, 0, 0});
  SampleSet s;
  s.dims = 3;
  s.positions = {{1.0, 1.0}};
  s.features = {0.5, 0.0, 0.0};  // 1.5 from the bisector at 2, i.e. 0.75 sigma with sigma^2 = 4
  const LowerBoundReport r = lower_bound_rms(db, {4.0, 30.0}, s, ObservationSet::kTwo);
  EXPECT_NEAR(r.boundary_distances[0], 0.75, 1e-15);
  const double wrong = q_function(std::sqrt(0.75 * 0.75 / 2.0));
  EXPECT_NEAR(r.rms_lb_m, std::sqrt(wrong * 1.0), 1e-15);
}

TEST(LowerBound, DuplicateCentersAreReportedAsTies) {
  const FingerprintDatabase db = line_db({1, 1, 1, 1, 1, 1, 9, 9, 9});
  SampleSet s;
  s.dims = 3;
  s.positions = {{1.0, 1.0}};
  s.features = {1, 1, 1};
  const LowerBoundReport r = lower_bound_rms(db, {0.0, 30.0}, s, ObservationSet::kThree);
  EXPECT_EQ(r.ties, 1u);
  EXPECT_NEAR(r.rms_lb_m, std::sqrt(0.5), 1e-15);
}

TEST(LowerBound, OversampledPositionsAreCellMidpoints) {
  GridSpec g;
  g.origin = {1.0, 2.0};
  g.step = 1.0;
  g.n_x = 3;
  g.n_y = 2;
  const std::vector<Vec2> p = oversampled_positions(g, 4);
  ASSERT_EQ(p.size(), 8u * 4u);
  EXPECT_EQ(p.front(), (Vec2{1.125, 2.125}));
  EXPECT_EQ(p.back(), (Vec2{2.875, 2.875}));
}

TEST(LinearFit, ExactLineAndNoise) {
  const std::vector<double> x{1, 2, 3, 4}, y{3, 5, 7, 9};
  const LinearFit f = linear_fit(x, y);
  EXPECT_NEAR(f.slope, 2.0, 1e-12);
  EXPECT_NEAR(f.intercept, 1.0, 1e-12);
  EXPECT_NEAR(f.r2, 1.0, 1e-12);
  const std::vector<double> flat{1, 3, 1, 3};
  EXPECT_LT(linear_fit(x, flat).r2, 0.5);
  EXPECT_THROW(linear_fit(std::vector<double>{1}, std::vector<double>{1}), DimensionError);
}

TEST(Contours, LosPeaksUnderEachPd) {
  const FingerprintDatabase& db = vlcpos::testing::reference_db();
  for (std::size_t pd = 0; pd < db.pd_count(); ++pd) {
    const std::vector<ContourPoint> pts = export_contours(db, ContourFeature::kPLos, pd);
    const auto best = std::max_element(pts.begin(), pts.end(),
                                       [](const auto& a, const auto& b) { return a.value < b.value; });
    const Vec3 at = db.scene.photodetectors[pd].position;
    EXPECT_EQ(db.grid.nearest({best->x, best->y}), db.grid.nearest({at.x, at.y})) << "pd " << pd;
    EXPECT_LT(best->value, 0.0);  // dB re 1 W of a sub-watt signal
  }
}

TEST(Contours, MirroredPdsGiveMirroredTables) {
  const FingerprintDatabase& db = vlcpos::testing::reference_db();
  const GridSpec& g = db.grid;
  for (const ContourFeature f : {ContourFeature::kPLos, ContourFeature::kPSpp, ContourFeature::kDelay}) {
    const std::vector<ContourPoint> a = export_contours(db, f, 0), b = export_contours(db, f, 1);
    for (std::size_t k = 0; k < a.size(); k += 13) {
      const std::size_t m = g.nearest({5.0 - a[k].x, a[k].y});
      EXPECT_NEAR(a[k].value, b[m].value, f == ContourFeature::kDelay ? 1e-9 : 1e-4);
    }
  }
}

TEST(Contours, DelayIsSmallestAlongTheWalls) {
  // Next to a wall the strongest bounce comes from that wall and nearly
  // coincides with the direct path; in the interior every wall is far away.
  const FingerprintDatabase& db = vlcpos::testing::reference_db();
  const std::vector<ContourPoint> d = export_contours(db, ContourFeature::kDelay, 0);
  const GridSpec& g = db.grid;
  const double centre = d[g.nearest({2.5, 2.5})].value;
  for (std::size_t ix = 0; ix < g.n_x; ++ix)
    for (std::size_t iy = 0; iy < g.n_y; ++iy) {
      if (ix != 0 && iy != 0 && ix + 1 != g.n_x && iy + 1 != g.n_y) continue;
      EXPECT_LT(d[ix * g.n_y + iy].value, centre / 2.0) << ix << "," << iy;
    }
  EXPECT_THROW(export_contours(db, ContourFeature::kPLos, 4), ConfigError);
}

TEST(Sweeps, TableShapes) {
  const ChannelModel& model = vlcpos::testing::reference_model();
  const GridSpec g = centered_grid(model.scene(), 0.5);
  SweepOptions opt;
  opt.n_trials = 400;
  const std::vector<double> snr{20, 40};
  const std::vector<std::size_t> pds{1, 4};
  const std::vector<ObservationSet> sets{ObservationSet::kTwo, ObservationSet::kThree};
  const SnrSweep sw = sweep_snr(model, g, snr, pds, sets, 30.0, 1e-10, opt);
  EXPECT_EQ(sw.rows.size(), 8u);
  EXPECT_GT(sw.reference_power, 0.0);
  EXPECT_EQ(sw.at(40, 4, ObservationSet::kThree).pd_count, 4u);
  EXPECT_THROW(sweep_snr(model, g, snr, std::vector<std::size_t>{5}, sets, 30.0, 1e-10, opt), ConfigError);

  const std::vector<double> steps{0.5, 1.0};
  const GridSweep gs = sweep_grid_step(model, steps, pds, 50.0, 30.0, 1e-10, ObservationSet::kThree, opt);
  EXPECT_EQ(gs.rows.size(), 4u);
  EXPECT_EQ(gs.fits.size(), 2u);
  EXPECT_THROW(sweep_grid_step(model, std::vector<double>{0.0}, pds, 50.0, 30.0, 1e-10), ConfigError);
}
