// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "test_support.hpp"

using namespace vlcpos;

namespace {

double diffuse_total(const ImpulseResponse& ir, const LosPath& los, double power) {
  return std::accumulate(ir.power.begin(), ir.power.end(), 0.0) - power * los.gain;
}

/// Straightforward double-precision first-bounce sum over a tessellation
/// with square patches of side `side` (room dimensions must be multiples).
/// Returns total diffuse power and its power-weighted mean delay.
std::pair<double, double> brute_force_diffuse(const RoomScene& s, const Transmitter& tx,
                                              const Photodetector& pd, double side) {
  const Vec3 r = s.room_size;
  double total = 0.0, weighted_delay = 0.0;
  auto patch = [&](Vec3 c, Vec3 n) {
    const Vec3 a = c - tx.position;
    const double d1 = norm(a);
    const double cos_emit = dot(tx.orientation, a) / d1;
    const double cos_in = -dot(n, a) / d1;
    const Vec3 b = pd.position - c;
    const double d2 = norm(b);
    const double cos_out = dot(n, b) / d2;
    const double cos_rx = -dot(pd.orientation, b) / d2;
    if (cos_emit <= 0 || cos_in <= 0 || cos_out <= 0 || cos_rx <= 0) return;
    if (cos_rx < std::cos(pd.fov_half_angle)) return;
    const double area = side * side;
    const double g1 = (tx.lambertian_mode + 1) * area / (2 * std::numbers::pi * d1 * d1) *
                      std::pow(cos_emit, tx.lambertian_mode) * cos_in;
    const double g2 = pd.area * cos_out * cos_rx / (std::numbers::pi * d2 * d2);
    const double p = tx.power * g1 * s.wall_reflectance * g2;
    total += p;
    weighted_delay += p * (d1 + d2) / kSpeedOfLight;
  };
  const int nx = static_cast<int>(std::lround(r.x / side));
  const int ny = static_cast<int>(std::lround(r.y / side));
  const int nz = static_cast<int>(std::lround(r.z / side));
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) {
      const double x = (i + 0.5) * side, y = (j + 0.5) * side;
      patch({x, y, 0.0}, {0, 0, 1});
      patch({x, y, r.z}, {0, 0, -1});
    }
  for (int k = 0; k < nz; ++k) {
    const double z = (k + 0.5) * side;
    for (int i = 0; i < nx; ++i) {
      const double x = (i + 0.5) * side;
      patch({x, 0.0, z}, {0, 1, 0});
      patch({x, r.y, z}, {0, -1, 0});
    }
    for (int j = 0; j < ny; ++j) {
      const double y = (j + 0.5) * side;
      patch({0.0, y, z}, {1, 0, 0});
      patch({r.x, y, z}, {-1, 0, 0});
    }
  }
  return {total, weighted_delay / total};
}

}  // namespace

TEST(LosGain, OnAxisMatchesClosedForm) {
  Transmitter tx;
  tx.position = {1.5, 1.5, 0.85};
  Photodetector pd;
  pd.position = {1.5, 1.5, 3.0};
  const LosPath los = los_gain(tx, pd);
  const double d = 2.15;
  EXPECT_NEAR(los.gain, 2.0 * 1e-4 / (2.0 * std::numbers::pi * d * d), 1e-20);
  EXPECT_NEAR(tx.power * los.gain, 6.886e-8, 1e-11);
  EXPECT_NEAR(los.delay, d / kSpeedOfLight, 1e-18);
}

TEST(LosGain, OffAxisUsesBothCosines) {
  Transmitter tx;
  tx.position = {2.5, 2.5, 0.85};
  Photodetector pd;
  pd.position = {1.5, 1.5, 3.0};
  const Vec3 v = pd.position - tx.position;
  const double d = norm(v);
  const double c = v.z / d;  // emit and incidence angles coincide for parallel normals
  EXPECT_NEAR(los_gain(tx, pd).gain, 2.0 * 1e-4 / (2.0 * std::numbers::pi * d * d) * c * c, 1e-20);
}

TEST(LosGain, LambertianModeShapesThePattern) {
  Transmitter tx;
  tx.position = {2.5, 2.5, 0.85};
  tx.lambertian_mode = 3.0;
  Photodetector pd;
  pd.position = {1.5, 1.5, 3.0};
  const Vec3 v = pd.position - tx.position;
  const double d = norm(v), c = v.z / d;
  EXPECT_NEAR(los_gain(tx, pd).gain, 4.0 * 1e-4 / (2.0 * std::numbers::pi * d * d) * std::pow(c, 3) * c,
              1e-20);
}

TEST(LosGain, OutsideFieldOfViewIsZero) {
  Transmitter tx;
  tx.position = {4.5, 4.5, 0.85};
  Photodetector pd;
  pd.position = {0.5, 0.5, 3.0};
  pd.fov_half_angle = degrees(30.0);
  EXPECT_EQ(los_gain(tx, pd).gain, 0.0);
  pd.fov_half_angle = degrees(89.0);
  EXPECT_GT(los_gain(tx, pd).gain, 0.0);
}

TEST(LosGain, ReceiverBehindEmitterIsZero) {
  Transmitter tx;
  tx.position = {2.5, 2.5, 2.0};
  Photodetector pd;
  pd.position = {2.5, 2.5, 1.0};
  EXPECT_EQ(los_gain(tx, pd).gain, 0.0);
}

TEST(PathDelay, CoincidentPointsAreRejected) {
  EXPECT_THROW(path_delay({1, 1, 1}, {1, 1, 1}), GeometryError);
  EXPECT_NEAR(path_delay({0, 0, 0}, {0, 0, 2.998}), 1e-8, 1e-20);
}

TEST(ImpulseResponse, BinsAreHalfOpen) {
  ImpulseResponse ir;
  ir.bin_width = 1e-10;
  ir.power.assign(10, 0.0);
  EXPECT_EQ(ir.bin_of(0.0), 0u);
  EXPECT_EQ(ir.bin_of(0.99e-10), 0u);
  EXPECT_EQ(ir.bin_of(1.01e-10), 1u);
  EXPECT_EQ(ir.bin_of(-1e-12), ir.size());
  EXPECT_EQ(ir.bin_of(1.0e-9), ir.size());
  ir.add(2.5e-10, 3.0);
  EXPECT_EQ(ir.power[2], 3.0);
}

TEST(ImpulseResponse, SpansTheLongestFirstBouncePath) {
  const RoomScene scene = default_scene();
  const ImpulseResponse ir = empty_response(scene);
  EXPECT_GE(ir.time_of(ir.size()), 2.0 * norm(scene.room_size) / kSpeedOfLight);
}

TEST(FirstBounce, MatchesBruteForceSum) {
  RoomScene scene = default_scene();
  scene.reflecting_element_side = 0.1;
  const Photodetector pd = scene.photodetectors[0];
  for (const Vec2 p : {Vec2{1.5, 1.5}, Vec2{0.2, 0.2}, Vec2{4.1, 2.7}}) {
    const Transmitter tx = scene.transmitter_at(p);
    const ImpulseResponse ir = first_bounce_response(tx, pd, scene);
    const LosPath los = los_gain(tx, pd);
    const auto [want_total, want_delay] = brute_force_diffuse(scene, tx, pd, 0.1);
    const double got = diffuse_total(ir, los, tx.power);
    EXPECT_NEAR(got / want_total, 1.0, 1e-4) << p.x << "," << p.y;

    double got_delay = 0.0;
    const std::size_t los_bin = ir.bin_of(los.delay);
    for (std::size_t i = 0; i < ir.size(); ++i) {
      const double diffuse = ir.power[i] - (i == los_bin ? tx.power * los.gain : 0.0);
      got_delay += diffuse * (ir.time_of(i) + 0.5 * ir.bin_width);
    }
    // Binning moves each arrival by at most half a bin from the bin center.
    EXPECT_NEAR(got_delay / got, want_delay, 0.5 * ir.bin_width);
  }
}

TEST(FirstBounce, ChannelModelAgreesWithDirectEvaluation) {
  const RoomScene scene = default_scene();
  const ChannelModel& model = vlcpos::testing::reference_model();
  const Transmitter tx = scene.transmitter_at({2.2, 3.1});
  EXPECT_EQ(model.response(tx, 2), first_bounce_response(tx, scene.photodetectors[2], scene));
}

TEST(FirstBounce, ZeroReflectanceLeavesOnlyLos) {
  RoomScene scene = vlcpos::testing::single_pd_scene({1.5, 1.5, 3.0});
  scene.wall_reflectance = 0.0;
  const ImpulseResponse ir = ChannelModel(scene).response(Vec2{2.0, 3.0}, 0);
  EXPECT_EQ(std::count_if(ir.power.begin(), ir.power.end(), [](double v) { return v != 0.0; }), 1);
}

TEST(FirstBounce, DiffusePartIsLinearInReflectance) {
  RoomScene a = vlcpos::testing::single_pd_scene({1.5, 1.5, 3.0});
  RoomScene b = a;
  b.wall_reflectance = 0.4;
  const Transmitter tx = a.transmitter_at({3.3, 0.7});
  const LosPath los = los_gain(tx, a.photodetectors[0]);
  const double da = diffuse_total(ChannelModel(a).response(tx, 0), los, tx.power);
  const double db = diffuse_total(ChannelModel(b).response(tx, 0), los, tx.power);
  EXPECT_NEAR(da / db, 2.0, 1e-5);
}

TEST(FirstBounce, WallProximityGivesEarlyStrongReflection) {
  const ChannelModel& model = vlcpos::testing::reference_model();
  const Fingerprint center = extract_fingerprint(model.response(Vec2{1.5, 1.5}, 0), 1e-10);
  const Fingerprint corner = extract_fingerprint(model.response(Vec2{0.2, 0.2}, 0), 1e-10);
  EXPECT_GT(corner.p_spp / corner.p_los, center.p_spp / center.p_los);
  EXPECT_LT(*corner.delta_tau, *center.delta_tau);
}

TEST(FirstBounce, DiagonalMirrorSymmetry) {
  // PD 0 sits on the room diagonal x = y, so (x, y) and (y, x) are equivalent.
  const ChannelModel& model = vlcpos::testing::reference_model();
  const ImpulseResponse a = model.response(Vec2{0.7, 3.9}, 0);
  const ImpulseResponse b = model.response(Vec2{3.9, 0.7}, 0);
  const Fingerprint fa = extract_fingerprint(a, 1e-10), fb = extract_fingerprint(b, 1e-10);
  EXPECT_EQ(fa.p_los, fb.p_los);
  EXPECT_NEAR(fa.p_spp / fb.p_spp, 1.0, 1e-5);
  EXPECT_EQ(fa.delta_tau, fb.delta_tau);
}

TEST(FirstBounce, MirroredPdsSeeMirroredRooms) {
  const ChannelModel& model = vlcpos::testing::reference_model();
  // PD 1 is PD 0 reflected across x = 2.5.
  const Fingerprint f0 = extract_fingerprint(model.response(Vec2{1.1, 2.3}, 0), 1e-10);
  const Fingerprint f1 = extract_fingerprint(model.response(Vec2{5.0 - 1.1, 2.3}, 1), 1e-10);
  EXPECT_NEAR(f0.p_los / f1.p_los, 1.0, 1e-12);
  EXPECT_NEAR(f0.p_spp / f1.p_spp, 1.0, 1e-5);
  EXPECT_EQ(f0.delta_tau, f1.delta_tau);
}

TEST(FirstBounce, PatchRefinementConverges) {
  for (const Vec2 p : {Vec2{2.5, 2.5}, Vec2{1.0, 4.0}, Vec2{0.3, 0.3}}) {
    RoomScene coarse = vlcpos::testing::single_pd_scene({1.5, 1.5, 3.0});
    RoomScene fine = coarse;
    fine.reflecting_element_side = coarse.reflecting_element_side / 2.0;
    const double a = extract_fingerprint(ChannelModel(coarse).response(p, 0), 1e-10).p_spp;
    const double b = extract_fingerprint(ChannelModel(fine).response(p, 0), 1e-10).p_spp;
    EXPECT_LT(std::abs(a - b) / b, 0.05);
  }
}

TEST(FirstBounce, NonDividingPatchSideKeepsTotalArea) {
  RoomScene a = vlcpos::testing::single_pd_scene({1.5, 1.5, 3.0});
  a.reflecting_element_side = 0.03;  // 5 m / 3 cm is not an integer
  RoomScene b = a;
  b.reflecting_element_side = 0.025;
  const Transmitter tx = a.transmitter_at({2.0, 2.0});
  const LosPath los = los_gain(tx, a.photodetectors[0]);
  const double da = diffuse_total(ChannelModel(a).response(tx, 0), los, tx.power);
  const double db = diffuse_total(ChannelModel(b).response(tx, 0), los, tx.power);
  EXPECT_NEAR(da / db, 1.0, 2e-3);
}

TEST(ChannelModel, TransmitterOutsideRoomIsRejected) {
  const ChannelModel& model = vlcpos::testing::reference_model();
  EXPECT_THROW((void)model.response(Vec2{-0.1, 1.0}, 0), GeometryError);
  EXPECT_THROW((void)model.response(Vec2{1.0, 5.0}, 0), GeometryError);
}

TEST(RoomScene, ValidationRejectsBadParameters) {
  RoomScene s = default_scene();
  s.wall_reflectance = 1.2;
  EXPECT_THROW(validate(s), ConfigError);
  s = default_scene();
  s.photodetectors[0].position = {1.0, 1.0, 3.5};
  EXPECT_THROW(validate(s), ConfigError);
  s = default_scene();
  s.transmitter_height = 3.0;
  EXPECT_THROW(validate(s), ConfigError);
  s = default_scene();
  s.photodetectors[0].orientation = {0, 0, -2};
  EXPECT_THROW(validate(s), ConfigError);
}
