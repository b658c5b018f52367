#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "sigmatrack/error.hpp"
#include "sigmatrack/perturbation.hpp"

using namespace sigmatrack;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

SigmaPointSet sample_set() {
  SigmaPointSet s;
  s.points = {Vec3(0, 0, 1),     Vec3(0.2, 0, 1), Vec3(-0.2, 0, 1), Vec3(0, 0.1, 1),
              Vec3(0, -0.1, 1), Vec3(0, 0, 1.05), Vec3(0, 0, 0.95)};
  return s;
}

}  // namespace

TEST_CASE("drift with zero sigma never moves") {
  Rng rng(1);
  DriftState d;
  d.sigma_drift = 0.0;
  const auto before = rng;
  for (int i = 0; i < 1000; ++i) d = drift_step(d, rng, false);
  CHECK(d.d == Vec3::Zero());
  CHECK(rng == before);
}

TEST_CASE("drift clips componentwise") {
  DriftState d;
  d.d = Vec3(0.099, 0, 0);
  const DriftState out = drift_apply(d, Vec3(0.05, 0, 0), false);
  CHECK(out.d.x() == 0.10);
  CHECK(drift_apply(d, Vec3(-0.3, -0.3, 0.3), false).d == Vec3(-0.1, -0.1, 0.1));
  d.d_max = std::numeric_limits<double>::infinity();
  CHECK(drift_apply(d, Vec3(0.05, 0, 0), false).d.x() == doctest::Approx(0.149));
}

TEST_CASE("drift resets while visible without drawing") {
  Rng rng(2);
  DriftState d;
  d.d = Vec3(0.05, -0.02, 0.01);
  const auto before = rng;
  const DriftState out = drift_step(d, rng, true);
  CHECK(out.d == Vec3::Zero());
  CHECK(rng == before);
  CHECK(drift_apply(d, Vec3(1, 1, 1), true).d == Vec3::Zero());
}

TEST_CASE("drift stays bounded") {
  Rng rng(3);
  DriftState d;
  d.sigma_drift = 0.05;
  for (int i = 0; i < 20000; ++i) {
    d = drift_step(d, rng, i % 997 == 0);
    REQUIRE(d.d.cwiseAbs().maxCoeff() <= d.d_max);
  }
}

TEST_CASE("unclipped drift variance grows linearly") {
  const int rollouts = 10000;
  const int steps = 50;
  Rng rng(4);
  DriftState init;
  init.d_max = std::numeric_limits<double>::infinity();
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int r = 0; r < rollouts; ++r) {
    DriftState d = init;
    for (int t = 0; t < steps; ++t) d = drift_step(d, rng, false);
    for (int k = 0; k < 3; ++k) {
      sum += d.d(k);
      sum_sq += d.d(k) * d.d(k);
    }
  }
  const double n = 3.0 * rollouts;
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  const double expect = steps * init.sigma_drift * init.sigma_drift;
  CHECK(std::abs(var - expect) / expect <= 0.05);
  CHECK(std::abs(mean) <= 3.0 * std::sqrt(expect / n));
}

TEST_CASE("apply_drift shifts every point by the same vector") {
  const SigmaPointSet s = sample_set();
  DriftState d;
  const SigmaPointSet same = apply_drift(s, d);
  for (std::size_t j = 0; j < kSigmaCount; ++j) CHECK(same.points[j] == s.points[j]);
  d.d = Vec3(0.1, 0, 0);
  const SigmaPointSet moved = apply_drift(s, d);
  for (std::size_t j = 0; j < kSigmaCount; ++j) {
    CHECK((moved.points[j] - s.points[j] - Vec3(0.1, 0, 0)).norm() < 1e-15);
  }
  for (std::size_t k = 0; k < 3; ++k) {
    const Vec3 mid = 0.5 * (moved.plus(k) + moved.minus(k));
    CHECK((mid - moved.centroid()).norm() < 1e-12);
  }
}

TEST_CASE("collapsed randomization ranges give a deterministic draw") {
  RandomizationConfig cfg;
  cfg.alpha = {1.25, 1.25};
  cfg.extrinsic_x = {0.01, 0.01};
  cfg.extrinsic_y = {0.0, 0.0};
  cfg.extrinsic_z = {-0.01, -0.01};
  cfg.extrinsic_roll_deg = {0.0, 0.0};
  cfg.extrinsic_pitch_deg = {1.0, 1.0};
  cfg.extrinsic_yaw_deg = {0.0, 0.0};
  cfg.perception_delay_ms = {30.0, 30.0};
  cfg.friction = {1.0, 1.0};
  cfg.restitution = {0.5, 0.5};
  cfg.added_mass_kg = {0.0, 0.0};
  Rng rng(5);
  const RandomizationDraw d = sample_randomization(cfg, rng);
  CHECK(d.alpha == 1.25);
  CHECK(d.extrinsic_translation == Vec3(0.01, 0.0, -0.01));
  CHECK(d.extrinsic_rpy.y() == doctest::Approx(kDeg));
  CHECK(d.perception_delay == doctest::Approx(0.03));
  CHECK(d.friction == 1.0);
  CHECK(d.restitution == 0.5);
  CHECK((d.extrinsic_offset.rotation() - rotation_from_rpy(0, kDeg, 0)).norm() < 1e-15);
  CHECK(d.extrinsic_offset.translation() == d.extrinsic_translation);
}

TEST_CASE("randomization ranges over many draws") {
  const RandomizationConfig cfg;
  Rng rng(6);
  const int n = 10000;
  double pitch_sum = 0.0;
  double lo_delay = 1.0;
  double hi_delay = -1.0;
  for (int i = 0; i < n; ++i) {
    const RandomizationDraw d = sample_randomization(cfg, rng);
    const double pitch_deg = d.extrinsic_rpy.y() / kDeg;
    REQUIRE(pitch_deg >= -2.0 - 1e-12);
    REQUIRE(pitch_deg <= 2.0 + 1e-12);
    pitch_sum += pitch_deg;
    lo_delay = std::min(lo_delay, d.perception_delay);
    hi_delay = std::max(hi_delay, d.perception_delay);
    REQUIRE(d.alpha >= 1.0);
    REQUIRE(d.alpha <= 1.5);
    REQUIRE(std::abs(d.extrinsic_translation.y()) <= 0.005);
  }
  const double se = (4.0 / std::sqrt(12.0)) / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(pitch_sum / n) <= 3.0 * se);
  CHECK(lo_delay >= 0.0);
  CHECK(hi_delay <= 0.050);
}

TEST_CASE("randomization is reproducible per seed") {
  const RandomizationConfig cfg;
  Rng a(7);
  Rng b(7);
  for (int i = 0; i < 100; ++i) {
    const RandomizationDraw x = sample_randomization(cfg, a);
    const RandomizationDraw y = sample_randomization(cfg, b);
    CHECK(x.extrinsic_translation == y.extrinsic_translation);
    CHECK(x.extrinsic_rpy == y.extrinsic_rpy);
    CHECK(x.perception_delay == y.perception_delay);
    CHECK(x.alpha == y.alpha);
  }
}

TEST_CASE("randomization config validation") {
  RandomizationConfig cfg;
  cfg.alpha = {2.0, 1.0};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = RandomizationConfig{};
  cfg.gravity_std = -0.1;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("sigma point observation noise") {
  const SigmaPointSet s = sample_set();
  Rng rng(8);
  const SigmaPointSet same = perturb_sigma_points(s, 0.0, 0.0, rng);
  for (std::size_t j = 0; j < kSigmaCount; ++j) CHECK((same.points[j] - s.points[j]).norm() < 1e-15);
  for (int trial = 0; trial < 50; ++trial) {
    const SigmaPointSet p = perturb_sigma_points(s, 0.1, 0.1, rng);
    CHECK(p.centroid() == s.centroid());
    // A common scale and rotation keeps the pair geometry: opposite offsets
    // and the ratio of axis lengths.
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK((p.plus(k) + p.minus(k) - 2.0 * p.centroid()).norm() < 1e-12);
    }
    const double r = (p.plus(0) - p.centroid()).norm() / (p.plus(1) - p.centroid()).norm();
    CHECK(r == doctest::Approx(2.0).epsilon(1e-12));
  }
}

TEST_CASE("proprioceptive noise keeps gravity normalized") {
  const RandomizationConfig cfg;
  Rng rng(9);
  ProprioState p;
  for (int i = 0; i < 100; ++i) {
    const ProprioState q = perturb_proprio(p, cfg, rng);
    CHECK(q.gravity.norm() == doctest::Approx(1.0));
    CHECK(q.prev_action == p.prev_action);
  }
}
