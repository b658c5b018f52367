#include <doctest.h>

#include <cmath>

#include "sigmatrack/acceptance.hpp"
#include "sigmatrack/error.hpp"
#include "sigmatrack/outputs.hpp"
#include "sigmatrack/sim.hpp"

using namespace sigmatrack;

namespace {

ScenarioConfig static_scene() {
  ScenarioConfig c;
  c.seed = 3;
  c.duration = 2.0;
  c.surface_samples = 512;
  return c;
}

double centroid_error(const FilterBank::Tracks& t, const SigmaPointSet& ref) {
  return (t[0].position - ref.centroid()).norm();
}

}  // namespace

TEST_CASE("scenario validation names the field") {
  ScenarioConfig c = static_scene();
  c.obs_rate = 7.0;
  try {
    c.validate();
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConfig);
    CHECK(std::string(e.what()).find("obs_rate") != std::string::npos);
  }
  c = static_scene();
  c.obs_latency = 1.0;
  CHECK_THROWS_AS(c.validate(30), Error);
  c = static_scene();
  c.duration = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK(static_scene().ticks_per_observation() == 10);
}

TEST_CASE("surface sampling") {
  Rng rng(1);
  for (ShapeKind kind : {ShapeKind::kSphere, ShapeKind::kBox, ShapeKind::kCylinder}) {
    ObjectSpec obj;
    obj.shape = kind;
    const SurfacePointCloud c = sample_surface(obj, 400, rng);
    CHECK(c.points.size() == 400);
    CHECK(c.frame == "object");
    CHECK_NOTHROW(c.validate());
    for (std::size_t i = 0; i < c.points.size(); ++i) {
      CHECK(c.normals[i].norm() == doctest::Approx(1.0));
      // Outward normals on a convex body centred at the origin.
      CHECK(c.normals[i].dot(c.points[i]) > 0.0);
    }
  }
}

TEST_CASE("static scene yields identical truth") {
  const ScenarioBundle b = generate_scenario(static_scene());
  CHECK(b.ticks.size() == 101);
  REQUIRE(b.ticks[0].true_set.has_value());
  for (const TickTruth& t : b.ticks) {
    REQUIRE(t.true_set.has_value());
    for (std::size_t j = 0; j < kSigmaCount; ++j) CHECK(t.true_set->points[j] == b.ticks[0].true_set->points[j]);
    CHECK(t.visible);
  }
}

TEST_CASE("constant-velocity camera advances per tick") {
  ScenarioConfig c = static_scene();
  c.duration = 1.0;
  c.camera_motion.kind = CameraMotionKind::kConstantVelocity;
  c.camera_motion.velocity = Vec3(0.3, 0, 0);
  const ScenarioBundle b = generate_scenario(c);
  CHECK(b.ticks.size() == 51);
  for (std::size_t i = 1; i < b.ticks.size(); ++i) {
    const Vec3 step = b.ticks[i].camera_pose.translation() - b.ticks[i - 1].camera_pose.translation();
    CHECK((step - Vec3(0.006, 0, 0)).norm() < 1e-12);
    CHECK((b.vo_relative(i).translation() - Vec3(-0.006, 0, 0)).norm() < 1e-12);
  }
}

TEST_CASE("same seed gives identical bundles") {
  ScenarioConfig c = static_scene();
  c.camera_motion.kind = CameraMotionKind::kWalking;
  c.vo_noise = {0.002, 0.002};
  c.object.velocity = Vec3(0.1, 0, 0);
  const ScenarioBundle a = generate_scenario(c);
  const ScenarioBundle b = generate_scenario(c);
  REQUIRE(a.ticks.size() == b.ticks.size());
  CHECK(a.body_cloud.points == b.body_cloud.points);
  for (std::size_t i = 0; i < a.ticks.size(); ++i) {
    CHECK(a.ticks[i].vo_pose.translation() == b.ticks[i].vo_pose.translation());
    CHECK(a.ticks[i].vo_pose.rotation() == b.ticks[i].vo_pose.rotation());
    CHECK(a.ticks[i].true_set->flatten() == b.ticks[i].true_set->flatten());
  }
  const auto sa = emulate_measurement_stream(a);
  const auto sb = emulate_measurement_stream(b);
  REQUIRE(sa.size() == sb.size());
  for (std::size_t i = 0; i < sa.size(); ++i) CHECK(sa[i].points->flatten() == sb[i].points->flatten());
  c.seed = 4;
  const ScenarioBundle d = generate_scenario(c);
  CHECK(d.ticks[5].vo_pose.translation() != a.ticks[5].vo_pose.translation());
}

TEST_CASE("noiseless sensor reports the uniform-weight reference") {
  ScenarioConfig c = static_scene();
  c.sensor = {0.0, 0.0, 0.0};
  c.camera_motion.kind = CameraMotionKind::kWalking;
  c.object.shape = ShapeKind::kBox;
  c.object.rpy = Vec3(0.3, 0.2, 0.1);
  const ScenarioBundle b = generate_scenario(c);
  Rng rng(5);
  for (std::size_t i = 0; i < b.ticks.size(); i += 10) {
    const SensorReading r = emulate_sensor(b, i, rng);
    REQUIRE(r.points.has_value());
    CHECK(r.available_at == doctest::Approx(r.stamp + 0.2));
    for (std::size_t j = 0; j < kSigmaCount; ++j) {
      CHECK((r.points->points[j] - b.ticks[i].reference_set->points[j]).norm() < 1e-9);
    }
  }
}

TEST_CASE("object behind the camera is not visible") {
  ScenarioConfig c = static_scene();
  c.object.position = Vec3(0, 0, -2);
  const ScenarioBundle b = generate_scenario(c);
  Rng rng(6);
  CHECK_FALSE(emulate_sensor(b, 0, rng).points.has_value());
  CHECK_FALSE(b.ticks[0].visible);
  const EpisodeResult r = run_episode(b, {});
  CHECK(r.metrics.visible_fraction == 0.0);
  CHECK(r.metrics.scored_ticks == 0);
}

TEST_CASE("sensor centroid scatter follows the pixel noise") {
  SurfacePointCloud cloud;
  cloud.frame = "camera";
  cloud.points = {Vec3(0, 0, 1)};
  cloud.normals = {Vec3(0, 0, -1)};
  Rng rng(7);
  double sum = 0.0;
  double sum_sq = 0.0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    const auto s = measure_cloud(cloud, CameraModel{}, SensorNoise{}, 1.0, rng);
    REQUIRE(s.has_value());
    sum += s->centroid().x();
    sum_sq += s->centroid().x() * s->centroid().x();
  }
  const double mean = sum / n;
  const double sd = std::sqrt((sum_sq - n * mean * mean) / (n - 1));
  CHECK(std::abs(sd - 0.04) / 0.04 <= 0.10);
}

TEST_CASE("noiseless static episode converges") {
  ScenarioConfig c = static_scene();
  c.sensor = {0.0, 0.0, 0.0};
  c.score_after = 1.0;
  const ScenarioBundle b = generate_scenario(c);
  const EpisodeResult r = run_episode(b, {});
  CHECK(r.metrics.scored_ticks > 0);
  CHECK(r.metrics.centroid_rmse_filter <= 1e-6);
  for (double v : r.metrics.rmse_filter) CHECK(v <= 1e-6);
  CHECK(std::isnan(r.metrics.zoh_mean_lag_error));
}

TEST_CASE("estimates never use undelivered measurements") {
  const RunConfig cfg = standard_walking_config(2);
  const ScenarioBundle b = generate_scenario(cfg.scenario);
  const auto stream = emulate_measurement_stream(b);
  const FilterTrace t = run_filter(b, stream, cfg.filter);
  for (std::size_t i = 0; i < b.ticks.size(); ++i) {
    CHECK(t.latest_available_at[i] <= b.ticks[i].stamp + 1e-9);
    if (b.ticks[i].stamp < 0.2 - 1e-9) CHECK_FALSE(t.tracks[i].has_value());
  }
  std::vector<double> stamps;
  for (const TickTruth& tt : b.ticks) stamps.push_back(tt.stamp);
  const auto zoh = baseline_zoh(stream, stamps);
  for (std::size_t i = 0; i < b.ticks.size(); ++i) {
    CHECK(zoh[i].has_value() == (b.ticks[i].stamp >= 0.2 - 1e-9));
  }
}

TEST_CASE("no-compensation baseline") {
  SUBCASE("static camera matches the filter") {
    ScenarioConfig c = static_scene();
    c.object.velocity = Vec3(0.2, 0, 0);
    const EpisodeResult r = run_episode(generate_scenario(c), {});
    CHECK(r.metrics.centroid_rmse_nocomp == r.metrics.centroid_rmse_filter);
    CHECK(r.metrics.rmse_nocomp == r.metrics.rmse_filter);
  }
  SUBCASE("walking camera with a static object") {
    RunConfig cfg = standard_walking_config(1);
    cfg.scenario.object.velocity = Vec3::Zero();
    cfg.scenario.object.position = Vec3(0, 0, 1.5);
    const EpisodeRun run = run_config_episode(cfg);
    CHECK(run.result.metrics.centroid_rmse_nocomp > run.result.metrics.centroid_rmse_filter);
  }
  SUBCASE("turning camera gives a sawtooth") {
    ScenarioConfig c = static_scene();
    c.duration = 1.0;
    c.obs_latency = 0.0;
    c.sensor = {0.0, 0.0, 0.0};
    c.camera_motion.kind = CameraMotionKind::kTurning;
    c.camera_motion.yaw_rate = 0.5;
    const ScenarioBundle b = generate_scenario(c);
    const auto stream = emulate_measurement_stream(b);
    const FilterTrace t = baseline_no_compensation(b, stream, FilterConfig{});
    int intervals = 0;
    for (std::size_t i = 10; i + 10 < b.ticks.size(); i += 10) {
      REQUIRE(t.delivered[i]);
      REQUIRE(b.ticks[i + 9].reference_set.has_value());
      const double after = centroid_error(*t.tracks[i], *b.ticks[i].reference_set);
      const double before = centroid_error(*t.tracks[i + 9], *b.ticks[i + 9].reference_set);
      CHECK(before > after);
      // The error grows through the interval.
      CHECK(centroid_error(*t.tracks[i + 5], *b.ticks[i + 5].reference_set) > after);
      ++intervals;
    }
    CHECK(intervals >= 3);
  }
}

TEST_CASE("episode determinism") {
  const RunConfig cfg = standard_walking_config(9);
  const EpisodeRun a = run_config_episode(cfg);
  const EpisodeRun b = run_config_episode(cfg);
  CHECK(metrics_csv(a.result) == metrics_csv(b.result));
  CHECK(summary_json(a).dump() == summary_json(b).dump());
}

TEST_CASE("training-mode episode") {
  RunConfig cfg = standard_walking_config(4);
  cfg.scenario.mode = RunMode::kTraining;
  cfg.reward_enabled = true;
  const EpisodeRun run = run_config_episode(cfg);
  REQUIRE(run.bundle.draw.has_value());
  CHECK(run.bundle.latency == doctest::Approx(cfg.scenario.obs_latency + run.bundle.draw->perception_delay));
  CHECK(run.bundle.alpha == run.bundle.draw->alpha);
  const EpisodeMetrics& m = run.result.metrics;
  CHECK(m.reward_enabled);
  CHECK(m.max_drift <= cfg.drift.d_max * std::sqrt(3.0) + 1e-12);
  CHECK(run.result.last_observation.has_value());
  for (const TickRecord& t : run.result.ticks) {
    REQUIRE(t.reward.has_value());
    CHECK(std::isfinite(t.reward->total));
    if (t.visible) CHECK(t.drift_magnitude == 0.0);
  }
  const auto header = metrics_csv_header(true);
  CHECK(header.back() == "reward_total");
  CHECK(header.size() == 2 + 3 * 21 + 1 + 8);
}
