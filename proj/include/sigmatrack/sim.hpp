#pragma once

// Deterministic scenario generator and scorer. A scenario is a camera
// trajectory, an analytic object and a sensor that produces low-rate,
// latency-afflicted sigma point measurements. run_episode drives the filter
// bank and the comparison baselines over the same measurement stream.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sigmatrack/estimator.hpp"
#include "sigmatrack/geometry.hpp"
#include "sigmatrack/perturbation.hpp"
#include "sigmatrack/tasklogic.hpp"

namespace sigmatrack {

enum class CameraMotionKind { kStatic, kConstantVelocity, kWalking, kTurning };
enum class ShapeKind { kSphere, kBox, kCylinder };
enum class RunMode { kDeploy, kTraining };

const char* to_string(CameraMotionKind kind);
const char* to_string(ShapeKind kind);
const char* to_string(RunMode mode);

/// World frame shares the camera axis convention (+Z forward, +Y down).
struct CameraMotion {
  CameraMotionKind kind = CameraMotionKind::kStatic;
  Vec3 velocity = Vec3::Zero();  // constant_velocity [m/s]
  // walking: lateral x = A sin(wt), vertical y = A (cos(wt) - 1),
  // pitch = P sin(wt), forward z = forward_speed t.
  double amplitude = 0.05;  // [m]
  double frequency = 1.5;   // [Hz]
  double pitch_amplitude_deg = 2.0;
  double forward_speed = 0.0;  // [m/s]
  double yaw_rate = 0.0;       // turning, about +Y [rad/s]
};

/// Independent per-frame SE(3) perturbation of the VO pose stream.
struct VoNoise {
  double translation_std = 0.0;  // [m]
  double rotation_std = 0.0;     // [rad]
};

struct ObjectSpec {
  ShapeKind shape = ShapeKind::kSphere;
  double radius = 0.1;                  // sphere, cylinder [m]
  Vec3 dims = Vec3(0.2, 0.1, 0.06);     // box edge lengths [m]
  double height = 0.2;                  // cylinder, along body Z [m]
  Vec3 position = Vec3(0.0, 0.0, 1.5);  // world [m]
  Vec3 rpy = Vec3::Zero();              // world [rad]
  Vec3 velocity = Vec3::Zero();         // world [m/s]
};

struct SensorNoise {
  double sigma_u = 20.0;  // [px]
  double sigma_v = 20.0;  // [px]
  double sigma_z = 0.05;  // [m]
};

/// Recorded for provenance only.
struct PhysicsFields {
  double friction = 1.0;
  double restitution = 0.0;
  double added_mass = 0.0;
};

struct ScenarioConfig {
  std::uint64_t seed = 0;
  double duration = 5.0;      // [s]
  double control_rate = 50.0;  // [Hz]
  double obs_rate = 5.0;       // [Hz]
  double obs_latency = 0.2;    // [s]
  CameraModel camera;
  CameraMotion camera_motion;
  VoNoise vo_noise;
  ObjectSpec object;
  std::size_t surface_samples = 2048;
  SensorNoise sensor;
  double alpha = 1.0;
  RandomizationConfig randomization;
  PhysicsFields physics;
  RunMode mode = RunMode::kDeploy;
  /// Observations taken after this time are never produced.
  std::optional<double> measurement_cutoff;
  /// Ticks before this time are excluded from the RMSE figures.
  double score_after = 0.0;

  double control_period() const { return 1.0 / control_rate; }
  /// control_rate / obs_rate; validate() requires it to be an integer.
  std::size_t ticks_per_observation() const;
  /// Throws Error(kConfig) naming the offending field.
  void validate(std::size_t filter_history_depth = 30) const;
};

/// Ground truth at one control tick.
struct TickTruth {
  double stamp = 0.0;
  RigidTransform camera_pose;  // camera -> world
  RigidTransform vo_pose;      // camera -> world as reported by VO
  RigidTransform object_pose;  // object -> world
  /// Solid-angle-weighted sigma points of the visible surface.
  std::optional<SigmaPointSet> true_set;
  /// Uniform-weight sigma points of the same visible surface: what a
  /// noiseless sensor reports. Estimators are scored against this set.
  std::optional<SigmaPointSet> reference_set;
  /// Object velocity in the current camera frame.
  Vec3 relative_velocity = Vec3::Zero();
  /// Centroid of the true set projects inside the image.
  bool visible = false;
};

struct ScenarioBundle {
  ScenarioConfig config;
  SurfacePointCloud body_cloud;  // object frame
  std::vector<TickTruth> ticks;
  /// Present in training mode.
  std::optional<RandomizationDraw> draw;
  double alpha = 1.0;
  /// obs_latency plus any randomized perception delay.
  double latency = 0.0;

  double control_period() const { return config.control_period(); }
  /// Object surface in the camera frame at tick i.
  SurfacePointCloud cloud_at(std::size_t tick) const;
  /// C_t <- C_{t-1} from consecutive VO poses; identity for tick 0.
  RigidTransform vo_relative(std::size_t tick) const;
};

/// Samples `count` points uniformly over the analytic surface, with outward
/// unit normals, in the object frame.
SurfacePointCloud sample_surface(const ObjectSpec& object, std::size_t count,
                                 Rng& rng);

ScenarioBundle generate_scenario(const ScenarioConfig& cfg);

struct SensorReading {
  double stamp = 0.0;
  double available_at = 0.0;
  /// nullopt: target not visible.
  std::optional<SigmaPointSet> points;
};

/// Culls, projects with pixel noise, perturbs depth, back-projects and runs a
/// uniform-weight PCA. Points whose noisy depth falls below near_z are lost.
std::optional<SigmaPointSet> measure_cloud(const SurfacePointCloud& cloud_in_camera,
                                           const CameraModel& cam,
                                           const SensorNoise& noise,
                                           double alpha, Rng& rng);

SensorReading emulate_sensor(const ScenarioBundle& bundle, std::size_t tick,
                             Rng& rng);

/// Every observation tick of the scenario, in stamp order.
std::vector<SensorReading> emulate_measurement_stream(const ScenarioBundle& bundle);

/// Latest delivered measurement at each query stamp; nullopt before the
/// first delivery.
std::vector<std::optional<SigmaPointSet>> baseline_zoh(
    const std::vector<SensorReading>& stream,
    const std::vector<double>& query_stamps);

struct FilterTrace {
  std::vector<std::optional<FilterBank::Tracks>> tracks;
  /// Whether a measurement was ingested at the tick.
  std::vector<bool> delivered;
  /// Largest available_at among measurements used by the tick's estimate.
  std::vector<double> latest_available_at;
  std::size_t stale = 0;
};

/// Runs a filter bank over the ticks of `bundle`, feeding VO relative poses
/// and delivering each reading once its available_at has passed.
FilterTrace run_filter(const ScenarioBundle& bundle,
                       const std::vector<SensorReading>& stream,
                       const FilterConfig& cfg);

/// Same bank with the ego-motion compensation switched off.
FilterTrace baseline_no_compensation(const ScenarioBundle& bundle,
                                     const std::vector<SensorReading>& stream,
                                     FilterConfig cfg);

struct RewardSetup {
  TaskGeometry geometry;  // positions in the object frame
  CriteriaConfig criteria;
  RewardConfig reward;
};

struct EpisodeOptions {
  FilterConfig filter;
  /// Enables the blind-spot drift emulation (training mode).
  std::optional<DriftState> drift;
  std::optional<RewardSetup> reward;
};

struct TickRecord {
  double stamp = 0.0;
  bool visible = false;
  std::array<std::optional<Vec3>, kSigmaCount> filter_error;
  std::array<std::optional<Vec3>, kSigmaCount> zoh_error;
  std::array<std::optional<Vec3>, kSigmaCount> nocomp_error;
  double drift_magnitude = 0.0;
  std::optional<RewardBreakdown> reward;
};

struct EpisodeMetrics {
  std::array<double, kSigmaCount> rmse_filter{};
  std::array<double, kSigmaCount> rmse_zoh{};
  std::array<double, kSigmaCount> rmse_nocomp{};
  double centroid_rmse_filter = 0.0;
  double centroid_rmse_zoh = 0.0;
  double centroid_rmse_nocomp = 0.0;
  /// Filter centroid velocity against the object's relative velocity.
  double velocity_rmse = 0.0;
  /// Mean ZOH centroid error along the object's motion direction; NaN for a
  /// static object.
  double zoh_mean_lag_error = 0.0;
  double visible_fraction = 0.0;
  double max_drift = 0.0;
  /// Largest gap between the bank and an exact world-frame propagation of its
  /// state since the last measurement, using true camera poses.
  double open_loop_max_deviation = 0.0;
  std::size_t measurements_delivered = 0;
  std::size_t measurements_stale = 0;
  std::size_t scored_ticks = 0;
  bool reward_enabled = false;
  std::array<double, RewardBreakdown::kTerms> reward_sums{};
  double reward_total = 0.0;
  TerminalStatus terminal = TerminalStatus::kRunning;
};

struct EpisodeResult {
  EpisodeMetrics metrics;
  std::vector<TickRecord> ticks;
  /// Last assembled policy observation (training mode only).
  std::optional<Observation> last_observation;
};

EpisodeResult run_episode(const ScenarioBundle& bundle,
                          const EpisodeOptions& options);

}  // namespace sigmatrack
