#include "sigmatrack/sim.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "sigmatrack/error.hpp"

namespace sigmatrack {

namespace {

constexpr double kStampSlack = 1e-9;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Independent random stream per purpose so that, e.g., enabling VO noise does
// not change the sensor noise sequence.
enum class Stream : std::uint32_t {
  kRandomization = 1,
  kSurface = 2,
  kVo = 3,
  kSensor = 4,
  kDrift = 5,
  kObservationNoise = 6,
};

Rng stream_rng(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return Rng(seq);
}

double normal(Rng& rng, double stddev) {
  if (stddev == 0.0) return 0.0;
  return std::normal_distribution<double>(0.0, stddev)(rng);
}

double unit_uniform(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

[[noreturn]] void config_error(const std::string& key, const std::string& why) {
  throw Error(ErrorCode::kConfig, "scenario." + key + ": " + why);
}

RigidTransform nominal_camera_pose(const CameraMotion& m, double t) {
  Mat3 R = Mat3::Identity();
  Vec3 p = Vec3::Zero();
  switch (m.kind) {
    case CameraMotionKind::kStatic:
      break;
    case CameraMotionKind::kConstantVelocity:
      p = m.velocity * t;
      break;
    case CameraMotionKind::kWalking: {
      const double w = 2.0 * std::numbers::pi * m.frequency;
      p = Vec3(m.amplitude * std::sin(w * t),
               m.amplitude * (std::cos(w * t) - 1.0), m.forward_speed * t);
      const double pitch =
          m.pitch_amplitude_deg * std::numbers::pi / 180.0 * std::sin(w * t);
      R = rotation_about(Vec3::UnitX(), pitch);
      break;
    }
    case CameraMotionKind::kTurning:
      R = rotation_about(Vec3::UnitY(), m.yaw_rate * t);
      break;
  }
  return RigidTransform(R, p, "camera", "world");
}

// Roll/pitch/yaw with R = Rz(yaw) Ry(pitch) Rx(roll).
Vec3 rpy_from_rotation(const Mat3& R) {
  const double pitch = std::asin(std::clamp(-R(2, 0), -1.0, 1.0));
  return Vec3(std::atan2(R(2, 1), R(2, 2)), pitch, std::atan2(R(1, 0), R(0, 0)));
}

// Camera (x right, y down, z forward) to base (x forward, y left, z up).
Mat3 base_from_camera() {
  Mat3 m;
  m << 0, 0, 1, -1, 0, 0, 0, -1, 0;
  return m;
}

}  // namespace

const char* to_string(CameraMotionKind kind) {
  switch (kind) {
    case CameraMotionKind::kStatic: return "static";
    case CameraMotionKind::kConstantVelocity: return "constant_velocity";
    case CameraMotionKind::kWalking: return "walking";
    case CameraMotionKind::kTurning: return "turning";
  }
  return "unknown";
}

const char* to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::kSphere: return "sphere";
    case ShapeKind::kBox: return "box";
    case ShapeKind::kCylinder: return "cylinder";
  }
  return "unknown";
}

const char* to_string(RunMode mode) {
  return mode == RunMode::kTraining ? "training" : "deploy";
}

std::size_t ScenarioConfig::ticks_per_observation() const {
  return static_cast<std::size_t>(std::llround(control_rate / obs_rate));
}

void ScenarioConfig::validate(std::size_t filter_history_depth) const {
  if (!(duration > 0.0)) config_error("duration", "must be positive");
  if (!(control_rate > 0.0)) config_error("control_rate", "must be positive");
  if (!(obs_rate > 0.0) || obs_rate > control_rate) {
    config_error("obs_rate", "must be positive and at most control_rate");
  }
  const double ratio = control_rate / obs_rate;
  if (std::abs(ratio - std::round(ratio)) > 1e-9) {
    config_error("obs_rate", "control_rate / obs_rate must be an integer");
  }
  if (!(obs_latency >= 0.0)) config_error("obs_latency", "must be >= 0");
  const double max_delay =
      mode == RunMode::kTraining ? randomization.perception_delay_ms.hi * 1e-3
                                 : 0.0;
  const double horizon =
      static_cast<double>(filter_history_depth - 1) / control_rate;
  if (obs_latency + max_delay >= horizon) {
    config_error("obs_latency",
                 "latency must stay below the filter history horizon");
  }
  if (surface_samples == 0) config_error("surface_samples", "must be >= 1");
  if (!(alpha > 0.0)) config_error("alpha", "must be positive");
  if (!(vo_noise.translation_std >= 0.0) || !(vo_noise.rotation_std >= 0.0)) {
    config_error("vo_noise", "stds must be >= 0");
  }
  if (!(sensor.sigma_u >= 0.0) || !(sensor.sigma_v >= 0.0) ||
      !(sensor.sigma_z >= 0.0)) {
    config_error("sensor", "stds must be >= 0");
  }
  switch (object.shape) {
    case ShapeKind::kSphere:
      if (!(object.radius > 0.0)) config_error("object.radius", "must be positive");
      break;
    case ShapeKind::kBox:
      if (!(object.dims.array() > 0.0).all()) {
        config_error("object.dims", "must be positive");
      }
      break;
    case ShapeKind::kCylinder:
      if (!(object.radius > 0.0)) config_error("object.radius", "must be positive");
      if (!(object.height > 0.0)) config_error("object.height", "must be positive");
      break;
  }
  if (score_after < 0.0) config_error("score_after", "must be >= 0");
  try {
    camera.validate();
    randomization.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, e.what());
  }
}

SurfacePointCloud sample_surface(const ObjectSpec& object, std::size_t count,
                                 Rng& rng) {
  SurfacePointCloud cloud;
  cloud.frame = "object";
  cloud.points.reserve(count);
  cloud.normals.reserve(count);
  std::normal_distribution<double> gauss(0.0, 1.0);

  for (std::size_t i = 0; i < count; ++i) {
    Vec3 p;
    Vec3 n;
    switch (object.shape) {
      case ShapeKind::kSphere: {
        do {
          const double x = gauss(rng);
          const double y = gauss(rng);
          const double z = gauss(rng);
          n = Vec3(x, y, z);
        } while (n.norm() < 1e-12);
        n.normalize();
        p = object.radius * n;
        break;
      }
      case ShapeKind::kBox: {
        const Vec3& d = object.dims;
        const std::array<double, 3> face_area{d.y() * d.z(), d.x() * d.z(),
                                              d.x() * d.y()};
        const double total = 2.0 * (face_area[0] + face_area[1] + face_area[2]);
        double u = unit_uniform(rng) * total;
        int axis = 0;
        while (axis < 2 && u >= 2.0 * face_area[axis]) {
          u -= 2.0 * face_area[axis];
          ++axis;
        }
        const double sign = unit_uniform(rng) < 0.5 ? -1.0 : 1.0;
        for (int c = 0; c < 3; ++c) {
          p(c) = (unit_uniform(rng) - 0.5) * d(c);
        }
        p(axis) = sign * 0.5 * d(axis);
        n = Vec3::Zero();
        n(axis) = sign;
        break;
      }
      case ShapeKind::kCylinder: {
        const double r = object.radius;
        const double h = object.height;
        const double side = 2.0 * std::numbers::pi * r * h;
        const double cap = std::numbers::pi * r * r;
        const double u = unit_uniform(rng) * (side + 2.0 * cap);
        if (u < side) {
          const double theta = 2.0 * std::numbers::pi * unit_uniform(rng);
          const double z = (unit_uniform(rng) - 0.5) * h;
          n = Vec3(std::cos(theta), std::sin(theta), 0.0);
          p = Vec3(r * n.x(), r * n.y(), z);
        } else {
          const double sign = u < side + cap ? 1.0 : -1.0;
          const double rr = r * std::sqrt(unit_uniform(rng));
          const double theta = 2.0 * std::numbers::pi * unit_uniform(rng);
          p = Vec3(rr * std::cos(theta), rr * std::sin(theta), sign * 0.5 * h);
          n = Vec3(0.0, 0.0, sign);
        }
        break;
      }
    }
    cloud.points.push_back(p);
    cloud.normals.push_back(n);
  }
  return cloud;
}

SurfacePointCloud ScenarioBundle::cloud_at(std::size_t tick) const {
  const TickTruth& t = ticks.at(tick);
  return transform_points(body_cloud, t.camera_pose.inverse() * t.object_pose);
}

RigidTransform ScenarioBundle::vo_relative(std::size_t tick) const {
  if (tick == 0) return RigidTransform::identity("camera");
  return ticks.at(tick).vo_pose.inverse() * ticks.at(tick - 1).vo_pose;
}

ScenarioBundle generate_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  ScenarioBundle bundle;
  bundle.config = cfg;
  bundle.alpha = cfg.alpha;
  bundle.latency = cfg.obs_latency;
  if (cfg.mode == RunMode::kTraining) {
    Rng rng = stream_rng(cfg.seed, Stream::kRandomization);
    bundle.draw = sample_randomization(cfg.randomization, rng);
    bundle.alpha = bundle.draw->alpha;
    bundle.latency += bundle.draw->perception_delay;
  }

  Rng surface_rng = stream_rng(cfg.seed, Stream::kSurface);
  bundle.body_cloud = sample_surface(cfg.object, cfg.surface_samples, surface_rng);

  Rng vo_rng = stream_rng(cfg.seed, Stream::kVo);
  const double dt = cfg.control_period();
  const auto n_ticks =
      static_cast<std::size_t>(std::llround(cfg.duration * cfg.control_rate)) + 1;
  const Mat3 object_rotation =
      rotation_from_rpy(cfg.object.rpy.x(), cfg.object.rpy.y(), cfg.object.rpy.z());

  bundle.ticks.reserve(n_ticks);
  for (std::size_t i = 0; i < n_ticks; ++i) {
    TickTruth truth;
    truth.stamp = static_cast<double>(i) * dt;

    RigidTransform pose = nominal_camera_pose(cfg.camera_motion, truth.stamp);
    if (bundle.draw) {
      pose = pose.with_frames("camera_nominal", "world") *
             bundle.draw->extrinsic_offset;
    }
    truth.camera_pose = pose;

    const double rx = normal(vo_rng, cfg.vo_noise.rotation_std);
    const double ry = normal(vo_rng, cfg.vo_noise.rotation_std);
    const double rz = normal(vo_rng, cfg.vo_noise.rotation_std);
    const double tx = normal(vo_rng, cfg.vo_noise.translation_std);
    const double ty = normal(vo_rng, cfg.vo_noise.translation_std);
    const double tz = normal(vo_rng, cfg.vo_noise.translation_std);
    const Vec3 rotvec(rx, ry, rz);
    const RigidTransform vo_error(rotation_about(rotvec, rotvec.norm()),
                                  Vec3(tx, ty, tz), "camera", "camera");
    truth.vo_pose = pose * vo_error;

    truth.object_pose = RigidTransform(
        object_rotation, cfg.object.position + cfg.object.velocity * truth.stamp,
        "object", "world");
    truth.relative_velocity =
        pose.rotation().transpose() * cfg.object.velocity;

    bundle.ticks.push_back(std::move(truth));
    TickTruth& t = bundle.ticks.back();

    const SurfacePointCloud cloud = bundle.cloud_at(i);
    const std::vector<std::size_t> visible = compute_visible_set(cloud, cfg.camera);
    if (!visible.empty()) {
      std::vector<Vec3> pts;
      std::vector<Vec3> nrm;
      for (std::size_t k : visible) {
        pts.push_back(cloud.points[k]);
        nrm.push_back(cloud.normals[k]);
      }
      const auto w = solid_angle_weights(pts, nrm);
      t.true_set = extract_sigma_points(weighted_pca(pts, w), bundle.alpha);
      t.reference_set = sigma_points_uniform(pts, bundle.alpha);
      t.visible = project_point(cfg.camera, t.true_set->centroid()).in_fov;
    }
  }
  return bundle;
}

std::optional<SigmaPointSet> measure_cloud(const SurfacePointCloud& cloud_in_camera,
                                           const CameraModel& cam,
                                           const SensorNoise& noise,
                                           double alpha, Rng& rng) {
  const std::vector<std::size_t> visible = compute_visible_set(cloud_in_camera, cam);
  std::vector<Vec3> measured;
  measured.reserve(visible.size());
  for (std::size_t k : visible) {
    const Vec3& p = cloud_in_camera.points[k];
    const Vec2 pixel = project_point(cam, p).pixel;
    const double du = normal(rng, noise.sigma_u);
    const double dv = normal(rng, noise.sigma_v);
    const double dz = normal(rng, noise.sigma_z);
    const double depth = p.z() + dz;
    if (depth < cam.near_z) continue;
    measured.push_back(backproject_pixel(cam, pixel + Vec2(du, dv), depth));
  }
  return sigma_points_uniform(measured, alpha);
}

SensorReading emulate_sensor(const ScenarioBundle& bundle, std::size_t tick,
                             Rng& rng) {
  SensorReading r;
  r.stamp = bundle.ticks.at(tick).stamp;
  r.available_at = r.stamp + bundle.latency;
  r.points = measure_cloud(bundle.cloud_at(tick), bundle.config.camera,
                           bundle.config.sensor, bundle.alpha, rng);
  return r;
}

std::vector<SensorReading> emulate_measurement_stream(const ScenarioBundle& bundle) {
  Rng rng = stream_rng(bundle.config.seed, Stream::kSensor);
  const std::size_t stride = bundle.config.ticks_per_observation();
  const auto& cutoff = bundle.config.measurement_cutoff;
  std::vector<SensorReading> stream;
  for (std::size_t i = 0; i < bundle.ticks.size(); i += stride) {
    if (cutoff && bundle.ticks[i].stamp > *cutoff + kStampSlack) break;
    stream.push_back(emulate_sensor(bundle, i, rng));
  }
  return stream;
}

std::vector<std::optional<SigmaPointSet>> baseline_zoh(
    const std::vector<SensorReading>& stream,
    const std::vector<double>& query_stamps) {
  std::vector<const SensorReading*> by_arrival;
  for (const SensorReading& r : stream) by_arrival.push_back(&r);
  std::stable_sort(by_arrival.begin(), by_arrival.end(),
                   [](const SensorReading* a, const SensorReading* b) {
                     return a->available_at < b->available_at;
                   });

  std::vector<std::optional<SigmaPointSet>> out;
  out.reserve(query_stamps.size());
  std::optional<SigmaPointSet> latest;
  std::size_t next = 0;
  for (double q : query_stamps) {
    while (next < by_arrival.size() &&
           by_arrival[next]->available_at <= q + kStampSlack) {
      if (by_arrival[next]->points) latest = by_arrival[next]->points;
      ++next;
    }
    out.push_back(latest);
  }
  return out;
}

FilterTrace run_filter(const ScenarioBundle& bundle,
                       const std::vector<SensorReading>& stream,
                       const FilterConfig& cfg) {
  FilterTrace trace;
  const std::size_t n = bundle.ticks.size();
  trace.tracks.resize(n);
  trace.delivered.assign(n, false);
  trace.latest_available_at.assign(n, -std::numeric_limits<double>::infinity());

  FilterBank bank(cfg, bundle.ticks.front().stamp);
  const double dt = bundle.control_period();
  const CameraModel& cam = bundle.config.camera;
  std::size_t next = 0;
  double latest = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) bank.step(dt, bundle.vo_relative(i));
    const double now = bundle.ticks[i].stamp;
    while (next < stream.size() &&
           stream[next].available_at <= now + kStampSlack) {
      const SensorReading& r = stream[next++];
      if (!r.points) continue;
      if (bank.ingest(*r.points, r.stamp, cam) == IngestStatus::kStale) {
        ++trace.stale;
        continue;
      }
      trace.delivered[i] = true;
      latest = std::max(latest, r.available_at);
    }
    trace.latest_available_at[i] = latest;
    if (bank.initialized()) trace.tracks[i] = bank.tracks();
  }
  return trace;
}

FilterTrace baseline_no_compensation(const ScenarioBundle& bundle,
                                     const std::vector<SensorReading>& stream,
                                     FilterConfig cfg) {
  cfg.ego_compensation = false;
  return run_filter(bundle, stream, cfg);
}

namespace {

struct SquaredErrorSum {
  double sum = 0.0;
  std::size_t count = 0;
  void add(double sq) {
    sum += sq;
    ++count;
  }
  double rmse() const {
    return count == 0 ? kNaN : std::sqrt(sum / static_cast<double>(count));
  }
};

// Proprioceptive state of a base rigidly carrying the camera, from finite
// differences of the true camera poses.
ProprioState proprio_at(const ScenarioBundle& b, std::size_t i,
                        const Action& prev_action) {
  const Mat3 B = base_from_camera();
  const RigidTransform& pose = b.ticks[i].camera_pose;
  const Mat3 Rcw = pose.rotation().transpose();
  ProprioState p;
  p.gravity = B * (Rcw * Vec3::UnitY());
  p.prev_action = prev_action;
  if (i > 0) {
    const RigidTransform& prev = b.ticks[i - 1].camera_pose;
    const double dt = b.control_period();
    p.lin_vel = B * (Rcw * (pose.translation() - prev.translation()) / dt);
    const Eigen::AngleAxisd delta(prev.rotation().transpose() * pose.rotation());
    p.ang_vel = B * (delta.axis() * delta.angle() / dt);
  }
  return p;
}

}  // namespace

EpisodeResult run_episode(const ScenarioBundle& bundle,
                          const EpisodeOptions& options) {
  options.filter.validate();
  const ScenarioConfig& cfg = bundle.config;
  const std::size_t n = bundle.ticks.size();

  const std::vector<SensorReading> stream = emulate_measurement_stream(bundle);
  const FilterTrace filter = run_filter(bundle, stream, options.filter);
  const FilterTrace nocomp =
      baseline_no_compensation(bundle, stream, options.filter);
  std::vector<double> stamps;
  for (const TickTruth& t : bundle.ticks) stamps.push_back(t.stamp);
  const auto zoh = baseline_zoh(stream, stamps);

  EpisodeResult result;
  EpisodeMetrics& m = result.metrics;
  result.ticks.resize(n);

  std::array<SquaredErrorSum, kSigmaCount> se_filter;
  std::array<SquaredErrorSum, kSigmaCount> se_zoh;
  std::array<SquaredErrorSum, kSigmaCount> se_nocomp;
  SquaredErrorSum se_velocity;
  double lag_sum = 0.0;
  std::size_t lag_count = 0;
  std::size_t visible_ticks = 0;

  // Open-loop reference: world-frame position and velocity of every track at
  // the last tick a measurement was ingested.
  struct Anchor {
    double stamp = 0.0;
    std::array<Vec3, kSigmaCount> position;
    std::array<Vec3, kSigmaCount> velocity;
  };
  std::optional<Anchor> anchor;

  std::optional<DriftState> drift = options.drift;
  Rng drift_rng = stream_rng(cfg.seed, Stream::kDrift);
  Rng obs_rng = stream_rng(cfg.seed, Stream::kObservationNoise);
  ObservationBuffer obs_buffer;
  std::optional<SigmaPointSet> last_true_in_object;

  Action prev_action = Action::Zero();
  bool succeeded = false;
  m.reward_enabled = options.reward.has_value();
  if (options.reward) {
    options.reward->geometry.validate();
    options.reward->criteria.validate();
    options.reward->reward.validate();
  }

  for (std::size_t i = 0; i < n; ++i) {
    const TickTruth& truth = bundle.ticks[i];
    TickRecord& rec = result.ticks[i];
    rec.stamp = truth.stamp;
    rec.visible = truth.visible;
    if (truth.visible) ++visible_ticks;

    const auto& ref = truth.reference_set;
    const auto& ft = filter.tracks[i];
    const auto& nt = nocomp.tracks[i];
    if (ref) {
      for (std::size_t j = 0; j < kSigmaCount; ++j) {
        if (ft) rec.filter_error[j] = (*ft)[j].position - ref->points[j];
        if (nt) rec.nocomp_error[j] = (*nt)[j].position - ref->points[j];
        if (zoh[i]) rec.zoh_error[j] = zoh[i]->points[j] - ref->points[j];
      }
    }

    const bool scored = ref && ft && nt && zoh[i] &&
                        truth.stamp >= cfg.score_after - kStampSlack;
    if (scored) {
      ++m.scored_ticks;
      for (std::size_t j = 0; j < kSigmaCount; ++j) {
        se_filter[j].add(rec.filter_error[j]->squaredNorm());
        se_zoh[j].add(rec.zoh_error[j]->squaredNorm());
        se_nocomp[j].add(rec.nocomp_error[j]->squaredNorm());
      }
      se_velocity.add(((*ft)[0].velocity - truth.relative_velocity).squaredNorm());
      if (cfg.object.velocity.norm() > 0.0) {
        const Vec3 dir = truth.relative_velocity.normalized();
        lag_sum += (ref->centroid() - zoh[i]->centroid()).dot(dir);
        ++lag_count;
      }
    }

    // Open-loop exactness bookkeeping.
    if (ft) {
      const RigidTransform& pose = truth.camera_pose;
      if (filter.delivered[i] || !anchor) {
        Anchor a;
        a.stamp = truth.stamp;
        for (std::size_t j = 0; j < kSigmaCount; ++j) {
          a.position[j] = pose.apply((*ft)[j].position);
          a.velocity[j] = pose.rotate((*ft)[j].velocity);
        }
        anchor = a;
      } else {
        const RigidTransform world_to_camera = pose.inverse();
        const double elapsed = truth.stamp - anchor->stamp;
        for (std::size_t j = 0; j < kSigmaCount; ++j) {
          const Vec3 expected = world_to_camera.apply(
              anchor->position[j] + anchor->velocity[j] * elapsed);
          m.open_loop_max_deviation = std::max(
              m.open_loop_max_deviation, ((*ft)[j].position - expected).norm());
        }
      }
    }

    // Blind-spot drift and policy observation (training-side emulation).
    const RigidTransform camera_from_object =
        truth.camera_pose.inverse() * truth.object_pose;
    if (truth.true_set) {
      last_true_in_object = truth.true_set->transformed(camera_from_object.inverse());
    }
    if (drift) {
      *drift = drift_step(*drift, drift_rng, truth.visible);
      rec.drift_magnitude = drift->d.norm();
      m.max_drift = std::max(m.max_drift, rec.drift_magnitude);
    }
    const ProprioState proprio = proprio_at(bundle, i, prev_action);
    if (cfg.mode == RunMode::kTraining && last_true_in_object) {
      SigmaPointSet observed = last_true_in_object->transformed(camera_from_object);
      if (drift) observed = apply_drift(observed, *drift);
      observed = perturb_sigma_points(observed, cfg.randomization.sigma_scale_std,
                                      cfg.randomization.sigma_rotation_std, obs_rng);
      obs_buffer.push(truth.stamp, observed);
      result.last_observation = assemble_observation(
          obs_buffer, perturb_proprio(proprio, cfg.randomization, obs_rng));
    }

    if (options.reward) {
      const RewardSetup& rs = *options.reward;
      const RigidTransform object_from_camera = camera_from_object.inverse();
      Pose pose;
      pose.position = object_from_camera.translation();
      pose.rpy = rpy_from_rotation(object_from_camera.rotation());
      const Vec3 axis = truth.camera_pose.rotate(Vec3::UnitZ());
      const Action raw(proprio.lin_vel.x(), proprio.lin_vel.y(),
                       proprio.ang_vel.z(), std::asin(std::clamp(axis.y(), -1.0, 1.0)));
      const ClippedAction act = clip_action(raw, rs.reward);
      rec.reward = compute_reward(pose, rs.geometry, rs.criteria, proprio, act,
                                  prev_action, !truth.visible, rs.reward);
      for (std::size_t k = 0; k < RewardBreakdown::kTerms; ++k) {
        m.reward_sums[k] += rec.reward->weighted[k];
      }
      m.reward_total += rec.reward->total;
      prev_action = act.action;

      if (!succeeded) {
        const bool timed_out = i + 1 == n;
        const TerminalStatus s =
            terminal_status(pose, rs.geometry, rs.criteria, timed_out);
        if (s == TerminalStatus::kSuccess) succeeded = true;
        m.terminal = s;
      }
    }
  }

  for (std::size_t j = 0; j < kSigmaCount; ++j) {
    m.rmse_filter[j] = se_filter[j].rmse();
    m.rmse_zoh[j] = se_zoh[j].rmse();
    m.rmse_nocomp[j] = se_nocomp[j].rmse();
  }
  m.centroid_rmse_filter = m.rmse_filter[0];
  m.centroid_rmse_zoh = m.rmse_zoh[0];
  m.centroid_rmse_nocomp = m.rmse_nocomp[0];
  m.velocity_rmse = se_velocity.rmse();
  m.zoh_mean_lag_error =
      lag_count == 0 ? kNaN : lag_sum / static_cast<double>(lag_count);
  m.visible_fraction = static_cast<double>(visible_ticks) / static_cast<double>(n);
  m.measurements_stale = filter.stale;
  m.measurements_delivered = static_cast<std::size_t>(
      std::count(filter.delivered.begin(), filter.delivered.end(), true));
  return result;
}

}  // namespace sigmatrack
