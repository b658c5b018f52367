#include "sigmatrack/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "sigmatrack/error.hpp"

namespace sigmatrack {

namespace {

double gaussian(Rng& rng, double stddev) {
  if (stddev == 0.0) return 0.0;
  return std::normal_distribution<double>(0.0, stddev)(rng);
}

double uniform(Rng& rng, const Range& r) {
  if (r.lo == r.hi) return r.lo;
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

Vec3 gaussian3(Rng& rng, double stddev) {
  const double x = gaussian(rng, stddev);
  const double y = gaussian(rng, stddev);
  const double z = gaussian(rng, stddev);
  return Vec3(x, y, z);
}

constexpr double kDegToRad = std::numbers::pi / 180.0;

}  // namespace

DriftState drift_apply(const DriftState& state, const Vec3& increment,
                       bool target_visible) {
  DriftState out = state;
  if (target_visible) {
    out.d.setZero();
    return out;
  }
  for (int i = 0; i < 3; ++i) {
    out.d(i) = std::clamp(state.d(i) + increment(i), -state.d_max, state.d_max);
  }
  return out;
}

DriftState drift_step(const DriftState& state, Rng& rng, bool target_visible) {
  if (target_visible) return drift_apply(state, Vec3::Zero(), true);
  return drift_apply(state, gaussian3(rng, state.sigma_drift), false);
}

SigmaPointSet apply_drift(const SigmaPointSet& true_set,
                          const DriftState& state) {
  return true_set.translated(state.d);
}

void RandomizationConfig::validate() const {
  const std::pair<const char*, const Range*> ranges[] = {
      {"alpha", &alpha},
      {"extrinsic_x", &extrinsic_x},
      {"extrinsic_y", &extrinsic_y},
      {"extrinsic_z", &extrinsic_z},
      {"extrinsic_roll_deg", &extrinsic_roll_deg},
      {"extrinsic_pitch_deg", &extrinsic_pitch_deg},
      {"extrinsic_yaw_deg", &extrinsic_yaw_deg},
      {"perception_delay_ms", &perception_delay_ms},
      {"friction", &friction},
      {"restitution", &restitution},
      {"added_mass_kg", &added_mass_kg}};
  for (const auto& [name, r] : ranges) {
    if (!(r->lo <= r->hi)) {
      throw Error(ErrorCode::kInvalidArgument,
                  std::string("randomization.") + name + " has lo > hi");
    }
  }
  if (!(alpha.lo > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "randomization.alpha must be positive");
  }
  if (!(perception_delay_ms.lo >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "randomization.perception_delay_ms must be >= 0");
  }
  const double stds[] = {base_lin_vel_std, base_ang_vel_std, gravity_std,
                         sigma_scale_std, sigma_rotation_std};
  for (double s : stds) {
    if (!(s >= 0.0)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "randomization noise stds must be >= 0");
    }
  }
}

RandomizationDraw sample_randomization(const RandomizationConfig& cfg,
                                       Rng& rng) {
  RandomizationDraw d;
  d.alpha = uniform(rng, cfg.alpha);
  d.extrinsic_translation.x() = uniform(rng, cfg.extrinsic_x);
  d.extrinsic_translation.y() = uniform(rng, cfg.extrinsic_y);
  d.extrinsic_translation.z() = uniform(rng, cfg.extrinsic_z);
  d.extrinsic_rpy.x() = uniform(rng, cfg.extrinsic_roll_deg) * kDegToRad;
  d.extrinsic_rpy.y() = uniform(rng, cfg.extrinsic_pitch_deg) * kDegToRad;
  d.extrinsic_rpy.z() = uniform(rng, cfg.extrinsic_yaw_deg) * kDegToRad;
  d.perception_delay = uniform(rng, cfg.perception_delay_ms) * 1e-3;
  d.friction = uniform(rng, cfg.friction);
  d.restitution = uniform(rng, cfg.restitution);
  d.added_mass = uniform(rng, cfg.added_mass_kg);
  d.extrinsic_offset = RigidTransform(
      rotation_from_rpy(d.extrinsic_rpy.x(), d.extrinsic_rpy.y(),
                        d.extrinsic_rpy.z()),
      d.extrinsic_translation, "camera", "camera_nominal");
  return d;
}

SigmaPointSet perturb_sigma_points(const SigmaPointSet& set, double scale_std,
                                   double rotation_std, Rng& rng) {
  const double scale = 1.0 + gaussian(rng, scale_std);
  const Vec3 rotvec = gaussian3(rng, rotation_std);
  const Mat3 R = rotation_about(rotvec, rotvec.norm());
  SigmaPointSet out;
  const Vec3& c = set.centroid();
  out.points[0] = c;
  for (std::size_t j = 1; j < kSigmaCount; ++j) {
    out.points[j] = c + scale * (R * (set.points[j] - c));
  }
  return out;
}

ProprioState perturb_proprio(const ProprioState& proprio,
                             const RandomizationConfig& cfg, Rng& rng) {
  ProprioState out = proprio;
  out.lin_vel += gaussian3(rng, cfg.base_lin_vel_std);
  out.ang_vel += gaussian3(rng, cfg.base_ang_vel_std);
  const Vec3 g = proprio.gravity + gaussian3(rng, cfg.gravity_std);
  if (g.norm() > 0.0) out.gravity = g.normalized();
  return out;
}

}  // namespace sigmatrack
