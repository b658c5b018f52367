#pragma once

// Stochastic models bridging simulation and hardware: the blind-spot
// random-walk drift and the per-episode domain randomization draws.

#include <limits>

#include "sigmatrack/geometry.hpp"
#include "sigmatrack/tasklogic.hpp"
#include "sigmatrack/types.hpp"

namespace sigmatrack {

struct DriftState {
  Vec3 d = Vec3::Zero();
  double sigma_drift = 0.01;  // [m] per control tick
  double d_max = 0.10;        // [m]; +inf disables clipping
};

/// Deterministic core of drift_step: d <- clip(d + increment) or zero when
/// the target is visible.
DriftState drift_apply(const DriftState& state, const Vec3& increment,
                       bool target_visible);

/// One control tick of d_t = clip(d_{t-1} + N(0, sigma^2 I), -d_max, d_max);
/// resets to zero while the target is visible. No draw is made when visible
/// or when sigma_drift == 0.
DriftState drift_step(const DriftState& state, Rng& rng, bool target_visible);

/// Adds the same drift vector to every sigma point.
SigmaPointSet apply_drift(const SigmaPointSet& true_set, const DriftState& state);

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct RandomizationConfig {
  Range alpha{1.0, 1.5};
  Range extrinsic_x{-0.02, 0.02};    // [m]
  Range extrinsic_y{-0.005, 0.005};  // [m]
  Range extrinsic_z{-0.02, 0.02};    // [m]
  Range extrinsic_roll_deg{-0.5, 0.5};
  Range extrinsic_pitch_deg{-2.0, 2.0};
  Range extrinsic_yaw_deg{-0.5, 0.5};
  Range perception_delay_ms{0.0, 50.0};
  // Recorded only; there is no physics engine behind them.
  Range friction{0.2, 5.0};
  Range restitution{0.0, 1.0};
  Range added_mass_kg{-1.0, 2.0};

  double base_lin_vel_std = 0.1;  // [m/s]
  double base_ang_vel_std = 0.1;  // [rad/s]
  double gravity_std = 0.1;
  double sigma_scale_std = 0.1;
  double sigma_rotation_std = 0.1;  // [rad]

  void validate() const;
};

struct RandomizationDraw {
  /// Camera mounting error, camera -> nominal camera.
  RigidTransform extrinsic_offset;
  Vec3 extrinsic_translation = Vec3::Zero();
  Vec3 extrinsic_rpy = Vec3::Zero();  // [rad]
  double perception_delay = 0.0;      // [s]
  double alpha = 1.0;
  double friction = 0.0;
  double restitution = 0.0;
  double added_mass = 0.0;
};

/// Draw order is fixed so a seed reproduces the full sequence.
RandomizationDraw sample_randomization(const RandomizationConfig& cfg, Rng& rng);

/// Observation noise on a sigma set: offsets from the centroid are scaled by
/// (1 + eps), eps ~ N(0, scale_std), then rotated about the centroid by a
/// rotation vector with N(0, rotation_std) components.
SigmaPointSet perturb_sigma_points(const SigmaPointSet& set, double scale_std,
                                   double rotation_std, Rng& rng);

/// Gaussian noise on base velocities and projected gravity (re-normalized).
ProprioState perturb_proprio(const ProprioState& proprio,
                             const RandomizationConfig& cfg, Rng& rng);

}  // namespace sigmatrack
