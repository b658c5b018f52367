#pragma once

// Ego-centric Kalman filter bank: one constant-velocity filter per sigma
// point, with state expressed in the current camera frame. Each control tick
// runs a kinematic prediction followed by a rigid remap through the camera's
// inter-frame motion. Late measurements are applied by rolling back to the
// snapshot at their stamp and replaying the stored ticks.

#include <array>
#include <cstddef>
#include <deque>
#include <optional>
#include <vector>

#include "sigmatrack/geometry.hpp"
#include "sigmatrack/types.hpp"

namespace sigmatrack {

struct FilterConfig {
  double q_pos = 1.0e-6;  // [m^2] per control tick
  double q_vel = 1.0e-5;  // [m^2/s^2] per control tick
  double sigma_u = 20.0;  // [px]
  double sigma_v = 20.0;  // [px]
  double sigma_z = 0.05;  // [m]
  double p0_pos = 1.0e-2;  // [m^2]
  double p0_vel = 1.0e-1;  // [m^2/s^2]

  /// Snapshot ring length. 30 ticks at 50 Hz covers 0.6 s of latency.
  std::size_t history_depth = 30;
  /// false: late measurements update the current state in place.
  bool replay_late_measurements = true;
  /// false: T_rel is ignored (ablation baseline).
  bool ego_compensation = true;
  /// After this long without an update, a track whose innovation exceeds
  /// `reacquire_gate_sigma` standard deviations on any axis is re-initialized.
  double reacquire_window = 5.0;  // [s]
  double reacquire_gate_sigma = 5.0;

  void validate() const;
};

struct TrackState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Mat6 covariance = Mat6::Identity();
  double stamp = 0.0;

  Vec6 mean() const;
};

TrackState init_track(const Vec3& z, const FilterConfig& cfg, double stamp);

/// Constant-velocity prediction; Q = diag(q_pos I, q_vel I) is added once per
/// call. Throws Error(kInvalidArgument) for dt < 0.
TrackState predict(const TrackState& track, double dt, const FilterConfig& cfg);

/// Maps the state from C_{t-1} into C_t: s <- R s + t, v <- R v,
/// P <- F P F^T with F = blockdiag(R, R).
TrackState compensate_ego_motion(const TrackState& track,
                                 const RigidTransform& t_rel);
/// Throws Error(kInvalidRotation) when `rotation` is not in SO(3).
TrackState compensate_ego_motion(const TrackState& track, const Mat3& rotation,
                                 const Vec3& translation);

/// diag((Z sigma_u / fx)^2, (Z sigma_v / fy)^2, sigma_z^2). Throws
/// Error(kInvalidDepth) for depth_z <= 0.
Mat3 measurement_covariance(const CameraModel& cam, double depth_z,
                            const FilterConfig& cfg);

/// Position-only measurement update with a Joseph-form covariance update.
/// Throws Error(kInvalidArgument) if R is not symmetric positive definite and
/// Error(kNumerical) if the innovation covariance cannot be factored.
TrackState update(const TrackState& track, const Vec3& z, const Mat3& R,
                  const FilterConfig& cfg);

/// Reorders `measured` so each +/- pair lines up with `predicted`. Axis k of
/// the measurement is matched with axis k of the prediction; within the pair
/// the assignment with the smaller summed squared distance wins (ties keep the
/// measured order).
SigmaPointSet associate_measurement(const SigmaPointSet& predicted,
                                    const SigmaPointSet& measured);

enum class IngestStatus {
  kApplied,
  kInitialized,
  kReinitialized,
  kStale,
};

class FilterBank {
 public:
  using Tracks = std::array<TrackState, kSigmaCount>;

  explicit FilterBank(FilterConfig cfg = {}, double start_stamp = 0.0);

  /// Advances every track by dt and through t_rel (C_{t-1} -> C_t). Returns
  /// the current estimate, or nullopt before the first measurement.
  std::optional<SigmaPointSet> step(double dt, const RigidTransform& t_rel);

  /// Applies a measurement stamped `meas_stamp` (<= stamp()). Measurements
  /// older than the snapshot ring are dropped with kStale.
  IngestStatus ingest(const SigmaPointSet& measured, double meas_stamp,
                      const CameraModel& cam);

  bool initialized() const { return history_.back().posterior.tracks.has_value(); }
  std::optional<SigmaPointSet> estimate() const;
  /// Precondition: initialized().
  const Tracks& tracks() const { return *history_.back().posterior.tracks; }

  double stamp() const { return history_.back().stamp; }
  /// Oldest stamp a measurement may carry without being stale.
  double horizon_start() const { return history_.front().stamp; }
  std::vector<double> history_stamps() const;
  const FilterConfig& config() const { return cfg_; }

 private:
  struct BankState {
    std::optional<Tracks> tracks;
    double last_update = 0.0;
  };
  struct PendingMeasurement {
    SigmaPointSet points;
    double stamp = 0.0;
    CameraModel cam;
  };
  struct Snapshot {
    double stamp = 0.0;
    double dt = 0.0;
    RigidTransform t_rel;
    BankState prior;
    BankState posterior;
    std::vector<PendingMeasurement> measurements;
  };

  BankState advance(const BankState& from, double dt,
                    const RigidTransform& t_rel) const;
  IngestStatus apply(BankState& state, double stamp,
                     const PendingMeasurement& m) const;
  // Recomputes snapshot `index` and every later one; returns the status of
  // measurement `fresh` within snapshot `index`.
  IngestStatus rebuild_from(std::size_t index, std::size_t fresh);

  FilterConfig cfg_;
  std::deque<Snapshot> history_;
};

}  // namespace sigmatrack
