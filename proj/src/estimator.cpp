#include "sigmatrack/estimator.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <string>

#include "sigmatrack/error.hpp"

namespace sigmatrack {

namespace {

// Snapshot stamps are accumulated sums of dt; compare with a small slack.
constexpr double kStampTolerance = 1e-9;

Mat6 symmetrized(const Mat6& m) { return 0.5 * (m + m.transpose()); }

}  // namespace

void FilterConfig::validate() const {
  const std::pair<const char*, double> positives[] = {
      {"q_pos", q_pos},   {"q_vel", q_vel},   {"sigma_u", sigma_u},
      {"sigma_v", sigma_v}, {"sigma_z", sigma_z}, {"p0_pos", p0_pos},
      {"p0_vel", p0_vel}, {"reacquire_window", reacquire_window},
      {"reacquire_gate_sigma", reacquire_gate_sigma}};
  for (const auto& [name, value] : positives) {
    if (!(value > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument,
                  std::string("filter.") + name + " must be positive");
    }
  }
  if (history_depth < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "filter.history_depth must be at least 2");
  }
}

Vec6 TrackState::mean() const {
  Vec6 x;
  x << position, velocity;
  return x;
}

TrackState init_track(const Vec3& z, const FilterConfig& cfg, double stamp) {
  TrackState t;
  t.position = z;
  t.velocity.setZero();
  t.covariance.setZero();
  t.covariance.diagonal() << Vec3::Constant(cfg.p0_pos), Vec3::Constant(cfg.p0_vel);
  t.stamp = stamp;
  return t;
}

TrackState predict(const TrackState& track, double dt, const FilterConfig& cfg) {
  if (!(dt >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "negative dt in predict");
  }
  Mat6 A = Mat6::Identity();
  A.topRightCorner<3, 3>() = dt * Mat3::Identity();

  TrackState out = track;
  out.position = track.position + dt * track.velocity;
  out.covariance = A * track.covariance * A.transpose();
  out.covariance.diagonal().head<3>().array() += cfg.q_pos;
  out.covariance.diagonal().tail<3>().array() += cfg.q_vel;
  out.covariance = symmetrized(out.covariance);
  out.stamp = track.stamp + dt;
  return out;
}

TrackState compensate_ego_motion(const TrackState& track, const Mat3& rotation,
                                 const Vec3& translation) {
  if (!is_rotation(rotation)) {
    throw Error(ErrorCode::kInvalidRotation,
                "ego-motion rotation is not in SO(3)");
  }
  Mat6 F = Mat6::Zero();
  F.topLeftCorner<3, 3>() = rotation;
  F.bottomRightCorner<3, 3>() = rotation;

  TrackState out = track;
  out.position = rotation * track.position + translation;
  out.velocity = rotation * track.velocity;
  out.covariance = symmetrized(F * track.covariance * F.transpose());
  return out;
}

TrackState compensate_ego_motion(const TrackState& track,
                                 const RigidTransform& t_rel) {
  return compensate_ego_motion(track, t_rel.rotation(), t_rel.translation());
}

Mat3 measurement_covariance(const CameraModel& cam, double depth_z,
                            const FilterConfig& cfg) {
  if (!(depth_z > 0.0)) {
    throw Error(ErrorCode::kInvalidDepth,
                "measurement depth must be positive, got " +
                    std::to_string(depth_z));
  }
  const double sx = depth_z / cam.fx * cfg.sigma_u;
  const double sy = depth_z / cam.fy * cfg.sigma_v;
  return Vec3(sx * sx, sy * sy, cfg.sigma_z * cfg.sigma_z).asDiagonal();
}

TrackState update(const TrackState& track, const Vec3& z, const Mat3& R,
                  const FilterConfig& /*cfg*/) {
  if (!R.allFinite() || (R - R.transpose()).cwiseAbs().maxCoeff() > 1e-12 ||
      R.llt().info() != Eigen::Success) {
    throw Error(ErrorCode::kInvalidArgument,
                "measurement covariance must be symmetric positive definite");
  }
  const Mat6& P = track.covariance;
  const Eigen::Matrix<double, 6, 3> PHt = P.leftCols<3>();
  const Mat3 S = P.topLeftCorner<3, 3>() + R;
  const Eigen::LLT<Mat3> llt(S);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kNumerical, "innovation covariance is singular");
  }
  const Eigen::Matrix<double, 6, 3> K = llt.solve(PHt.transpose()).transpose();
  const Vec3 innovation = z - track.position;

  Eigen::Matrix<double, 3, 6> H = Eigen::Matrix<double, 3, 6>::Zero();
  H.leftCols<3>().setIdentity();
  const Mat6 IKH = Mat6::Identity() - K * H;

  TrackState out = track;
  const Vec6 x = track.mean() + K * innovation;
  out.position = x.head<3>();
  out.velocity = x.tail<3>();
  out.covariance =
      symmetrized(IKH * P * IKH.transpose() + K * R * K.transpose());
  return out;
}

SigmaPointSet associate_measurement(const SigmaPointSet& predicted,
                                    const SigmaPointSet& measured) {
  SigmaPointSet out = measured;
  for (std::size_t k = 0; k < 3; ++k) {
    const Vec3& pp = predicted.plus(k);
    const Vec3& pm = predicted.minus(k);
    const Vec3& mp = measured.plus(k);
    const Vec3& mm = measured.minus(k);
    const double keep = (mp - pp).squaredNorm() + (mm - pm).squaredNorm();
    const double swap = (mm - pp).squaredNorm() + (mp - pm).squaredNorm();
    if (swap < keep) std::swap(out.points[2 * k + 1], out.points[2 * k + 2]);
  }
  return out;
}

FilterBank::FilterBank(FilterConfig cfg, double start_stamp)
    : cfg_(std::move(cfg)) {
  cfg_.validate();
  Snapshot first;
  first.stamp = start_stamp;
  first.t_rel = RigidTransform::identity();
  history_.push_back(std::move(first));
}

FilterBank::BankState FilterBank::advance(const BankState& from, double dt,
                                          const RigidTransform& t_rel) const {
  BankState out = from;
  if (!from.tracks) return out;
  for (TrackState& t : *out.tracks) {
    t = predict(t, dt, cfg_);
    if (cfg_.ego_compensation) t = compensate_ego_motion(t, t_rel);
  }
  return out;
}

std::optional<SigmaPointSet> FilterBank::step(double dt,
                                              const RigidTransform& t_rel) {
  if (!(dt >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "negative dt in step");
  }
  Snapshot next;
  next.stamp = history_.back().stamp + dt;
  next.dt = dt;
  next.t_rel = t_rel;
  next.prior = advance(history_.back().posterior, dt, t_rel);
  next.posterior = next.prior;
  history_.push_back(std::move(next));
  while (history_.size() > cfg_.history_depth) history_.pop_front();
  return estimate();
}

std::optional<SigmaPointSet> FilterBank::estimate() const {
  if (!initialized()) return std::nullopt;
  SigmaPointSet out;
  const Tracks& t = tracks();
  for (std::size_t j = 0; j < kSigmaCount; ++j) out.points[j] = t[j].position;
  return out;
}

std::vector<double> FilterBank::history_stamps() const {
  std::vector<double> stamps;
  stamps.reserve(history_.size());
  for (const Snapshot& s : history_) stamps.push_back(s.stamp);
  return stamps;
}

IngestStatus FilterBank::apply(BankState& state, double stamp,
                               const PendingMeasurement& m) const {
  if (!state.tracks) {
    Tracks fresh;
    for (std::size_t j = 0; j < kSigmaCount; ++j) {
      fresh[j] = init_track(m.points.points[j], cfg_, stamp);
    }
    state.tracks = fresh;
    state.last_update = stamp;
    return IngestStatus::kInitialized;
  }

  Tracks& tracks = *state.tracks;
  SigmaPointSet predicted;
  for (std::size_t j = 0; j < kSigmaCount; ++j) {
    predicted.points[j] = tracks[j].position;
  }
  const SigmaPointSet z = associate_measurement(predicted, m.points);
  const bool reacquiring = stamp - state.last_update > cfg_.reacquire_window;

  IngestStatus status = IngestStatus::kApplied;
  for (std::size_t j = 0; j < kSigmaCount; ++j) {
    TrackState& t = tracks[j];
    // Noise is scaled by the track's own predicted depth, floored at the
    // camera's near plane for tracks that drifted behind the camera.
    const Mat3 R = measurement_covariance(
        m.cam, std::max(t.position.z(), m.cam.near_z), cfg_);
    if (reacquiring) {
      const Vec3 innovation = z.points[j] - t.position;
      const Vec3 s = (t.covariance.topLeftCorner<3, 3>() + R).diagonal();
      const bool outside =
          (innovation.array().abs() >
           cfg_.reacquire_gate_sigma * s.array().sqrt())
              .any();
      if (outside) {
        t = init_track(z.points[j], cfg_, t.stamp);
        status = IngestStatus::kReinitialized;
        continue;
      }
    }
    t = update(t, z.points[j], R, cfg_);
  }
  state.last_update = stamp;
  return status;
}

IngestStatus FilterBank::rebuild_from(std::size_t index, std::size_t fresh) {
  Snapshot& at = history_[index];
  at.posterior = at.prior;
  IngestStatus result = IngestStatus::kApplied;
  for (std::size_t i = 0; i < at.measurements.size(); ++i) {
    const IngestStatus s = apply(at.posterior, at.stamp, at.measurements[i]);
    if (i == fresh) result = s;
  }
  for (std::size_t k = index + 1; k < history_.size(); ++k) {
    Snapshot& s = history_[k];
    s.prior = advance(history_[k - 1].posterior, s.dt, s.t_rel);
    s.posterior = s.prior;
    for (const PendingMeasurement& m : s.measurements) {
      apply(s.posterior, s.stamp, m);
    }
  }
  return result;
}

IngestStatus FilterBank::ingest(const SigmaPointSet& measured,
                                double meas_stamp, const CameraModel& cam) {
  if (meas_stamp > stamp() + kStampTolerance) {
    throw Error(ErrorCode::kInvalidArgument,
                "measurement stamped in the future of the filter");
  }
  if (meas_stamp < horizon_start() - kStampTolerance) {
    return IngestStatus::kStale;
  }

  std::size_t index = history_.size() - 1;
  if (cfg_.replay_late_measurements) {
    while (index > 0 && history_[index].stamp > meas_stamp + kStampTolerance) {
      --index;
    }
  }
  Snapshot& target = history_[index];
  PendingMeasurement m{measured, meas_stamp, cam};
  if (!cfg_.replay_late_measurements) {
    // In-place: update the current state directly, no rollback.
    target.measurements.push_back(std::move(m));
    return apply(target.posterior, target.stamp, target.measurements.back());
  }
  const auto pos = std::upper_bound(
      target.measurements.begin(), target.measurements.end(), meas_stamp,
      [](double s, const PendingMeasurement& pm) { return s < pm.stamp; });
  const auto fresh =
      static_cast<std::size_t>(pos - target.measurements.begin());
  target.measurements.insert(pos, std::move(m));
  return rebuild_from(index, fresh);
}

}  // namespace sigmatrack
