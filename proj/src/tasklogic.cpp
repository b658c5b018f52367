#include "sigmatrack/tasklogic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sigmatrack/error.hpp"

namespace sigmatrack {

double wrap_angle(double angle) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double a = std::fmod(angle, kTwoPi);
  if (a <= -std::numbers::pi) a += kTwoPi;
  if (a > std::numbers::pi) a -= kTwoPi;
  return a;
}

const char* to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::kLongAxis: return "long_axis";
    case TaskKind::kShortAxis: return "short_axis";
    case TaskKind::kRelease: return "release";
  }
  return "unknown";
}

TaskKind task_kind_from_string(const std::string& name) {
  if (name == "long_axis") return TaskKind::kLongAxis;
  if (name == "short_axis") return TaskKind::kShortAxis;
  if (name == "release") return TaskKind::kRelease;
  throw Error(ErrorCode::kInvalidArgument, "unknown task kind '" + name + "'");
}

void TaskGeometry::validate() const {
  if ((w_pos.array() < 0.0).any() || (w_rot.array() < 0.0).any()) {
    throw Error(ErrorCode::kInvalidArgument,
                "alignment weights must be non-negative");
  }
}

void CriteriaConfig::validate() const {
  if (!(eps_x < delta_x && eps_y < delta_y && eps_yaw < delta_yaw &&
        eps_pitch < delta_pitch)) {
    throw Error(ErrorCode::kInvalidArgument,
                "every success bound must be below its failure bound");
  }
}

void RewardConfig::validate() const {
  if (!(sigma_track > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "sigma_track must be positive");
  }
  if (!(clip_velocity >= 0.0) || !(clip_pitch >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "action clips must be >= 0");
  }
}

std::array<double, ProprioState::kSize> ProprioState::flatten() const {
  return {gravity.x(),     gravity.y(),     gravity.z(),
          lin_vel.x(),     lin_vel.y(),     lin_vel.z(),
          ang_vel.x(),     ang_vel.y(),     ang_vel.z(),
          prev_action(0),  prev_action(1),  prev_action(2),
          prev_action(3),  static_cast<double>(task_flag)};
}

namespace {

Vec3 wrapped_angle_delta(const Vec3& a, const Vec3& b) {
  return Vec3(wrap_angle(a.x() - b.x()), wrap_angle(a.y() - b.y()),
              wrap_angle(a.z() - b.z()));
}

}  // namespace

AlignmentErrors alignment_errors(const Pose& pose, const TaskGeometry& geom) {
  const Vec3 dp = pose.position - geom.p_opt;
  const Vec3 dr = wrapped_angle_delta(pose.rpy, geom.theta_opt);
  return {std::sqrt(dp.dot(geom.w_pos.cwiseProduct(dp))),
          std::sqrt(dr.dot(geom.w_rot.cwiseProduct(dr)))};
}

double cross_track_error(const Vec3& p_e, const Vec3& p_hint,
                         const Vec3& p_opt) {
  const Vec3 seg = p_opt - p_hint;
  const double len2 = seg.squaredNorm();
  if (len2 == 0.0) return (p_e - p_hint).norm();
  const double t = std::clamp((p_e - p_hint).dot(seg) / len2, 0.0, 1.0);
  return (p_e - (p_hint + t * seg)).norm();
}

const char* to_string(TerminalStatus status) {
  switch (status) {
    case TerminalStatus::kSuccess: return "success";
    case TerminalStatus::kFailure: return "failure";
    case TerminalStatus::kRunning: return "running";
  }
  return "unknown";
}

TerminalStatus terminal_status(const Pose& pose, const TaskGeometry& geom,
                               const CriteriaConfig& crit, bool timed_out) {
  const Vec3 dp = (pose.position - geom.p_opt).cwiseAbs();
  const Vec3 dr = wrapped_angle_delta(pose.rpy, geom.theta_opt).cwiseAbs();
  const double d_pitch = dr.y();
  const double d_yaw = dr.z();

  if (dp.x() < crit.eps_x && dp.y() < crit.eps_y && d_yaw < crit.eps_yaw &&
      d_pitch < crit.eps_pitch) {
    return TerminalStatus::kSuccess;
  }
  if (timed_out && (dp.x() >= crit.delta_x || dp.y() >= crit.delta_y ||
                    d_yaw >= crit.delta_yaw || d_pitch >= crit.delta_pitch)) {
    return TerminalStatus::kFailure;
  }
  return TerminalStatus::kRunning;
}

ClippedAction clip_action(const Action& raw, const RewardConfig& rcfg) {
  ClippedAction out;
  for (int i = 0; i < 3; ++i) {
    out.action(i) = std::clamp(raw(i), -rcfg.clip_velocity, rcfg.clip_velocity);
  }
  out.action(3) = std::clamp(raw(3), -rcfg.clip_pitch, rcfg.clip_pitch);
  out.limit_penalty = (out.action - raw).squaredNorm();
  return out;
}

double shaping(double x, double sigma_track) {
  return std::exp(-(x * x) / sigma_track);
}

RewardBreakdown compute_reward(const Pose& pose, const TaskGeometry& geom,
                               const CriteriaConfig& crit,
                               const ProprioState& proprio,
                               const ClippedAction& action,
                               const Action& prev_action, bool out_fov,
                               const RewardConfig& rcfg) {
  const AlignmentErrors err = alignment_errors(pose, geom);
  const double d_path = cross_track_error(pose.position, geom.p_hint, geom.p_opt);
  const double s = rcfg.sigma_track;

  const double e_pos = shaping(err.e_pos, s);
  const double e_rot = shaping(err.e_rot, s);

  const double v_base =
      rcfg.base_velocity == BaseVelocityTerm::kPlanarTwist
          ? Vec3(proprio.lin_vel.x(), proprio.lin_vel.y(), proprio.ang_vel.z())
                .norm()
          : proprio.lin_vel.norm();
  const bool success = terminal_status(pose, geom, crit, false) ==
                       TerminalStatus::kSuccess;

  RewardBreakdown r;
  r.terms[0] = shaping(d_path, s) * e_rot * (1.0 + rcfg.k * e_pos);
  r.terms[1] = success ? e_pos * e_rot * shaping(v_base, s) : 0.0;
  r.terms[2] = out_fov ? 1.0 : 0.0;
  r.terms[3] = proprio.gravity.y() * proprio.gravity.y();
  r.terms[4] = proprio.ang_vel.head<2>().squaredNorm();
  r.terms[5] = (action.action - prev_action).squaredNorm();
  r.terms[6] = action.limit_penalty;

  const std::array<double, RewardBreakdown::kTerms> weights{
      rcfg.w_hint, rcfg.w_opt,    rcfg.w_miss, rcfg.w_roll,
      rcfg.w_ang,  rcfg.w_smooth, rcfg.w_limit};
  for (std::size_t i = 0; i < RewardBreakdown::kTerms; ++i) {
    r.weighted[i] = weights[i] * r.terms[i];
    r.total += r.weighted[i];
  }
  return r;
}

void AscConfig::validate() const {
  const double probs[] = {near_start, near_end, replay_start, replay_end};
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "curriculum probabilities must lie in [0, 1]");
    }
  }
  if (!(s_thresh > 0.0) || !(lambda >= 0.0) || window == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "curriculum needs s_thresh > 0, lambda >= 0, window > 0");
  }
}

double asc_probability(double rho, InitType type, const AscConfig& cfg) {
  if (!(rho >= 0.0 && rho <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "competency rho must lie in [0, 1]");
  }
  const double start =
      type == InitType::kNearOptimal ? cfg.near_start : cfg.replay_start;
  const double end =
      type == InitType::kNearOptimal ? cfg.near_end : cfg.replay_end;
  // Convex-combination form of end + (start - end) e so that rho = 0 returns
  // `start` bit-exactly.
  const double e = std::exp(-cfg.lambda * rho);
  return start * e + end * (1.0 - e);
}

AscState asc_update(const AscState& state, EpisodeOutcome outcome,
                    const ReplayEntry& episode, const AscConfig& cfg) {
  AscState out = state;
  out.outcomes.push_back(outcome == EpisodeOutcome::kSuccess);
  while (out.outcomes.size() > cfg.window) out.outcomes.pop_front();
  if (outcome == EpisodeOutcome::kFailure) {
    out.failures.push_back(episode);
    while (out.failures.size() > cfg.replay_capacity) out.failures.pop_front();
  }
  const auto wins = std::count(out.outcomes.begin(), out.outcomes.end(), true);
  out.success_rate = out.outcomes.empty()
                         ? 0.0
                         : static_cast<double>(wins) /
                               static_cast<double>(out.outcomes.size());
  out.rho = std::min(out.success_rate / cfg.s_thresh, 1.0);
  return out;
}

InitProbabilities init_probabilities(double rho, const AscConfig& cfg) {
  InitProbabilities p;
  p.near_optimal = asc_probability(rho, InitType::kNearOptimal, cfg);
  p.failure_replay = asc_probability(rho, InitType::kFailureReplay, cfg);
  p.uniform = std::max(0.0, 1.0 - p.near_optimal - p.failure_replay);
  return p;
}

InitDraw sample_init(const AscState& state, const AscConfig& cfg, Rng& rng) {
  const InitProbabilities p = init_probabilities(state.rho, cfg);
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  if (u < p.near_optimal) return NearOptimalInit{};
  if (u < p.near_optimal + p.failure_replay) {
    if (state.failures.empty()) return UniformInit{};
    std::uniform_int_distribution<std::size_t> pick(0, state.failures.size() - 1);
    return FailureReplayInit{state.failures[pick(rng)]};
  }
  return UniformInit{};
}

AscScheduler::AscScheduler(AscConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
}

AscState& AscScheduler::slot(TaskKind task) {
  return states_[cfg_.per_task ? task : TaskKind::kShortAxis];
}

const AscState& AscScheduler::state(TaskKind task) const {
  static const AscState kEmpty;
  const auto it = states_.find(cfg_.per_task ? task : TaskKind::kShortAxis);
  return it == states_.end() ? kEmpty : it->second;
}

void AscScheduler::record(TaskKind task, EpisodeOutcome outcome,
                          const ReplayEntry& episode) {
  AscState& s = slot(task);
  s = asc_update(s, outcome, episode, cfg_);
}

InitDraw AscScheduler::sample(TaskKind task, Rng& rng) const {
  return sample_init(state(task), cfg_, rng);
}

void ObservationBuffer::reset() {
  short_.clear();
  long_.clear();
  ticks_ = 0;
}

void ObservationBuffer::push(double stamp, const SigmaPointSet& points) {
  short_.push_back({stamp, points});
  if (short_.size() > kShort) short_.pop_front();
  if (ticks_ % kLongStride == 0) {
    long_.push_back({stamp, points});
    if (long_.size() > kLong) long_.pop_front();
  }
  ++ticks_;
}

namespace {

void write_block(const std::deque<ObservationBuffer::Frame>& ring,
                 std::size_t slots, double* out) {
  const std::size_t pad = slots - ring.size();
  std::fill(out, out + pad * Observation::kFrameSize, 0.0);
  double* cursor = out + pad * Observation::kFrameSize;
  for (const auto& frame : ring) {
    const auto flat = frame.points.flatten();
    cursor = std::copy(flat.begin(), flat.end(), cursor);
  }
}

}  // namespace

Observation assemble_observation(const ObservationBuffer& buf,
                                 const ProprioState& proprio) {
  Observation obs;
  const auto p = proprio.flatten();
  std::copy(p.begin(), p.end(), obs.values.begin());
  write_block(buf.short_ring(), ObservationBuffer::kShort,
              obs.values.data() + Observation::kShortOffset);
  write_block(buf.long_ring(), ObservationBuffer::kLong,
              obs.values.data() + Observation::kLongOffset);
  return obs;
}

}  // namespace sigmatrack
