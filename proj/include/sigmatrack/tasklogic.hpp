#pragma once

// Task geometry and training-support math: alignment and cross-track errors,
// terminal criteria, reward terms, action clipping, the active sampling
// curriculum and the dual-horizon observation layout.

#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "sigmatrack/geometry.hpp"
#include "sigmatrack/types.hpp"

namespace sigmatrack {

using Rng = std::mt19937_64;

/// Wraps to (-pi, pi].
double wrap_angle(double angle);

enum class TaskKind { kLongAxis, kShortAxis, kRelease };

const char* to_string(TaskKind kind);
TaskKind task_kind_from_string(const std::string& name);

/// End-effector pose: position [m] and roll/pitch/yaw [rad].
struct Pose {
  Vec3 position = Vec3::Zero();
  Vec3 rpy = Vec3::Zero();
};

struct TaskGeometry {
  Vec3 p_opt = Vec3::Zero();
  Vec3 theta_opt = Vec3::Zero();  // roll, pitch, yaw
  Vec3 p_hint = Vec3::Zero();
  Vec3 w_pos = Vec3::Ones();  // diagonal of W_p
  Vec3 w_rot = Vec3::Ones();  // diagonal of W_r
  TaskKind kind = TaskKind::kShortAxis;

  void validate() const;
};

struct CriteriaConfig {
  double eps_x = 0.05;
  double eps_y = 0.03;
  double eps_yaw = 0.10;
  double eps_pitch = 0.15;
  double delta_x = 0.10;
  double delta_y = 0.10;
  double delta_yaw = 0.20;
  double delta_pitch = 0.20;

  /// Throws unless every eps is strictly below its delta.
  void validate() const;
};

/// Which base twist components enter E(v_base) in the terminal reward.
enum class BaseVelocityTerm {
  kPlanarTwist,  // (v_x, v_y, omega_z)
  kLinear3d,     // (v_x, v_y, v_z)
};

struct RewardConfig {
  double sigma_track = 0.04;
  double k = 1.0;
  double w_hint = 0.4;
  double w_opt = 20.0;
  double w_miss = -0.1;
  double w_roll = -2.0;
  double w_ang = -0.1;
  double w_smooth = -0.01;
  double w_limit = -0.1;
  double clip_velocity = 0.5;        // |v_x|, |v_y|, |omega_z|
  double clip_pitch = 0.52359877559829882566;  // pi / 6
  BaseVelocityTerm base_velocity = BaseVelocityTerm::kPlanarTwist;

  void validate() const;
};

/// Action layout: (v_x, v_y, omega_z, pitch).
using Action = Vec4;

struct ProprioState {
  Vec3 gravity = Vec3(0.0, 0.0, -1.0);  // projected into the base frame
  Vec3 lin_vel = Vec3::Zero();
  Vec3 ang_vel = Vec3::Zero();
  Action prev_action = Action::Zero();
  int task_flag = 0;

  static constexpr std::size_t kSize = 14;
  std::array<double, kSize> flatten() const;
};

struct AlignmentErrors {
  double e_pos = 0.0;
  double e_rot = 0.0;
};

AlignmentErrors alignment_errors(const Pose& pose, const TaskGeometry& geom);

/// Distance from p_e to the segment [p_hint, p_opt].
double cross_track_error(const Vec3& p_e, const Vec3& p_hint, const Vec3& p_opt);

enum class TerminalStatus { kSuccess, kFailure, kRunning };

const char* to_string(TerminalStatus status);

/// Success is checked first and may fire on any step; Failure needs
/// `timed_out` and at least one error at or beyond its delta bound.
TerminalStatus terminal_status(const Pose& pose, const TaskGeometry& geom,
                               const CriteriaConfig& crit, bool timed_out);

struct ClippedAction {
  Action action = Action::Zero();
  /// |a_clip - a|^2
  double limit_penalty = 0.0;
};

ClippedAction clip_action(const Action& raw, const RewardConfig& rcfg);

struct RewardBreakdown {
  static constexpr std::size_t kTerms = 7;
  static constexpr std::array<const char*, kTerms> kNames{
      "hint", "opt", "miss", "roll", "ang", "smooth", "limit"};

  /// Unweighted term values in kNames order.
  std::array<double, kTerms> terms{};
  /// weight_i * terms[i].
  std::array<double, kTerms> weighted{};
  double total = 0.0;
};

/// E(x) = exp(-x^2 / sigma_track) on a scalar.
double shaping(double x, double sigma_track);

RewardBreakdown compute_reward(const Pose& pose, const TaskGeometry& geom,
                               const CriteriaConfig& crit,
                               const ProprioState& proprio,
                               const ClippedAction& action,
                               const Action& prev_action, bool out_fov,
                               const RewardConfig& rcfg);

// ---- Active sampling curriculum -------------------------------------------

enum class InitType { kNearOptimal, kFailureReplay };

enum class EpisodeOutcome { kSuccess, kFailure, kRunningAtTimeout };

struct AscConfig {
  double s_thresh = 0.15;
  double lambda = 5.0;
  double near_start = 0.8;
  double near_end = 0.1;
  double replay_start = 0.2;
  double replay_end = 0.5;
  std::size_t window = 100;
  std::size_t replay_capacity = 1024;
  bool per_task = false;

  void validate() const;
};

/// P_i(rho) = end + (start - end) exp(-lambda rho). Throws for rho outside
/// [0, 1].
double asc_probability(double rho, InitType type, const AscConfig& cfg);

/// What is needed to respawn a failed episode.
struct ReplayEntry {
  std::uint64_t seed = 0;
  Pose pose;
};

struct AscState {
  std::deque<bool> outcomes;
  std::deque<ReplayEntry> failures;
  double success_rate = 0.0;
  double rho = 0.0;
};

/// Pushes the outcome into the sliding window and recomputes s and rho.
/// Failures (not timeouts inside the band) enter the replay FIFO.
AscState asc_update(const AscState& state, EpisodeOutcome outcome,
                    const ReplayEntry& episode, const AscConfig& cfg);

struct NearOptimalInit {};
struct UniformInit {};
struct FailureReplayInit {
  ReplayEntry entry;
};
using InitDraw = std::variant<NearOptimalInit, FailureReplayInit, UniformInit>;

struct InitProbabilities {
  double near_optimal = 0.0;
  double failure_replay = 0.0;
  double uniform = 0.0;
};

InitProbabilities init_probabilities(double rho, const AscConfig& cfg);

/// Draws the initialization type; FailureReplay with an empty buffer falls
/// back to Uniform. The replayed entry is picked uniformly from the buffer.
InitDraw sample_init(const AscState& state, const AscConfig& cfg, Rng& rng);

/// Global or per-task curriculum state, selected by AscConfig::per_task.
class AscScheduler {
 public:
  explicit AscScheduler(AscConfig cfg = {});

  void record(TaskKind task, EpisodeOutcome outcome, const ReplayEntry& episode);
  InitDraw sample(TaskKind task, Rng& rng) const;
  const AscState& state(TaskKind task) const;
  const AscConfig& config() const { return cfg_; }

 private:
  AscState& slot(TaskKind task);

  AscConfig cfg_;
  std::map<TaskKind, AscState> states_;
};

// ---- Observation assembly ---------------------------------------------------

/// Short ring: the last `kShort` control ticks. Long ring: one frame every
/// `kLongStride` ticks, last `kLong` of them.
class ObservationBuffer {
 public:
  static constexpr std::size_t kShort = 5;
  static constexpr std::size_t kLong = 10;
  static constexpr std::size_t kLongStride = 10;

  struct Frame {
    double stamp = 0.0;
    SigmaPointSet points;
  };

  void reset();
  /// Call once per control tick.
  void push(double stamp, const SigmaPointSet& points);

  const std::deque<Frame>& short_ring() const { return short_; }
  const std::deque<Frame>& long_ring() const { return long_; }
  std::size_t ticks() const { return ticks_; }

 private:
  std::deque<Frame> short_;
  std::deque<Frame> long_;
  std::size_t ticks_ = 0;
};

/// Flat layout: [proprio (14) | short block (5 x 21) | long block (10 x 21)].
/// Frames run oldest to newest; missing frames are zeros at the oldest slots.
struct Observation {
  static constexpr std::size_t kFrameSize = 3 * kSigmaCount;
  static constexpr std::size_t kShortOffset = ProprioState::kSize;
  static constexpr std::size_t kLongOffset =
      kShortOffset + ObservationBuffer::kShort * kFrameSize;
  static constexpr std::size_t kSize =
      kLongOffset + ObservationBuffer::kLong * kFrameSize;

  std::array<double, kSize> values{};
};

Observation assemble_observation(const ObservationBuffer& buf,
                                 const ProprioState& proprio);

}  // namespace sigmatrack
