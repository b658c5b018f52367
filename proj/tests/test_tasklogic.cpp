#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "sigmatrack/error.hpp"
#include "sigmatrack/tasklogic.hpp"

using namespace sigmatrack;

namespace {

constexpr double kPi = std::numbers::pi;

TaskGeometry default_geometry() {
  TaskGeometry g;
  g.p_opt = Vec3(0.5, 0.0, 0.3);
  g.theta_opt = Vec3(0.0, 0.4, 0.0);
  g.p_hint = Vec3(0.5, 0.0, 0.6);
  return g;
}

Pose at_optimum(const TaskGeometry& g) { return Pose{g.p_opt, g.theta_opt}; }

SigmaPointSet constant_set(double v) {
  SigmaPointSet s;
  for (std::size_t j = 0; j < kSigmaCount; ++j) s.points[j] = Vec3(v + j, v - j, v);
  return s;
}

}  // namespace

TEST_CASE("wrap_angle") {
  CHECK(wrap_angle(kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(-kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(3 * kPi / 2) == doctest::Approx(-kPi / 2));
  CHECK(wrap_angle(0.3 + 6 * kPi) == doctest::Approx(0.3));
}

TEST_CASE("alignment_errors") {
  TaskGeometry g;
  CHECK(alignment_errors(Pose{}, g).e_pos == 0.0);
  CHECK(alignment_errors(Pose{}, g).e_rot == 0.0);
  const auto a = alignment_errors(Pose{Vec3(0.3, 0.4, 0.0), Vec3::Zero()}, g);
  CHECK(a.e_pos == doctest::Approx(0.5));
  g.theta_opt = Vec3(0, 0, -3.1);
  const auto b = alignment_errors(Pose{Vec3::Zero(), Vec3(0, 0, 3.1)}, g);
  CHECK(b.e_rot == doctest::Approx(2 * kPi - 6.2).epsilon(1e-12));
  // Weights enter as a diagonal quadratic form.
  g = TaskGeometry{};
  g.w_pos = Vec3(4, 0, 1);
  const auto c = alignment_errors(Pose{Vec3(1, 5, 1), Vec3::Zero()}, g);
  CHECK(c.e_pos == doctest::Approx(std::sqrt(5.0)));
}

TEST_CASE("alignment_errors ignore whole turns") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  for (int trial = 0; trial < 200; ++trial) {
    TaskGeometry g;
    g.theta_opt = Vec3(u(rng), u(rng), u(rng));
    for (int k = -3; k <= 3; ++k) {
      const Pose p{Vec3::Zero(), g.theta_opt + Vec3::Constant(2 * kPi * k)};
      CHECK(alignment_errors(p, g).e_rot < 1e-9);
    }
  }
}

TEST_CASE("cross_track_error") {
  const Vec3 h(0, 0, 0);
  const Vec3 o(1, 0, 0);
  CHECK(cross_track_error(Vec3(0.25, 0, 0), h, o) == 0.0);
  CHECK(cross_track_error(Vec3(0.5, 0.3, 0), h, o) == doctest::Approx(0.3));
  CHECK(cross_track_error(Vec3(2, 0.4, 0), h, o) == doctest::Approx(std::sqrt(1.16)));
  CHECK(cross_track_error(Vec3(-1, 0, 0), h, o) == doctest::Approx(1.0));
  CHECK(cross_track_error(Vec3(0, 3, 4), o, o) == doctest::Approx(std::sqrt(1.0 + 9 + 16)));
}

TEST_CASE("terminal_status") {
  const TaskGeometry g = default_geometry();
  const CriteriaConfig c;
  CHECK(terminal_status(at_optimum(g), g, c, false) == TerminalStatus::kSuccess);
  CHECK(terminal_status(at_optimum(g), g, c, true) == TerminalStatus::kSuccess);
  Pose p = at_optimum(g);
  p.position.x() += 0.12;
  CHECK(terminal_status(p, g, c, true) == TerminalStatus::kFailure);
  CHECK(terminal_status(p, g, c, false) == TerminalStatus::kRunning);
  p = at_optimum(g);
  p.position.x() += 0.06;
  CHECK(terminal_status(p, g, c, true) == TerminalStatus::kRunning);
  // Bounds are strict for success and inclusive for failure.
  p = at_optimum(g);
  p.rpy.z() += 0.20;
  CHECK(terminal_status(p, g, c, true) == TerminalStatus::kFailure);
  // Z and roll do not enter the criteria.
  p = at_optimum(g);
  p.position.z() += 1.0;
  p.rpy.x() += 1.0;
  CHECK(terminal_status(p, g, c, true) == TerminalStatus::kSuccess);
}

TEST_CASE("success and failure never coincide") {
  const TaskGeometry g = default_geometry();
  const CriteriaConfig c;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (int i = 0; i < 5000; ++i) {
    const Pose p{g.p_opt + Vec3(u(rng), u(rng), u(rng)), g.theta_opt + Vec3(u(rng), u(rng), u(rng))};
    const auto s = terminal_status(p, g, c, true);
    const auto f = terminal_status(p, g, c, false);
    if (s == TerminalStatus::kFailure) CHECK(f == TerminalStatus::kRunning);
    if (f == TerminalStatus::kSuccess) CHECK(s == TerminalStatus::kSuccess);
  }
  CriteriaConfig bad;
  bad.eps_x = 0.2;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("clip_action") {
  const RewardConfig r;
  const Action inside(0.1, -0.2, 0.3, 0.1);
  const auto a = clip_action(inside, r);
  CHECK(a.action == inside);
  CHECK(a.limit_penalty == 0.0);
  const auto b = clip_action(Action(0.7, 0, 0, 0), r);
  CHECK(b.action(0) == 0.5);
  CHECK(b.limit_penalty == doctest::Approx(0.04));
  const auto c = clip_action(Action(0, 0, 0, -1.0), r);
  CHECK(c.action(3) == doctest::Approx(-kPi / 6));
  CHECK(c.limit_penalty == doctest::Approx(0.2270).epsilon(1e-3));
}

TEST_CASE("compute_reward examples") {
  const TaskGeometry g = default_geometry();
  const CriteriaConfig c;
  const RewardConfig r;
  ProprioState level;
  const ClippedAction still = clip_action(Action::Zero(), r);

  const auto at = compute_reward(at_optimum(g), g, c, level, still, Action::Zero(), false, r);
  CHECK(at.terms[0] == doctest::Approx(2.0));
  CHECK(at.weighted[0] == doctest::Approx(0.8));
  CHECK(at.terms[1] == doctest::Approx(1.0));
  CHECK(at.weighted[1] == doctest::Approx(20.0));
  for (std::size_t k = 2; k < RewardBreakdown::kTerms; ++k) CHECK(at.weighted[k] == 0.0);
  CHECK(at.total == doctest::Approx(20.8));

  const auto miss = compute_reward(at_optimum(g), g, c, level, still, Action::Zero(), true, r);
  CHECK(miss.weighted[2] == doctest::Approx(-0.1));
  CHECK(miss.total - at.total == doctest::Approx(-0.1));

  ProprioState tilted;
  tilted.gravity = Vec3(0.0, 0.6, -0.8);
  tilted.ang_vel = Vec3(0.3, 0.4, 1.0);
  const auto t = compute_reward(at_optimum(g), g, c, tilted, still, Action::Zero(), false, r);
  CHECK(t.terms[3] == doctest::Approx(0.36));
  CHECK(t.terms[4] == doctest::Approx(0.25));
  // Yaw rate damps the optimality gate through the base twist.
  CHECK(t.terms[1] == doctest::Approx(std::exp(-1.0 / 0.04)));

  const ClippedAction jump = clip_action(Action(0.7, 0, 0, 0), r);
  const auto j = compute_reward(at_optimum(g), g, c, level, jump, Action::Zero(), false, r);
  CHECK(j.terms[5] == doctest::Approx(0.25));
  CHECK(j.terms[6] == doctest::Approx(0.04));

  // Away from the optimum the gate closes and the hint term shrinks.
  Pose off = at_optimum(g);
  off.position.x() += 0.2;
  const auto o = compute_reward(off, g, c, level, still, Action::Zero(), false, r);
  CHECK(o.terms[1] == 0.0);
  CHECK(o.terms[0] > 0.0);
  CHECK(o.terms[0] < 2.0);
}

TEST_CASE("reward terms stay in range") {
  const TaskGeometry g = default_geometry();
  const CriteriaConfig c;
  const RewardConfig r;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const Pose p{g.p_opt + 0.3 * Vec3(u(rng), u(rng), u(rng)), g.theta_opt + Vec3(u(rng), u(rng), u(rng))};
    ProprioState pr;
    pr.gravity = Vec3(u(rng), u(rng), -1.0).normalized();
    pr.lin_vel = Vec3(u(rng), u(rng), u(rng));
    pr.ang_vel = Vec3(u(rng), u(rng), u(rng));
    const auto b = compute_reward(p, g, c, pr, clip_action(Action(u(rng), u(rng), u(rng), u(rng)), r),
                                  Action::Zero(), false, r);
    CHECK(b.terms[0] > 0.0);
    CHECK(b.terms[0] <= 2.0);
    CHECK(b.terms[1] >= 0.0);
    CHECK(b.terms[1] <= 1.0);
    CHECK(b.weighted[1] <= 20.0);
  }
}

TEST_CASE("curriculum probabilities") {
  const AscConfig a;
  CHECK(asc_probability(0.0, InitType::kNearOptimal, a) == 0.8);
  CHECK(asc_probability(0.0, InitType::kFailureReplay, a) == 0.2);
  CHECK(asc_probability(1.0, InitType::kNearOptimal, a) ==
        doctest::Approx(0.1 + 0.7 * std::exp(-5.0)).epsilon(1e-14));
  CHECK(asc_probability(1.0, InitType::kFailureReplay, a) ==
        doctest::Approx(0.5 - 0.3 * std::exp(-5.0)).epsilon(1e-14));
  CHECK_THROWS_AS(asc_probability(-0.01, InitType::kNearOptimal, a), Error);
  CHECK_THROWS_AS(asc_probability(1.01, InitType::kNearOptimal, a), Error);

  const auto p0 = init_probabilities(0.0, a);
  CHECK(p0.uniform == 0.0);
  double prev_near = 2.0;
  double prev_fail = -1.0;
  for (int i = 0; i <= 1000; ++i) {
    const double rho = i / 1000.0;
    const auto p = init_probabilities(rho, a);
    CHECK(p.near_optimal < prev_near);
    CHECK(p.failure_replay > prev_fail);
    CHECK(p.near_optimal + p.failure_replay <= 1.0);
    CHECK(std::abs(p.near_optimal + p.failure_replay + p.uniform - 1.0) < 1e-15);
    prev_near = p.near_optimal;
    prev_fail = p.failure_replay;
  }
}

TEST_CASE("curriculum window and replay buffer") {
  const AscConfig a;
  AscState s;
  CHECK(s.rho == 0.0);
  for (int i = 0; i < 100; ++i) {
    s = asc_update(s, i < 15 ? EpisodeOutcome::kSuccess : EpisodeOutcome::kRunningAtTimeout,
                   ReplayEntry{static_cast<std::uint64_t>(i), {}}, a);
  }
  CHECK(s.success_rate == doctest::Approx(0.15));
  CHECK(s.rho == 1.0);
  CHECK(s.failures.empty());
  for (int i = 0; i < 100; ++i) s = asc_update(s, EpisodeOutcome::kSuccess, {}, a);
  CHECK(s.outcomes.size() == 100);
  CHECK(s.success_rate == 1.0);
  CHECK(s.rho == 1.0);

  AscConfig small = a;
  small.replay_capacity = 3;
  AscState f;
  for (std::uint64_t i = 0; i < 5; ++i) f = asc_update(f, EpisodeOutcome::kFailure, {i, {}}, small);
  CHECK(f.failures.size() == 3);
  CHECK(f.failures.front().seed == 2);
  CHECK(f.rho == 0.0);
}

TEST_CASE("sample_init matches the closed-form probabilities") {
  const AscConfig a;
  AscState s;
  s.rho = 1.0;
  s.failures.push_back({42, {}});
  Rng rng(4);
  const int n = 100000;
  int near = 0;
  int fail = 0;
  int uni = 0;
  for (int i = 0; i < n; ++i) {
    const InitDraw d = sample_init(s, a, rng);
    if (std::holds_alternative<NearOptimalInit>(d)) ++near;
    if (std::holds_alternative<FailureReplayInit>(d)) {
      ++fail;
      CHECK(std::get<FailureReplayInit>(d).entry.seed == 42);
    }
    if (std::holds_alternative<UniformInit>(d)) ++uni;
  }
  const auto p = init_probabilities(1.0, a);
  auto within = [&](int count, double prob) {
    const double se = std::sqrt(prob * (1 - prob) / n);
    return std::abs(static_cast<double>(count) / n - prob) <= 3 * se;
  };
  CHECK(within(near, p.near_optimal));
  CHECK(within(fail, p.failure_replay));
  CHECK(within(uni, p.uniform));

  // Empty buffer: the replay share falls back to uniform.
  AscState empty;
  empty.rho = 1.0;
  int replay = 0;
  for (int i = 0; i < 1000; ++i) replay += std::holds_alternative<FailureReplayInit>(sample_init(empty, a, rng));
  CHECK(replay == 0);
}

TEST_CASE("curriculum scheduler scopes") {
  AscConfig shared;
  AscScheduler global(shared);
  global.record(TaskKind::kLongAxis, EpisodeOutcome::kSuccess, {});
  CHECK(global.state(TaskKind::kRelease).outcomes.size() == 1);
  AscConfig per = shared;
  per.per_task = true;
  AscScheduler split(per);
  split.record(TaskKind::kLongAxis, EpisodeOutcome::kSuccess, {});
  CHECK(split.state(TaskKind::kLongAxis).outcomes.size() == 1);
  CHECK(split.state(TaskKind::kRelease).outcomes.empty());
}

TEST_CASE("observation layout") {
  CHECK(Observation::kSize == 14 + 5 * 21 + 10 * 21);
  ObservationBuffer buf;
  ProprioState pr;
  pr.task_flag = 2;
  buf.push(0.0, constant_set(1.0));
  const Observation one = assemble_observation(buf, pr);
  for (std::size_t i = 0; i < 4 * Observation::kFrameSize; ++i) {
    CHECK(one.values[Observation::kShortOffset + i] == 0.0);
  }
  const auto flat = constant_set(1.0).flatten();
  for (std::size_t i = 0; i < Observation::kFrameSize; ++i) {
    CHECK(one.values[Observation::kShortOffset + 4 * Observation::kFrameSize + i] == flat[i]);
  }
  const auto p = pr.flatten();
  for (std::size_t i = 0; i < ProprioState::kSize; ++i) CHECK(one.values[i] == p[i]);
}

TEST_CASE("observation rings") {
  ObservationBuffer buf;
  for (int i = 0; i < 150; ++i) buf.push(0.02 * i, constant_set(3.0));
  CHECK(buf.short_ring().size() == 5);
  CHECK(buf.long_ring().size() == 10);
  const double span = buf.long_ring().back().stamp - buf.long_ring().front().stamp;
  CHECK(span == doctest::Approx(1.8));
  for (std::size_t i = 1; i < buf.long_ring().size(); ++i) {
    CHECK(buf.long_ring()[i].stamp - buf.long_ring()[i - 1].stamp == doctest::Approx(0.2));
  }
  const Observation obs = assemble_observation(buf, ProprioState{});
  for (std::size_t r = 1; r < ObservationBuffer::kLong; ++r) {
    for (std::size_t i = 0; i < Observation::kFrameSize; ++i) {
      CHECK(obs.values[Observation::kLongOffset + r * Observation::kFrameSize + i] ==
            obs.values[Observation::kLongOffset + i]);
    }
  }
  buf.reset();
  CHECK(buf.ticks() == 0);
  CHECK(buf.short_ring().empty());
}
