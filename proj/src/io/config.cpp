#include "sigmatrack/config.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include "sigmatrack/error.hpp"

namespace sigmatrack {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& why) {
  throw Error(ErrorCode::kConfig, path + ": " + why);
}

// Reads keys from one JSON object and remembers which were consumed so that
// the leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  std::string key_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const json* find(const std::string& key) {
    used_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void require(const std::string& key) {
    if (j_.find(key) == j_.end()) fail(key_path(key), "required key missing");
  }

  void get(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) fail(key_path(key), "expected a number");
      out = v->get<double>();
    }
  }
  void get(const std::string& key, std::size_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned()) fail(key_path(key), "expected a non-negative integer");
      out = v->get<std::size_t>();
    }
  }
  void get(const std::string& key, std::uint64_t& out, int) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned()) fail(key_path(key), "expected a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void get(const std::string& key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) fail(key_path(key), "expected an integer");
      out = v->get<int>();
    }
  }
  void get(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) fail(key_path(key), "expected true or false");
      out = v->get<bool>();
    }
  }
  void get(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) fail(key_path(key), "expected a string");
      out = v->get<std::string>();
    }
  }
  void get(const std::string& key, Vec3& out) {
    if (const json* v = find(key)) {
      if (!v->is_array() || v->size() != 3) fail(key_path(key), "expected [x, y, z]");
      for (int i = 0; i < 3; ++i) {
        if (!(*v)[i].is_number()) fail(key_path(key), "expected [x, y, z]");
        out(i) = (*v)[i].get<double>();
      }
    }
  }
  void get(const std::string& key, Range& out) {
    if (const json* v = find(key)) {
      if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() ||
          !(*v)[1].is_number()) {
        fail(key_path(key), "expected [lo, hi]");
      }
      out.lo = (*v)[0].get<double>();
      out.hi = (*v)[1].get<double>();
    }
  }
  /// A number, or null for +infinity.
  void get_unbounded(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (v->is_null()) {
        out = std::numeric_limits<double>::infinity();
      } else if (v->is_number()) {
        out = v->get<double>();
      } else {
        fail(key_path(key), "expected a number or null");
      }
    }
  }
  void get_optional(const std::string& key, std::optional<double>& out) {
    if (const json* v = find(key)) {
      if (v->is_null()) {
        out.reset();
      } else if (v->is_number()) {
        out = v->get<double>();
      } else {
        fail(key_path(key), "expected a number or null");
      }
    }
  }

  template <typename Fn>
  void section(const std::string& key, Fn&& fn) {
    if (const json* v = find(key)) {
      Section s(*v, key_path(key));
      fn(s);
      s.finish();
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) fail(key_path(it.key()), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

CameraMotionKind motion_from_string(const std::string& s, const std::string& path) {
  if (s == "static") return CameraMotionKind::kStatic;
  if (s == "constant_velocity") return CameraMotionKind::kConstantVelocity;
  if (s == "walking") return CameraMotionKind::kWalking;
  if (s == "turning") return CameraMotionKind::kTurning;
  fail(path, "unknown camera motion '" + s + "'");
}

ShapeKind shape_from_string(const std::string& s, const std::string& path) {
  if (s == "sphere") return ShapeKind::kSphere;
  if (s == "box") return ShapeKind::kBox;
  if (s == "cylinder") return ShapeKind::kCylinder;
  fail(path, "unknown shape '" + s + "'");
}

const char* to_string(BaseVelocityTerm t) {
  return t == BaseVelocityTerm::kPlanarTwist ? "planar_twist" : "linear_3d";
}

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
json range(const Range& r) { return json::array({r.lo, r.hi}); }
json unbounded(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void parse_scenario(Section& s, ScenarioConfig& sc) {
  s.require("duration");
  s.get("seed", sc.seed, 0);
  s.get("duration", sc.duration);
  s.get("control_rate", sc.control_rate);
  s.get("obs_rate", sc.obs_rate);
  s.get("obs_latency", sc.obs_latency);
  s.section("camera", [&](Section& c) {
    c.get("fx", sc.camera.fx);
    c.get("fy", sc.camera.fy);
    c.get("cx", sc.camera.cx);
    c.get("cy", sc.camera.cy);
    c.get("width", sc.camera.width);
    c.get("height", sc.camera.height);
    c.get("near_z", sc.camera.near_z);
  });
  s.section("camera_motion", [&](Section& m) {
    std::string kind = to_string(sc.camera_motion.kind);
    m.get("kind", kind);
    sc.camera_motion.kind = motion_from_string(kind, m.key_path("kind"));
    m.get("velocity", sc.camera_motion.velocity);
    m.get("amplitude", sc.camera_motion.amplitude);
    m.get("frequency", sc.camera_motion.frequency);
    m.get("pitch_amplitude_deg", sc.camera_motion.pitch_amplitude_deg);
    m.get("forward_speed", sc.camera_motion.forward_speed);
    m.get("yaw_rate", sc.camera_motion.yaw_rate);
  });
  s.section("vo_noise", [&](Section& v) {
    v.get("translation_std", sc.vo_noise.translation_std);
    v.get("rotation_std", sc.vo_noise.rotation_std);
  });
  s.section("object", [&](Section& o) {
    std::string shape = to_string(sc.object.shape);
    o.get("shape", shape);
    sc.object.shape = shape_from_string(shape, o.key_path("shape"));
    o.get("radius", sc.object.radius);
    o.get("dims", sc.object.dims);
    o.get("height", sc.object.height);
    o.get("position", sc.object.position);
    o.get("rpy", sc.object.rpy);
    o.get("velocity", sc.object.velocity);
  });
  s.get("surface_samples", sc.surface_samples);
  s.section("sensor", [&](Section& n) {
    n.get("sigma_u", sc.sensor.sigma_u);
    n.get("sigma_v", sc.sensor.sigma_v);
    n.get("sigma_z", sc.sensor.sigma_z);
  });
  s.get("alpha", sc.alpha);
  s.section("physics", [&](Section& p) {
    p.get("friction", sc.physics.friction);
    p.get("restitution", sc.physics.restitution);
    p.get("added_mass", sc.physics.added_mass);
  });
  std::string mode = to_string(sc.mode);
  s.get("mode", mode);
  try {
    sc.mode = run_mode_from_string(mode);
  } catch (const Error&) {
    fail(s.key_path("mode"), "expected 'deploy' or 'training'");
  }
  s.get_optional("measurement_cutoff", sc.measurement_cutoff);
  s.get("score_after", sc.score_after);
}

void parse_randomization(Section& r, RandomizationConfig& rc) {
  r.get("alpha", rc.alpha);
  r.get("extrinsic_x", rc.extrinsic_x);
  r.get("extrinsic_y", rc.extrinsic_y);
  r.get("extrinsic_z", rc.extrinsic_z);
  r.get("extrinsic_roll_deg", rc.extrinsic_roll_deg);
  r.get("extrinsic_pitch_deg", rc.extrinsic_pitch_deg);
  r.get("extrinsic_yaw_deg", rc.extrinsic_yaw_deg);
  r.get("perception_delay_ms", rc.perception_delay_ms);
  r.get("friction", rc.friction);
  r.get("restitution", rc.restitution);
  r.get("added_mass_kg", rc.added_mass_kg);
  r.get("base_lin_vel_std", rc.base_lin_vel_std);
  r.get("base_ang_vel_std", rc.base_ang_vel_std);
  r.get("gravity_std", rc.gravity_std);
  r.get("sigma_scale_std", rc.sigma_scale_std);
  r.get("sigma_rotation_std", rc.sigma_rotation_std);
}

void parse_reward(Section& r, RunConfig& cfg) {
  RewardSetup& rs = cfg.reward;
  r.get("enabled", cfg.reward_enabled);
  r.get("sigma_track", rs.reward.sigma_track);
  r.get("k", rs.reward.k);
  r.section("weights", [&](Section& w) {
    w.get("hint", rs.reward.w_hint);
    w.get("opt", rs.reward.w_opt);
    w.get("miss", rs.reward.w_miss);
    w.get("roll", rs.reward.w_roll);
    w.get("ang", rs.reward.w_ang);
    w.get("smooth", rs.reward.w_smooth);
    w.get("limit", rs.reward.w_limit);
  });
  r.get("clip_velocity", rs.reward.clip_velocity);
  r.get("clip_pitch", rs.reward.clip_pitch);
  std::string base = to_string(rs.reward.base_velocity);
  r.get("base_velocity", base);
  if (base == "planar_twist") {
    rs.reward.base_velocity = BaseVelocityTerm::kPlanarTwist;
  } else if (base == "linear_3d") {
    rs.reward.base_velocity = BaseVelocityTerm::kLinear3d;
  } else {
    fail(r.key_path("base_velocity"), "expected 'planar_twist' or 'linear_3d'");
  }
  r.section("task", [&](Section& t) {
    t.get("p_opt", rs.geometry.p_opt);
    t.get("theta_opt", rs.geometry.theta_opt);
    t.get("p_hint", rs.geometry.p_hint);
    t.get("w_pos", rs.geometry.w_pos);
    t.get("w_rot", rs.geometry.w_rot);
    std::string kind = to_string(rs.geometry.kind);
    t.get("kind", kind);
    try {
      rs.geometry.kind = task_kind_from_string(kind);
    } catch (const Error&) {
      fail(t.key_path("kind"), "unknown task kind '" + kind + "'");
    }
  });
  r.section("criteria", [&](Section& c) {
    c.get("eps_x", rs.criteria.eps_x);
    c.get("eps_y", rs.criteria.eps_y);
    c.get("eps_yaw", rs.criteria.eps_yaw);
    c.get("eps_pitch", rs.criteria.eps_pitch);
    c.get("delta_x", rs.criteria.delta_x);
    c.get("delta_y", rs.criteria.delta_y);
    c.get("delta_yaw", rs.criteria.delta_yaw);
    c.get("delta_pitch", rs.criteria.delta_pitch);
  });
}

// Re-raises validation failures from the library types as config errors
// carrying the section name.
template <typename Fn>
void validated(const std::string& section, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfig) throw;
    fail(section, e.what());
  }
}

}  // namespace

RunMode run_mode_from_string(const std::string& name) {
  if (name == "deploy") return RunMode::kDeploy;
  if (name == "training") return RunMode::kTraining;
  throw Error(ErrorCode::kConfig, "unknown mode '" + name + "'");
}

std::optional<DriftState> RunConfig::effective_drift() const {
  const bool on = drift_enabled.value_or(scenario.mode == RunMode::kTraining);
  if (!on) return std::nullopt;
  return drift;
}

EpisodeOptions RunConfig::episode_options() const {
  EpisodeOptions opt;
  opt.filter = filter;
  opt.drift = effective_drift();
  if (reward_enabled) opt.reward = reward;
  return opt;
}

RunConfig parse_config(const json& j) {
  RunConfig cfg;
  Section root(j, "");
  if (j.find("scenario") == j.end()) fail("scenario.duration", "required key missing");
  root.section("scenario", [&](Section& s) { parse_scenario(s, cfg.scenario); });
  root.section("filter", [&](Section& f) {
    f.get("q_pos", cfg.filter.q_pos);
    f.get("q_vel", cfg.filter.q_vel);
    f.get("sigma_u", cfg.filter.sigma_u);
    f.get("sigma_v", cfg.filter.sigma_v);
    f.get("sigma_z", cfg.filter.sigma_z);
    f.get("p0_pos", cfg.filter.p0_pos);
    f.get("p0_vel", cfg.filter.p0_vel);
    f.get("history_depth", cfg.filter.history_depth);
    f.get("replay_late_measurements", cfg.filter.replay_late_measurements);
    f.get("ego_compensation", cfg.filter.ego_compensation);
    f.get("reacquire_window", cfg.filter.reacquire_window);
    f.get("reacquire_gate_sigma", cfg.filter.reacquire_gate_sigma);
  });
  root.section("drift", [&](Section& d) {
    if (const json* v = d.find("enabled")) {
      if (v->is_null()) {
        cfg.drift_enabled.reset();
      } else if (v->is_boolean()) {
        cfg.drift_enabled = v->get<bool>();
      } else {
        fail(d.key_path("enabled"), "expected true, false or null");
      }
    }
    d.get("sigma", cfg.drift.sigma_drift);
    d.get_unbounded("d_max", cfg.drift.d_max);
  });
  root.section("randomization",
               [&](Section& r) { parse_randomization(r, cfg.scenario.randomization); });
  root.section("reward", [&](Section& r) { parse_reward(r, cfg); });
  root.section("asc", [&](Section& a) {
    a.get("s_thresh", cfg.asc.s_thresh);
    a.get("lambda", cfg.asc.lambda);
    a.get("near_start", cfg.asc.near_start);
    a.get("near_end", cfg.asc.near_end);
    a.get("replay_start", cfg.asc.replay_start);
    a.get("replay_end", cfg.asc.replay_end);
    a.get("window", cfg.asc.window);
    a.get("replay_capacity", cfg.asc.replay_capacity);
    a.get("per_task", cfg.asc.per_task);
  });
  root.finish();

  validated("filter", [&] { cfg.filter.validate(); });
  validated("scenario", [&] { cfg.scenario.validate(cfg.filter.history_depth); });
  validated("drift", [&] {
    if (!(cfg.drift.sigma_drift >= 0.0) || !(cfg.drift.d_max > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "sigma must be >= 0 and d_max > 0");
    }
  });
  validated("reward", [&] {
    cfg.reward.reward.validate();
    cfg.reward.geometry.validate();
    cfg.reward.criteria.validate();
  });
  validated("asc", [&] { cfg.asc.validate(); });
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kConfig, "malformed JSON in " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

json to_json(const RunConfig& cfg) {
  const ScenarioConfig& s = cfg.scenario;
  const RandomizationConfig& r = s.randomization;
  const RewardSetup& rs = cfg.reward;
  json j;
  j["scenario"] = {
      {"seed", s.seed},
      {"duration", s.duration},
      {"control_rate", s.control_rate},
      {"obs_rate", s.obs_rate},
      {"obs_latency", s.obs_latency},
      {"camera",
       {{"fx", s.camera.fx}, {"fy", s.camera.fy}, {"cx", s.camera.cx},
        {"cy", s.camera.cy}, {"width", s.camera.width},
        {"height", s.camera.height}, {"near_z", s.camera.near_z}}},
      {"camera_motion",
       {{"kind", to_string(s.camera_motion.kind)},
        {"velocity", vec(s.camera_motion.velocity)},
        {"amplitude", s.camera_motion.amplitude},
        {"frequency", s.camera_motion.frequency},
        {"pitch_amplitude_deg", s.camera_motion.pitch_amplitude_deg},
        {"forward_speed", s.camera_motion.forward_speed},
        {"yaw_rate", s.camera_motion.yaw_rate}}},
      {"vo_noise",
       {{"translation_std", s.vo_noise.translation_std},
        {"rotation_std", s.vo_noise.rotation_std}}},
      {"object",
       {{"shape", to_string(s.object.shape)},
        {"radius", s.object.radius},
        {"dims", vec(s.object.dims)},
        {"height", s.object.height},
        {"position", vec(s.object.position)},
        {"rpy", vec(s.object.rpy)},
        {"velocity", vec(s.object.velocity)}}},
      {"surface_samples", s.surface_samples},
      {"sensor",
       {{"sigma_u", s.sensor.sigma_u}, {"sigma_v", s.sensor.sigma_v},
        {"sigma_z", s.sensor.sigma_z}}},
      {"alpha", s.alpha},
      {"physics",
       {{"friction", s.physics.friction},
        {"restitution", s.physics.restitution},
        {"added_mass", s.physics.added_mass}}},
      {"mode", to_string(s.mode)},
      {"measurement_cutoff",
       s.measurement_cutoff ? json(*s.measurement_cutoff) : json(nullptr)},
      {"score_after", s.score_after},
  };
  j["filter"] = {
      {"q_pos", cfg.filter.q_pos},
      {"q_vel", cfg.filter.q_vel},
      {"sigma_u", cfg.filter.sigma_u},
      {"sigma_v", cfg.filter.sigma_v},
      {"sigma_z", cfg.filter.sigma_z},
      {"p0_pos", cfg.filter.p0_pos},
      {"p0_vel", cfg.filter.p0_vel},
      {"history_depth", cfg.filter.history_depth},
      {"replay_late_measurements", cfg.filter.replay_late_measurements},
      {"ego_compensation", cfg.filter.ego_compensation},
      {"reacquire_window", cfg.filter.reacquire_window},
      {"reacquire_gate_sigma", cfg.filter.reacquire_gate_sigma},
  };
  j["drift"] = {
      {"enabled", cfg.drift_enabled ? json(*cfg.drift_enabled) : json(nullptr)},
      {"sigma", cfg.drift.sigma_drift},
      {"d_max", unbounded(cfg.drift.d_max)},
  };
  j["randomization"] = {
      {"alpha", range(r.alpha)},
      {"extrinsic_x", range(r.extrinsic_x)},
      {"extrinsic_y", range(r.extrinsic_y)},
      {"extrinsic_z", range(r.extrinsic_z)},
      {"extrinsic_roll_deg", range(r.extrinsic_roll_deg)},
      {"extrinsic_pitch_deg", range(r.extrinsic_pitch_deg)},
      {"extrinsic_yaw_deg", range(r.extrinsic_yaw_deg)},
      {"perception_delay_ms", range(r.perception_delay_ms)},
      {"friction", range(r.friction)},
      {"restitution", range(r.restitution)},
      {"added_mass_kg", range(r.added_mass_kg)},
      {"base_lin_vel_std", r.base_lin_vel_std},
      {"base_ang_vel_std", r.base_ang_vel_std},
      {"gravity_std", r.gravity_std},
      {"sigma_scale_std", r.sigma_scale_std},
      {"sigma_rotation_std", r.sigma_rotation_std},
  };
  j["reward"] = {
      {"enabled", cfg.reward_enabled},
      {"sigma_track", rs.reward.sigma_track},
      {"k", rs.reward.k},
      {"weights",
       {{"hint", rs.reward.w_hint}, {"opt", rs.reward.w_opt},
        {"miss", rs.reward.w_miss}, {"roll", rs.reward.w_roll},
        {"ang", rs.reward.w_ang}, {"smooth", rs.reward.w_smooth},
        {"limit", rs.reward.w_limit}}},
      {"clip_velocity", rs.reward.clip_velocity},
      {"clip_pitch", rs.reward.clip_pitch},
      {"base_velocity", to_string(rs.reward.base_velocity)},
      {"task",
       {{"p_opt", vec(rs.geometry.p_opt)},
        {"theta_opt", vec(rs.geometry.theta_opt)},
        {"p_hint", vec(rs.geometry.p_hint)},
        {"w_pos", vec(rs.geometry.w_pos)},
        {"w_rot", vec(rs.geometry.w_rot)},
        {"kind", to_string(rs.geometry.kind)}}},
      {"criteria",
       {{"eps_x", rs.criteria.eps_x}, {"eps_y", rs.criteria.eps_y},
        {"eps_yaw", rs.criteria.eps_yaw}, {"eps_pitch", rs.criteria.eps_pitch},
        {"delta_x", rs.criteria.delta_x}, {"delta_y", rs.criteria.delta_y},
        {"delta_yaw", rs.criteria.delta_yaw},
        {"delta_pitch", rs.criteria.delta_pitch}}},
  };
  j["asc"] = {
      {"s_thresh", cfg.asc.s_thresh},
      {"lambda", cfg.asc.lambda},
      {"near_start", cfg.asc.near_start},
      {"near_end", cfg.asc.near_end},
      {"replay_start", cfg.asc.replay_start},
      {"replay_end", cfg.asc.replay_end},
      {"window", cfg.asc.window},
      {"replay_capacity", cfg.asc.replay_capacity},
      {"per_task", cfg.asc.per_task},
  };
  return j;
}

std::string canonical_dump(const RunConfig& cfg) { return to_json(cfg).dump(); }

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kIo, "SHA-256 digest failed");
  }
  std::ostringstream out;
  out << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) out << std::setw(2) << static_cast<int>(digest[i]);
  return out.str();
}

std::string config_hash(const RunConfig& cfg) { return sha256_hex(canonical_dump(cfg)); }

}  // namespace sigmatrack
