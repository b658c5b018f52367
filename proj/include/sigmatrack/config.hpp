#pragma once

// JSON run configuration. Every section is optional except
// scenario.duration; absent keys take the library defaults. Unknown keys are
// rejected with their full dotted path.

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "sigmatrack/estimator.hpp"
#include "sigmatrack/perturbation.hpp"
#include "sigmatrack/sim.hpp"
#include "sigmatrack/tasklogic.hpp"

namespace sigmatrack {

struct RunConfig {
  ScenarioConfig scenario;
  FilterConfig filter;
  /// Drift section; `enabled` unset means "on in training mode".
  std::optional<bool> drift_enabled;
  DriftState drift;
  bool reward_enabled = false;
  RewardSetup reward;
  AscConfig asc;

  /// Drift settings to use for an episode in the configured mode.
  std::optional<DriftState> effective_drift() const;
  EpisodeOptions episode_options() const;
};

/// Throws Error(kConfig) whose message starts with the offending key path.
RunConfig parse_config(const nlohmann::json& j);
/// Reads and parses a file; Error(kIo) when unreadable, Error(kConfig) on
/// malformed JSON.
RunConfig load_config(const std::filesystem::path& path);

/// Canonical form: every field present, keys sorted.
nlohmann::json to_json(const RunConfig& cfg);
std::string canonical_dump(const RunConfig& cfg);
/// Hex SHA-256 of canonical_dump().
std::string config_hash(const RunConfig& cfg);
std::string sha256_hex(const std::string& bytes);

RunMode run_mode_from_string(const std::string& name);

}  // namespace sigmatrack
