#pragma once

// Acceptance scenarios shared by the acceptance test binary and the
// `selftest` subcommand. Each criterion yields one pass/fail line.

#include <filesystem>
#include <string>
#include <vector>

#include "sigmatrack/config.hpp"

namespace sigmatrack {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
};

struct AcceptanceOptions {
  /// Scratch space for the determinism criterion.
  std::filesystem::path work_dir;
  /// Negative control: runs the tracked filter without ego-motion
  /// compensation wherever a scenario exercises it.
  bool disable_ego_compensation = false;
  /// Re-evaluates criteria 1-10 to confirm a stable pass/fail vector.
  bool check_stability = true;
};

/// Walking camera (0.05 m, 1.5 Hz, 2 deg pitch), sphere crossing the view at
/// 0.3 m/s at 1.5 m depth, 5 Hz observations with 0.2 s latency and the
/// default sensor and filter noise constants.
RunConfig standard_walking_config(std::uint64_t seed = 1);

/// Criteria 1-10.
std::vector<CriterionResult> run_core_criteria(const AcceptanceOptions& options);
/// Criteria 1-11.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options);

/// "[PASS] 06 baseline_dominance: ..." style line.
std::string format_result_line(const CriterionResult& r);

}  // namespace sigmatrack
