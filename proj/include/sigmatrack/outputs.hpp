#pragma once

// Episode execution from a RunConfig and the on-disk result files:
// metrics.csv (one row per control tick), summary.json, manifest.json and,
// for sweeps, aggregate.json over per-seed subdirectories.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "sigmatrack/config.hpp"
#include "sigmatrack/sim.hpp"

namespace sigmatrack {

inline constexpr const char* kToolVersion = "0.3.0";

struct EpisodeRun {
  ScenarioBundle bundle;
  EpisodeResult result;
};

EpisodeRun run_config_episode(const RunConfig& cfg);

/// Fixed column order; doubles printed with 17 significant digits, missing
/// values as "nan". Reward columns appear only when the reward is enabled.
std::string metrics_csv(const EpisodeResult& result);
std::vector<std::string> metrics_csv_header(bool reward_enabled);

nlohmann::json summary_json(const EpisodeRun& run);

struct RunFiles {
  std::filesystem::path metrics_csv;
  std::filesystem::path summary_json;
  std::filesystem::path manifest_json;
};

/// Runs one episode and writes its three files. Throws Error(kIo) when the
/// directory cannot be created or written.
RunFiles write_run(const RunConfig& cfg, const std::string& config_path,
                   const std::filesystem::path& out_dir);

struct SweepReport {
  std::vector<std::uint64_t> completed;
  std::map<std::uint64_t, std::string> failed;
  nlohmann::json aggregate;
};

/// Seeds first..last inclusive, each in out_dir/seed_<N>, run on up to
/// `threads` workers. Per-seed failures are reported, not thrown.
SweepReport write_sweep(const RunConfig& cfg, const std::string& config_path,
                        std::uint64_t first, std::uint64_t last,
                        const std::filesystem::path& out_dir, unsigned threads);

/// Population mean and standard deviation of each scalar metric over the
/// given summaries; non-finite values are skipped.
nlohmann::json aggregate_summaries(const std::vector<nlohmann::json>& summaries);

}  // namespace sigmatrack
