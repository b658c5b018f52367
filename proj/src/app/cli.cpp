#include "sigmatrack/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <optional>
#include <regex>
#include <string>
#include <thread>

#include "sigmatrack/acceptance.hpp"
#include "sigmatrack/config.hpp"
#include "sigmatrack/error.hpp"
#include "sigmatrack/outputs.hpp"

namespace sigmatrack {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kIo: return kExitIo;
    default: return kExitConfig;
  }
}

RunConfig load_with_overrides(const std::string& path, const std::optional<std::string>& mode) {
  RunConfig cfg = load_config(path);
  if (mode) {
    cfg.scenario.mode = run_mode_from_string(*mode);
    // The mode changes the admissible latency budget, so re-check.
    try {
      cfg.scenario.validate(cfg.filter.history_depth);
    } catch (const Error& e) {
      throw Error(ErrorCode::kConfig, std::string("scenario: ") + e.what());
    }
  }
  return cfg;
}

bool parse_seed_range(const std::string& text, std::uint64_t& first, std::uint64_t& last) {
  static const std::regex pattern(R"(^\s*(\d+)\s*\.\.\s*(\d+)\s*$)");
  std::smatch m;
  if (!std::regex_match(text, m, pattern)) return false;
  try {
    first = std::stoull(m[1].str());
    last = std::stoull(m[2].str());
  } catch (const std::exception&) {
    return false;
  }
  return first <= last;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Ego-centric sigma point tracking: scenario runs, sweeps and self-test"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::string seeds;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  bool disable_ego = false;

  CLI::App* run = app.add_subcommand("run", "Run one episode and write its result files");
  run->add_option("--config", config_path, "JSON config file")->required();
  run->add_option("--seed", seed, "Override scenario.seed");
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--mode", mode, "deploy or training")
      ->check(CLI::IsMember({"deploy", "training"}));

  CLI::App* sweep = app.add_subcommand("sweep", "Run a seed range and aggregate metrics");
  sweep->add_option("--config", config_path, "JSON config file")->required();
  sweep->add_option("--seeds", seeds, "Inclusive seed range A..B")->required();
  sweep->add_option("--out", out_dir, "Output directory")->required();
  sweep->add_option("--mode", mode, "deploy or training")
      ->check(CLI::IsMember({"deploy", "training"}));
  sweep->add_option("--jobs", jobs, "Parallel episodes")->check(CLI::PositiveNumber);

  CLI::App* selftest = app.add_subcommand("selftest", "Run the acceptance scenarios");
  selftest->add_option("--out", out_dir, "Directory for scratch files and selftest.json");
  selftest->add_flag("--disable-ego-compensation", disable_ego)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) {
      RunConfig cfg = load_with_overrides(config_path, mode);
      if (seed) cfg.scenario.seed = *seed;
      const RunFiles files = write_run(cfg, config_path, out_dir);
      out << "wrote " << files.metrics_csv.string() << ", " << files.summary_json.string()
          << ", " << files.manifest_json.string() << "\n";
      return kExitOk;
    }

    if (*sweep) {
      std::uint64_t first = 0;
      std::uint64_t last = 0;
      if (!parse_seed_range(seeds, first, last)) {
        err << "error: --seeds: expected A..B with A <= B, got '" << seeds << "'\n";
        return kExitConfig;
      }
      const RunConfig cfg = load_with_overrides(config_path, mode);
      const SweepReport report = write_sweep(cfg, config_path, first, last, out_dir, jobs);
      for (const auto& [s, msg] : report.failed) {
        err << "seed " << s << " failed: " << msg << "\n";
      }
      out << report.completed.size() << " of " << (last - first + 1)
          << " seeds completed; aggregate in "
          << (std::filesystem::path(out_dir) / "aggregate.json").string() << "\n";
      return report.failed.empty() ? kExitOk : kExitFailed;
    }

    if (*selftest) {
      AcceptanceOptions opt;
      opt.disable_ego_compensation = disable_ego;
      if (!out_dir.empty()) opt.work_dir = out_dir;
      const auto start = std::chrono::steady_clock::now();
      const std::vector<CriterionResult> results = run_acceptance(opt);
      const double seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      bool all = true;
      nlohmann::json vec = nlohmann::json::array();
      for (const CriterionResult& r : results) {
        out << format_result_line(r) << "\n";
        all = all && r.passed;
        vec.push_back({{"id", r.id}, {"name", r.name}, {"passed", r.passed}});
      }
      out << (all ? "selftest: all criteria passed" : "selftest: FAILED") << " ("
          << results.size() << " criteria, " << std::fixed << std::setprecision(1) << seconds
          << " s)\n";
      if (!out_dir.empty()) {
        std::ofstream f(std::filesystem::path(out_dir) / "selftest.json");
        f << nlohmann::json{{"criteria", vec}, {"passed", all}}.dump(2) << "\n";
      }
      return all ? kExitOk : kExitFailed;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailed;
  }
  return kExitOk;
}

}  // namespace sigmatrack
