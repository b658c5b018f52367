#include "sigmatrack/outputs.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <thread>

#include "sigmatrack/error.hpp"

namespace sigmatrack {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kEstimators[] = {"filter", "zoh", "nocomp"};
constexpr const char* kAxes[] = {"x", "y", "z"};

void append_number(std::string& out, double v) {
  if (std::isnan(v)) {
    out += "nan";
    return;
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json number_array(const std::array<double, kSigmaCount>& a) {
  json out = json::array();
  for (double v : a) out.push_back(number_or_null(v));
  return out;
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << bytes;
  out.close();
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

void make_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(ErrorCode::kIo, "cannot create output directory " + dir.string() +
                                    (ec ? ": " + ec.message() : ""));
  }
}

}  // namespace

EpisodeRun run_config_episode(const RunConfig& cfg) {
  EpisodeRun run;
  run.bundle = generate_scenario(cfg.scenario);
  run.result = run_episode(run.bundle, cfg.episode_options());
  return run;
}

std::vector<std::string> metrics_csv_header(bool reward_enabled) {
  std::vector<std::string> cols{"stamp", "visible"};
  for (const char* est : kEstimators) {
    for (std::size_t j = 0; j < kSigmaCount; ++j) {
      for (const char* axis : kAxes) {
        cols.push_back(std::string(est) + "_p" + std::to_string(j) + "_" + axis);
      }
    }
  }
  cols.push_back("drift_magnitude");
  if (reward_enabled) {
    for (const char* name : RewardBreakdown::kNames) {
      cols.push_back(std::string("reward_") + name);
    }
    cols.push_back("reward_total");
  }
  return cols;
}

std::string metrics_csv(const EpisodeResult& result) {
  const bool with_reward = result.metrics.reward_enabled;
  std::string out;
  const auto header = metrics_csv_header(with_reward);
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out += ',';
    out += header[i];
  }
  out += '\n';

  const double nan = std::nan("");
  for (const TickRecord& rec : result.ticks) {
    append_number(out, rec.stamp);
    out += rec.visible ? ",1" : ",0";
    for (const auto* errors : {&rec.filter_error, &rec.zoh_error, &rec.nocomp_error}) {
      for (const auto& e : *errors) {
        for (int c = 0; c < 3; ++c) {
          out += ',';
          append_number(out, e ? (*e)(c) : nan);
        }
      }
    }
    out += ',';
    append_number(out, rec.drift_magnitude);
    if (with_reward) {
      for (std::size_t k = 0; k < RewardBreakdown::kTerms; ++k) {
        out += ',';
        append_number(out, rec.reward ? rec.reward->weighted[k] : nan);
      }
      out += ',';
      append_number(out, rec.reward ? rec.reward->total : nan);
    }
    out += '\n';
  }
  return out;
}

json summary_json(const EpisodeRun& run) {
  const EpisodeMetrics& m = run.result.metrics;
  const ScenarioConfig& sc = run.bundle.config;
  json metrics = {
      {"rmse_filter", number_array(m.rmse_filter)},
      {"rmse_zoh", number_array(m.rmse_zoh)},
      {"rmse_nocomp", number_array(m.rmse_nocomp)},
      {"centroid_rmse_filter", number_or_null(m.centroid_rmse_filter)},
      {"centroid_rmse_zoh", number_or_null(m.centroid_rmse_zoh)},
      {"centroid_rmse_nocomp", number_or_null(m.centroid_rmse_nocomp)},
      {"velocity_rmse", number_or_null(m.velocity_rmse)},
      {"zoh_mean_lag_error", number_or_null(m.zoh_mean_lag_error)},
      {"visible_fraction", m.visible_fraction},
      {"max_drift", m.max_drift},
      {"open_loop_max_deviation", m.open_loop_max_deviation},
      {"measurements_delivered", m.measurements_delivered},
      {"measurements_stale", m.measurements_stale},
      {"scored_ticks", m.scored_ticks},
      {"terminal", to_string(m.terminal)},
  };
  if (m.reward_enabled) {
    json sums = json::object();
    for (std::size_t k = 0; k < RewardBreakdown::kTerms; ++k) {
      sums[RewardBreakdown::kNames[k]] = m.reward_sums[k];
    }
    metrics["reward_sums"] = sums;
    metrics["reward_total"] = m.reward_total;
  }
  json out = {
      {"seed", sc.seed},
      {"mode", to_string(sc.mode)},
      {"ticks", run.bundle.ticks.size()},
      {"alpha", run.bundle.alpha},
      {"latency", run.bundle.latency},
      {"metrics", metrics},
  };
  if (run.bundle.draw) {
    const RandomizationDraw& d = *run.bundle.draw;
    out["randomization_draw"] = {
        {"extrinsic_translation",
         {d.extrinsic_translation.x(), d.extrinsic_translation.y(),
          d.extrinsic_translation.z()}},
        {"extrinsic_rpy", {d.extrinsic_rpy.x(), d.extrinsic_rpy.y(), d.extrinsic_rpy.z()}},
        {"perception_delay", d.perception_delay},
        {"alpha", d.alpha},
        {"friction", d.friction},
        {"restitution", d.restitution},
        {"added_mass", d.added_mass},
    };
  }
  return out;
}

RunFiles write_run(const RunConfig& cfg, const std::string& config_path,
                   const fs::path& out_dir) {
  make_directory(out_dir);
  const EpisodeRun run = run_config_episode(cfg);

  RunFiles files{out_dir / "metrics.csv", out_dir / "summary.json",
                 out_dir / "manifest.json"};
  write_file(files.metrics_csv, metrics_csv(run.result));
  write_file(files.summary_json, summary_json(run).dump(2) + "\n");
  const json manifest = {
      {"tool", "sigmatrack"},
      {"version", kToolVersion},
      {"config_path", config_path},
      {"config_hash", config_hash(cfg)},
      {"seeds", {cfg.scenario.seed}},
      {"mode", to_string(cfg.scenario.mode)},
      {"out_dir", out_dir.string()},
      {"files",
       {{"metrics_csv", files.metrics_csv.string()},
        {"summary_json", files.summary_json.string()}}},
  };
  write_file(files.manifest_json, manifest.dump(2) + "\n");
  return files;
}

json aggregate_summaries(const std::vector<json>& summaries) {
  // Collect every scalar metric (array metrics per element as name[j]).
  std::map<std::string, std::vector<double>> samples;
  for (const json& s : summaries) {
    const json& metrics = s.at("metrics");
    for (auto it = metrics.begin(); it != metrics.end(); ++it) {
      const json& v = it.value();
      if (v.is_number() || v.is_null()) {
        auto& dst = samples[it.key()];
        if (v.is_number()) dst.push_back(v.get<double>());
      } else if (v.is_array()) {
        for (std::size_t j = 0; j < v.size(); ++j) {
          auto& dst = samples[it.key() + "[" + std::to_string(j) + "]"];
          if (v[j].is_number()) dst.push_back(v[j].get<double>());
        }
      } else if (v.is_object()) {
        for (auto jt = v.begin(); jt != v.end(); ++jt) {
          auto& dst = samples[it.key() + "." + jt.key()];
          if (jt.value().is_number()) dst.push_back(jt.value().get<double>());
        }
      }
    }
  }
  json out = json::object();
  for (const auto& [name, values] : samples) {
    if (values.empty()) {
      out[name] = {{"mean", nullptr}, {"std", nullptr}, {"n", 0}};
      continue;
    }
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());
    out[name] = {{"mean", mean}, {"std", std::sqrt(var)}, {"n", values.size()}};
  }
  return out;
}

SweepReport write_sweep(const RunConfig& cfg, const std::string& config_path,
                        std::uint64_t first, std::uint64_t last,
                        const fs::path& out_dir, unsigned threads) {
  if (last < first) {
    throw Error(ErrorCode::kInvalidArgument, "seed range is empty");
  }
  make_directory(out_dir);
  const std::size_t count = static_cast<std::size_t>(last - first) + 1;
  std::vector<std::optional<json>> summaries(count);
  std::vector<std::string> errors(count);
  std::vector<RunFiles> files(count);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      RunConfig seeded = cfg;
      seeded.scenario.seed = first + i;
      const fs::path dir = out_dir / ("seed_" + std::to_string(first + i));
      try {
        files[i] = write_run(seeded, config_path, dir);
        std::ifstream in(files[i].summary_json);
        summaries[i] = json::parse(in);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const unsigned n_workers =
      std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < n_workers; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();

  SweepReport report;
  std::vector<json> done;
  json episodes = json::array();
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t seed = first + i;
    if (summaries[i]) {
      report.completed.push_back(seed);
      done.push_back(*summaries[i]);
      episodes.push_back({{"seed", seed},
                          {"metrics_csv", files[i].metrics_csv.string()},
                          {"summary_json", files[i].summary_json.string()},
                          {"manifest_json", files[i].manifest_json.string()}});
    } else {
      report.failed[seed] = errors[i];
    }
  }
  json failed = json::object();
  for (const auto& [seed, msg] : report.failed) failed[std::to_string(seed)] = msg;

  report.aggregate = {
      {"seeds", {first, last}},
      {"completed", report.completed},
      {"failed", failed},
      {"config_hash", config_hash(cfg)},
      {"metrics", aggregate_summaries(done)},
  };
  write_file(out_dir / "aggregate.json", report.aggregate.dump(2) + "\n");
  const json manifest = {
      {"tool", "sigmatrack"},
      {"version", kToolVersion},
      {"config_path", config_path},
      {"config_hash", config_hash(cfg)},
      {"seeds", {first, last}},
      {"mode", to_string(cfg.scenario.mode)},
      {"out_dir", out_dir.string()},
      {"episodes", episodes},
      {"aggregate_json", (out_dir / "aggregate.json").string()},
  };
  write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return report;
}

}  // namespace sigmatrack
