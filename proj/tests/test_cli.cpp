#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sigmatrack/acceptance.hpp"
#include "sigmatrack/cli.hpp"
#include "sigmatrack/config.hpp"
#include "sigmatrack/error.hpp"
#include "sigmatrack/outputs.hpp"

using namespace sigmatrack;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Scratch {
  fs::path dir;
  Scratch() {
    std::random_device rd;
    dir = fs::temp_directory_path() / ("sigmatrack_cli_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(dir);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
  fs::path write(const std::string& name, const std::string& text) const {
    const fs::path p = dir / name;
    std::ofstream(p) << text;
    return p;
  }
};

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "sigmatrack");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const char* kSmall = R"({"scenario": {"duration": 1.0, "surface_samples": 256,
  "object": {"velocity": [0.2, 0, 0]}, "camera_motion": {"kind": "walking"}}})";

}  // namespace

TEST_CASE("config parsing") {
  SUBCASE("defaults") {
    const RunConfig c = parse_config(json::parse(R"({"scenario": {"duration": 3}})"));
    CHECK(c.scenario.duration == 3.0);
    CHECK(c.scenario.control_rate == 50.0);
    CHECK(c.filter.q_pos == 1e-6);
    CHECK(c.asc.s_thresh == 0.15);
    CHECK_FALSE(c.effective_drift().has_value());
  }
  SUBCASE("missing duration names the key") {
    try {
      parse_config(json::parse(R"({"scenario": {}})"));
      FAIL("expected a config error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("scenario.duration") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config(json::object()), Error);
  }
  SUBCASE("unknown and mistyped keys") {
    try {
      parse_config(json::parse(R"({"scenario": {"duration": 1, "camera": {"fz": 1}}})"));
      FAIL("expected a config error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("scenario.camera.fz") != std::string::npos);
    }
    try {
      parse_config(json::parse(R"({"scenario": {"duration": 1}, "filter": {"q_pos": "big"}})"));
      FAIL("expected a config error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("filter.q_pos") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config(json::parse(R"({"scenario": {"duration": 1, "mode": "fly"}})")), Error);
  }
  SUBCASE("training mode enables drift unless disabled") {
    RunConfig c = parse_config(json::parse(R"({"scenario": {"duration": 1, "mode": "training"}})"));
    CHECK(c.effective_drift().has_value());
    c = parse_config(json::parse(
        R"({"scenario": {"duration": 1, "mode": "training"}, "drift": {"enabled": false, "d_max": null}})"));
    CHECK_FALSE(c.effective_drift().has_value());
    CHECK(std::isinf(c.drift.d_max));
  }
}

TEST_CASE("canonical config round trip") {
  const RunConfig c = parse_config(json::parse(kSmall));
  const json canon = to_json(c);
  const RunConfig back = parse_config(canon);
  CHECK(canonical_dump(back) == canonical_dump(c));
  CHECK(config_hash(back) == config_hash(c));
  CHECK(config_hash(c).size() == 64);
  RunConfig changed = c;
  changed.scenario.seed = 99;
  CHECK(config_hash(changed) != config_hash(c));
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("load_config errors") {
  Scratch s;
  CHECK_THROWS_AS(load_config(s.dir / "missing.json"), Error);
  try {
    load_config(s.write("bad.json", "{ not json"));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConfig);
  }
}

TEST_CASE("run subcommand") {
  Scratch s;
  const fs::path cfg = s.write("small.json", kSmall);
  const CliResult a = cli({"run", "--config", cfg.string(), "--seed", "5", "--out", (s.dir / "a").string()});
  REQUIRE(a.code == 0);
  for (const char* f : {"metrics.csv", "summary.json", "manifest.json"}) CHECK(fs::exists(s.dir / "a" / f));
  const CliResult b = cli({"run", "--config", cfg.string(), "--seed", "5", "--out", (s.dir / "b").string()});
  REQUIRE(b.code == 0);
  CHECK(slurp(s.dir / "a" / "metrics.csv") == slurp(s.dir / "b" / "metrics.csv"));

  const json manifest = json::parse(slurp(s.dir / "a" / "manifest.json"));
  RunConfig loaded = load_config(cfg);
  loaded.scenario.seed = 5;
  CHECK(manifest.at("config_hash") == config_hash(loaded));
  CHECK(manifest.at("seeds") == json::array({5}));
  CHECK(manifest.at("version") == kToolVersion);

  const std::string csv = slurp(s.dir / "a" / "metrics.csv");
  const std::string header = csv.substr(0, csv.find('\n'));
  CHECK(header.rfind("stamp,visible,filter_p0_x", 0) == 0);
  CHECK(header.find("reward_") == std::string::npos);
  // One header plus one row per control tick.
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 51);
}

TEST_CASE("run error paths") {
  Scratch s;
  const fs::path missing = s.write("missing.json", R"({"scenario": {"seed": 1}})");
  const CliResult a = cli({"run", "--config", missing.string(), "--out", (s.dir / "o").string()});
  CHECK(a.code == 2);
  CHECK(a.err.find("scenario.duration") != std::string::npos);

  const fs::path cfg = s.write("small.json", kSmall);
  s.write("blocker", "file");
  const CliResult b = cli({"run", "--config", cfg.string(), "--out", (s.dir / "blocker" / "sub").string()});
  CHECK(b.code == 3);

  const CliResult c = cli({"run", "--config", (s.dir / "nope.json").string(), "--out", (s.dir / "o").string()});
  CHECK(c.code == 3);

  CHECK(cli({"run", "--out", "x"}).code == 2);
  CHECK(cli({"run", "--config", cfg.string(), "--out", "x", "--mode", "fly"}).code == 2);
  CHECK(cli({}).code == 2);
  const CliResult v = cli({"--version"});
  CHECK(v.code == 0);
  CHECK(v.out.find(kToolVersion) != std::string::npos);
}

TEST_CASE("sweep subcommand") {
  Scratch s;
  const fs::path cfg = s.write("small.json", kSmall);
  const CliResult a = cli({"sweep", "--config", cfg.string(), "--seeds", "1..3", "--out", (s.dir / "sw").string(),
                           "--jobs", "2"});
  REQUIRE(a.code == 0);
  const json agg = json::parse(slurp(s.dir / "sw" / "aggregate.json"));
  CHECK(agg.at("completed").size() == 3);
  const json& rmse = agg.at("metrics").at("centroid_rmse_filter");
  CHECK(rmse.contains("mean"));
  CHECK(rmse.contains("std"));
  CHECK(rmse.at("n") == 3);
  for (int seed = 1; seed <= 3; ++seed) {
    CHECK(fs::exists(s.dir / "sw" / ("seed_" + std::to_string(seed)) / "metrics.csv"));
  }

  // Sweep episodes equal single runs of the same seed.
  const CliResult r = cli({"run", "--config", cfg.string(), "--seed", "2", "--out", (s.dir / "r2").string()});
  REQUIRE(r.code == 0);
  CHECK(slurp(s.dir / "r2" / "metrics.csv") == slurp(s.dir / "sw" / "seed_2" / "metrics.csv"));

  const CliResult one = cli({"sweep", "--config", cfg.string(), "--seeds", "7..7", "--out", (s.dir / "one").string()});
  REQUIRE(one.code == 0);
  const json agg1 = json::parse(slurp(s.dir / "one" / "aggregate.json"));
  CHECK(agg1.at("metrics").at("centroid_rmse_filter").at("std") == 0.0);

  const CliResult other = cli({"sweep", "--config", cfg.string(), "--seeds", "4..5", "--out", (s.dir / "sw").string()});
  REQUIRE(other.code == 0);
  for (int seed = 1; seed <= 5; ++seed) {
    CHECK(fs::exists(s.dir / "sw" / ("seed_" + std::to_string(seed)) / "summary.json"));
  }
  const json seed1 = json::parse(slurp(s.dir / "sw" / "seed_1" / "summary.json"));
  CHECK(seed1.at("seed") == 1);

  CHECK(cli({"sweep", "--config", cfg.string(), "--seeds", "3..1", "--out", (s.dir / "x").string()}).code == 2);
  CHECK(cli({"sweep", "--config", cfg.string(), "--seeds", "a..b", "--out", (s.dir / "x").string()}).code == 2);
}

TEST_CASE("aggregate statistics") {
  const std::vector<json> summaries{
      json{{"metrics", {{"a", 1.0}, {"b", nullptr}, {"c", {1.0, 2.0}}}}},
      json{{"metrics", {{"a", 3.0}, {"b", nullptr}, {"c", {3.0, nullptr}}}}},
  };
  const json agg = aggregate_summaries(summaries);
  CHECK(agg.at("a").at("mean") == 2.0);
  CHECK(agg.at("a").at("std") == 1.0);
  CHECK(agg.at("b").at("n") == 0);
  CHECK(agg.at("c[1]").at("n") == 1);
}

TEST_CASE("selftest subcommand and its negative control") {
  Scratch s;
  const CliResult ok = cli({"selftest", "--out", (s.dir / "st").string()});
  CHECK(ok.code == 0);
  CHECK(std::count(ok.out.begin(), ok.out.end(), '\n') == 12);
  const json report = json::parse(slurp(s.dir / "st" / "selftest.json"));
  CHECK(report.at("passed") == true);

  const CliResult bad = cli({"selftest", "--out", (s.dir / "neg").string(), "--disable-ego-compensation"});
  CHECK(bad.code == 1);
  CHECK(bad.out.find("[FAIL] 06") != std::string::npos);
}

TEST_CASE("shipped example configs") {
  const fs::path dir = fs::path(SIGMATRACK_SOURCE_DIR) / "configs";
  int seen = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".json") continue;
    CHECK_NOTHROW(load_config(entry.path()));
    ++seen;
  }
  CHECK(seen >= 2);
  const RunConfig walking = load_config(dir / "standard_walking.json");
  CHECK(canonical_dump(walking) == canonical_dump(standard_walking_config(1)));
}
