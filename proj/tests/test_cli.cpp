#include <doctest.h>

#include "cli_pipeline.hpp"
#include "regionvad/io.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>

using namespace regionvad;
using pipeline::invoke;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::current_path() / ("cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("usage errors and help") {
  CHECK(invoke({}).code == cli::kExitValidation);
  CHECK(invoke({"frobnicate"}).code == cli::kExitValidation);
  CHECK(invoke({"--help"}).code == cli::kExitOk);
  CHECK(invoke({"simulate", "--no-such-key", "1"}).code == cli::kExitValidation);
  const fs::path dir = fresh_dir("usage");
  CHECK(invoke({"simulate", "--out-dir", dir.string(), "--frames", "abc"}).code == cli::kExitValidation);
  CHECK(invoke({"simulate", "--out-dir", dir.string(), "--anomaly-rate", "1.5"}).code == cli::kExitValidation);
  CHECK(invoke({"simulate", "--out-dir", dir.string(), "--seed", "-3"}).code == cli::kExitValidation);
  CHECK(invoke({"discover", "--out-dir", dir.string(), "--tracklets", "x.jsonl"}).code == cli::kExitValidation);
}

TEST_CASE("missing inputs name the path") {
  const fs::path dir = fresh_dir("missing");
  const auto r = invoke({"train", "--out-dir", dir.string(), "--tracklets", (dir / "nope.jsonl").string(),
                         "--region-map", (dir / "regions").string()});
  CHECK(r.code == cli::kExitValidation);
  CHECK(r.err.find("regions.pgm") != std::string::npos);
  const auto s = invoke({"discover", "--out-dir", dir.string(), "--height", "10", "--width", "10", "--tracklets",
                         (dir / "absent.jsonl").string()});
  CHECK(s.code == cli::kExitValidation);
  CHECK(s.err.find("absent.jsonl") != std::string::npos);
}

TEST_CASE("malformed records are a validation failure") {
  const fs::path dir = fresh_dir("malformed");
  {
    std::ofstream out(dir / "bad.jsonl");
    out << "{\"video_id\":\"v\"}\n";
  }
  const auto r = invoke({"discover", "--out-dir", dir.string(), "--height", "10", "--width", "10", "--tracklets",
                         (dir / "bad.jsonl").string()});
  CHECK(r.code == cli::kExitValidation);
  CHECK(r.err.find("line 1") != std::string::npos);
}

TEST_CASE("configuration precedence and echo") {
  const fs::path dir = fresh_dir("config");
  {
    std::ofstream out(dir / "run.cfg");
    out << "# scene\nframes=40\nseed=9\nvideo-id=from-file\nout-dir=" << (dir / "a").string() << "\n";
  }
  const auto r = invoke({"simulate", "--config", (dir / "run.cfg").string(), "--video-id", "from-flag"});
  REQUIRE(r.code == cli::kExitOk);
  const auto summary = nlohmann::json::parse(r.out);
  CHECK(summary["command"] == "simulate");
  CHECK(summary["status"] == "ok");
  CHECK(summary["result"]["video_id"] == "from-flag");
  CHECK(summary["result"]["frames"] == 40);
  const ConfigMap echo = read_config(dir / "a" / "config.simulate.txt");
  CHECK(echo.at("seed") == "9");
  CHECK(echo.at("video-id") == "from-flag");
  CHECK(echo.at("k") == "4");  // untouched default
  CHECK(echo.size() == cli::config_keys().size());

  {
    std::ofstream out(dir / "bad.cfg");
    out << "frames=40\ncolour=blue\n";
  }
  const auto bad = invoke({"simulate", "--config", (dir / "bad.cfg").string(), "--out-dir", (dir / "b").string()});
  CHECK(bad.code == cli::kExitValidation);
  CHECK(bad.err.find("colour") != std::string::npos);
  CHECK(invoke({"simulate", "--config", (dir / "absent.cfg").string()}).code == cli::kExitValidation);
}

TEST_CASE("the full pipeline runs and reproduces every artifact byte for byte") {
  const fs::path dir = fresh_dir("pipeline");
  const auto steps = pipeline::full_pipeline(dir, 400, 3);
  for (const auto& step : steps) {
    const auto r = invoke(step.args);
    INFO(step.command << ": " << r.err);
    REQUIRE(r.code == cli::kExitOk);
  }
  const auto first = pipeline::snapshot(dir);
  for (const char* file : {"train/observations.jsonl", "test/annotations.jsonl", "toy/toy_report.json",
                           "discover/regions.pgm", "discover/regions.json", "discover/regions.ppm",
                           "select-k/select_k.json", "train-models/models.json", "score/tracklet_scores.jsonl",
                           "score/frame_scores.csv", "evaluate/metrics.json", "explain/prototypes.json",
                           "render/regions.ppm", "render/activity.pgm"}) {
    CHECK_MESSAGE(first.count(file) == 1, file);
  }
  const nlohmann::json metrics = read_json(dir / "evaluate" / "metrics.json");
  CHECK(metrics["auc"].is_number());
  CHECK(metrics["rbdc"].is_number());

  for (const auto& step : steps) REQUIRE(invoke(step.args).code == cli::kExitOk);
  const auto second = pipeline::snapshot(dir);
  REQUIRE(first.size() == second.size());
  for (const auto& [name, bytes] : first) CHECK_MESSAGE(second.at(name) == bytes, name);

  SUBCASE("scores refuse models bound to another region map") {
    const std::string other = (dir / "grid").string();
    REQUIRE(invoke({"discover", "--out-dir", other, "--method", "grid", "--cell", "48", "--height", "96", "--width",
                    "160"})
                .code == cli::kExitOk);
    const auto r = invoke({"score", "--out-dir", (dir / "mismatch").string(), "--tracklets",
                           (dir / "test/observations.jsonl").string(), "--region-map", other + "/regions", "--models",
                           (dir / "train-models/models.json").string(), "--videos",
                           (dir / "test/videos.json").string()});
    CHECK(r.code == cli::kExitValidation);
    CHECK(r.err.find("hash") != std::string::npos);
  }
  SUBCASE("tracklets past the declared video length are rejected") {
    write_video_lengths(dir / "short.json", {{"test", 10}});
    const auto r = invoke({"score", "--out-dir", (dir / "short").string(), "--tracklets",
                           (dir / "test/observations.jsonl").string(), "--region-map",
                           (dir / "discover/regions").string(), "--models",
                           (dir / "train-models/models.json").string(), "--videos", (dir / "short.json").string()});
    CHECK(r.code == cli::kExitValidation);
  }
}

TEST_CASE("motion derived from emitted flow rasters") {
  const fs::path dir = fresh_dir("flow");
  REQUIRE(invoke({"simulate", "--out-dir", (dir / "sim").string(), "--frames", "60", "--layout", "two_lane",
                  "--emit-flow", "true", "--video-id", "cam"})
              .code == cli::kExitOk);
  CHECK(fs::exists(dir / "sim" / "flow" / "cam" / "000059.flo"));
  const auto records = read_observations(dir / "sim" / "observations.jsonl");
  REQUIRE_FALSE(records.empty());
  for (const auto& r : records) CHECK((r.stationary || !r.orientation.has_value()));
  const std::vector<std::string> base{"discover", "--out-dir", (dir / "disc").string(), "--height", "64",
                                      "--width", "128", "--k", "2", "--tracklets",
                                      (dir / "sim/observations.jsonl").string()};
  CHECK(invoke(base).code == cli::kExitValidation);  // no flow supplied
  std::vector<std::string> with_flow = base;
  with_flow.insert(with_flow.end(), {"--flow-dir", (dir / "sim/flow").string()});
  const auto r = invoke(with_flow);
  INFO(r.err);
  CHECK(r.code == cli::kExitOk);
}
