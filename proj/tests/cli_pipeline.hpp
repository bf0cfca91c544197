#pragma once

// Helpers that drive the command-line front-end in-process.

#include "cli.hpp"

#include "regionvad/io.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace pipeline {

namespace fs = std::filesystem;

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

inline CliResult invoke(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = regionvad::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

/// Relative path -> bytes of every regular file below `dir`.
inline std::map<std::string, std::vector<std::uint8_t>> snapshot(const fs::path& dir) {
  std::map<std::string, std::vector<std::uint8_t>> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) files[fs::relative(entry.path(), dir).string()] = regionvad::read_bytes(entry.path());
  }
  return files;
}

struct Step {
  std::string command;
  std::vector<std::string> args;
};

/// Every subcommand on a small four-zone scene: train and test videos,
/// the toy experiment, discovery, K selection, training, scoring,
/// evaluation, prototypes and rendering. Outputs go to `<dir>/<command>`.
inline std::vector<Step> full_pipeline(const fs::path& dir, int frames, std::uint64_t seed) {
  const std::string d = dir.string();
  const std::string s = std::to_string(seed);
  const std::string n = std::to_string(frames);
  const std::vector<std::string> size{"--height", "96", "--width", "160"};
  auto with = [](std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
  };
  const std::string train_obs = d + "/train/observations.jsonl";
  const std::string test_obs = d + "/test/observations.jsonl";
  const std::string regions = d + "/discover/regions";
  const std::string models = d + "/train-models/models.json";
  return {
      {"simulate", {"simulate", "--out-dir", d + "/train", "--seed", s, "--frames", n, "--video-id", "train"}},
      {"simulate", {"simulate", "--out-dir", d + "/test", "--seed", std::to_string(seed + 1000), "--frames", n,
                    "--video-id", "test", "--anomaly-rate", "0.05"}},
      {"toy", {"toy", "--out-dir", d + "/toy", "--seed", s, "--toy-train", "2000", "--toy-test", "2000", "--k-max", "8"}},
      {"discover", with({"discover", "--out-dir", d + "/discover", "--seed", s, "--tracklets", train_obs, "--k", "4"}, size)},
      {"select-k", with({"select-k", "--out-dir", d + "/select-k", "--seed", s, "--tracklets", train_obs,
                         "--k-candidates", "2,4", "--k-max", "6"},
                        size)},
      {"train", {"train", "--out-dir", d + "/train-models", "--seed", s, "--tracklets", train_obs, "--region-map",
                 regions}},
      {"score", {"score", "--out-dir", d + "/score", "--tracklets", test_obs, "--region-map", regions, "--models",
                 models, "--videos", d + "/test/videos.json"}},
      {"evaluate", {"evaluate", "--out-dir", d + "/evaluate", "--frame-scores", d + "/score/frame_scores.csv",
                    "--tracklet-scores", d + "/score/tracklet_scores.jsonl", "--annotations",
                    d + "/test/annotations.jsonl", "--videos", d + "/test/videos.json"}},
      {"explain", {"explain", "--out-dir", d + "/explain", "--tracklets", train_obs, "--region-map", regions,
                   "--models", models}},
      {"render", {"render", "--out-dir", d + "/render", "--region-map", regions, "--tracklets", train_obs}},
  };
}

}  // namespace pipeline
