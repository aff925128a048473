#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ellitrack/assign.hpp"
#include "ellitrack/detector.hpp"
#include "ellitrack/features.hpp"
#include "ellitrack/segmenter.hpp"
#include "ellitrack/synth.hpp"

namespace ellitrack::cli {

struct ForestParams {
  int n_trees = 50;
  std::uint64_t seed = 1;
  int negatives_per_positive = 1;
};

/// Artifact locations; relative paths resolve against the output directory.
struct Paths {
  std::filesystem::path frames = "frames";
  std::filesystem::path truth = "truth.json";
  std::filesystem::path detections = "detections.jsonl";
  std::filesystem::path positives = "positives.csv";
  std::filesystem::path forest = "forest.json";
  std::filesystem::path trajectories = "trajectories.csv";
  std::filesystem::path report = "eval.json";
  std::filesystem::path report_frames = "eval_frames.csv";
  std::filesystem::path render = "trajectories.svg";
};

struct PipelineConfig {
  SceneConfig scene;
  DetectorConfig detector;
  SegmenterParams segmenter;
  std::string segmentation = "vm-acm";  ///< vm-acm | ellipse
  FeatureParams features;
  ForestParams forest;
  TrackParams assign;
  bool link = true;
  double match_threshold = 20.0;
  Paths paths;
};

/// INI file with sections scene, detector, segmenter, features, forest,
/// assign, metrics and paths. Missing keys keep their defaults; unknown
/// sections or keys are errors. Errors name the file and the key.
PipelineConfig load_config(const std::filesystem::path& path);

/// Checks every sub-configuration; returns advisory warnings.
std::vector<std::string> validate(const PipelineConfig& config);

}  // namespace ellitrack::cli
