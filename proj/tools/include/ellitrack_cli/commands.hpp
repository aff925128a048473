#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ellitrack/raster.hpp"
#include "ellitrack_cli/config.hpp"

namespace ellitrack::cli {

/// Options shared by every subcommand.
struct CommandOptions {
  std::filesystem::path out = ".";           ///< working directory for artifacts
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;         ///< overrides scene.seed and forest.seed
  int threads = 1;
  bool from_truth = false;                   ///< train: derive positives from truth
};

/// Config file (or defaults) with command-line overrides applied.
PipelineConfig resolve_config(const CommandOptions& options);

/// Artifact path resolved against the output directory.
std::filesystem::path artifact(const CommandOptions& options, const std::filesystem::path& path);

std::filesystem::path frame_path(const std::filesystem::path& dir, int frame);
/// Frames named frame_NNNN.pgm (or .png) in index order.
std::vector<GrayImage> load_frames(const std::filesystem::path& dir);

/// Each returns the process exit status and writes progress to `log`.
int cmd_gen(const CommandOptions& options, std::ostream& log);
int cmd_detect(const CommandOptions& options, std::ostream& log);
int cmd_train(const CommandOptions& options, std::ostream& log);
int cmd_track(const CommandOptions& options, std::ostream& log);
int cmd_eval(const CommandOptions& options, std::ostream& log);
int cmd_render(const CommandOptions& options, std::ostream& log);

}  // namespace ellitrack::cli
