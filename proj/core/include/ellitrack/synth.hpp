#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ellitrack/raster.hpp"

namespace ellitrack {

enum class Texture { flat, dei_profile, noisy };

Texture parse_texture(const std::string& name);
std::string texture_name(Texture texture);

struct SceneConfig {
  int width = 256;
  int height = 256;
  int n_objects = 20;
  int frames = 60;
  double size_a = 10.0;
  double size_b = 5.0;
  double size_jitter = 1.0;
  double speed_mean = 2.0;
  double speed_jitter = 0.5;
  double turn_sigma = 0.1;
  /// Strength of the pull toward the swarm centroid; also shrinks the
  /// initial placement box. 0 = independent walkers.
  double occlusion_bias = 0.0;
  Texture texture = Texture::dei_profile;
  double noise_sigma = 0.0;
  std::uint64_t seed = 1;

  double background = 0.02;
  double foreground = 1.0;
  /// dei-profile intensity = bg + (fg - bg) * min(1, profile_gain * f / f(0, 0)) inside the ellipse.
  double profile_gain = 4.0;
  double profile_k = 0.9;
  /// Minimum distance between initial centres; 0 disables the constraint.
  double min_separation = 0.0;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

struct ObjectTruth {
  int id = 0;
  Point2 center;
  Extents half_extents;
  double orientation = 0.0;
  bool visible = true;
  std::size_t full_area = 0;  ///< pixels of the unoccluded ellipse inside the frame
  PixelMask mask;             ///< visible pixels after depth ordering
};

struct FrameTruth {
  std::vector<ObjectTruth> objects;
};

struct GroundTruth {
  int width = 0;
  int height = 0;
  std::vector<FrameTruth> frames;
};

struct Scene {
  std::vector<GrayImage> frames;
  GroundTruth truth;
};

/// Seeded random-walk scene. Lower ids are nearer the viewer. An object is
/// invisible when at least 60% of its ellipse is covered by nearer objects.
Scene generate(const SceneConfig& config, int threads = 1);

/// Fraction of unordered object pairs per frame whose full ellipses overlap.
double overlapping_pair_fraction(const GroundTruth& truth);

std::string truth_to_json(const GroundTruth& truth);
/// Throws IoError (with `source` in the message) on malformed input.
GroundTruth truth_from_json(const std::string& text, const std::string& source = "<memory>");
void save_truth(const std::filesystem::path& path, const GroundTruth& truth);
GroundTruth load_truth(const std::filesystem::path& path);

}  // namespace ellitrack
