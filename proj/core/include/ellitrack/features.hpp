#pragma once

#include <array>
#include <string>
#include <vector>

#include "ellitrack/detection.hpp"
#include "ellitrack/raster.hpp"
#include "ellitrack/segmenter.hpp"

namespace ellitrack {

/// Centroid-to-boundary ray lengths anchored to the principal axis.
struct RayFeatures {
  std::vector<double> distances;  ///< normalised by their mean
  std::vector<double> diffs;      ///< distances[(r+1) % R] - distances[r]
  double norm = 0.0;              ///< mean raw ray length in pixels
};

/// Principal axis direction in [0, 2pi), resolved toward the side with the
/// positive third central moment.
double oriented_axis(const SegmentMask& mask);

RayFeatures ray_descriptor(const SegmentMask& mask, int rays = 16);

/// Normalised intensity histogram of the mask pixels of `image`
/// (image coordinates), bins uniform over [0, 1].
std::vector<double> texture_histogram(const GrayImage& image, const SegmentMask& mask, int bins = 16);

inline constexpr std::size_t kFeatureCount = 8;

struct FeatureVector {
  double center_dist = 0.0;
  double iou = 0.0;
  double size_diff = 0.0;
  double ray_dist_sim = 0.0;
  double ray_diff_sim = 0.0;
  double ray_norm_sim = 0.0;
  double texture_dist = 0.0;
  double deflection = 0.0;

  std::array<double, kFeatureCount> values() const {
    return {center_dist, iou, size_diff, ray_dist_sim, ray_diff_sim, ray_norm_sim, texture_dist, deflection};
  }
  static FeatureVector from_values(const std::array<double, kFeatureCount>& v);
  static const std::array<const char*, kFeatureCount>& names();

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

std::string feature_csv_header();
std::string to_csv_row(const FeatureVector& fv);

struct FeatureParams {
  int rays = 16;
  int bins = 16;
};

/// Everything pair_features needs about one object, computed once.
struct ObjectDescriptor {
  Detection detection;
  SegmentMask mask;
  RayFeatures rays;
  std::vector<double> histogram;
};

ObjectDescriptor describe(const GrayImage& image, const Detection& detection, const SegmentMask& mask,
                          const FeatureParams& params = {});

FeatureVector pair_features(const ObjectDescriptor& i, const ObjectDescriptor& j);

}  // namespace ellitrack
