#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ellitrack/dei.hpp"
#include "ellitrack/detection.hpp"
#include "ellitrack/raster.hpp"
#include "ellitrack/segmenter.hpp"

namespace ellitrack {

struct DetectorConfig {
  double nominal_a = 10.0;
  double nominal_b = 5.0;
  int size_range = 2;  ///< c: semi-axes swept over nominal +- c in unit steps
  double k = 0.9;
  double lambda0 = 0.82;
  double tau = 0.01;
  int iterations = 4;
  int n_orientations = 8;
  int scan_stride = 2;
  double nms_iou = 0.3;
  /// A position is skipped when more than this fraction of its ellipse
  /// footprint is already processed. 0 skips on any intersection.
  double processed_overlap = 0.3;
  int threads = 1;
  /// Upper bound on memory spent caching kernel spectra.
  std::size_t spectrum_cache_mb = 256;

  /// Throws ConfigError naming the offending field; returns advisory
  /// warnings for values outside the recommended ranges.
  std::vector<std::string> validate() const;

  double threshold(int iteration) const { return lambda0 - iteration * tau; }
};

/// Sum of kernel * patch over the grid. Throws ContractError on a size mismatch.
double fit_value(const DelKernel& kernel, const Patch& patch);

/// One template of the sweep.
struct ScanShape {
  Extents half_extents;
  double orientation = 0.0;
};

/// Precomputed kernels, correlation stencils and FFT plans for scanning
/// images of one size. Reusable across frames and iterations; not thread-safe
/// to share between concurrent scans.
class ScanPlan {
 public:
  ScanPlan(const DetectorConfig& config, int width, int height);
  ~ScanPlan();
  ScanPlan(const ScanPlan&) = delete;
  ScanPlan& operator=(const ScanPlan&) = delete;

  int width() const;
  int height() const;
  const std::vector<ScanShape>& shapes() const;
  const DelKernel& kernel_for(std::size_t shape) const;

  /// Transforms `image` (which must match the plan size) for later calls to response().
  void load(const GrayImage& image);
  /// Full-resolution fit map of one shape at integer centres of the loaded
  /// image. Distinct shapes may be evaluated concurrently.
  std::vector<double> response(std::size_t shape) const;
  bool matches(const DetectorConfig& config) const;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

/// Refined hits with fit > threshold before overlap suppression, sorted by
/// fit (descending) then position. `processed` must be a frame-sized mask
/// anchored at (0, 0), or empty.
std::vector<Detection> scan(const GrayImage& image, const DetectorConfig& config, double threshold,
                            const PixelMask& processed, ScanPlan* plan = nullptr);

/// Greedy suppression in descending fit order using ellipse-footprint IoU.
std::vector<Detection> suppress_overlaps(std::vector<Detection> hits, double nms_iou);

using Segmenter = std::function<std::optional<SegmentMask>(const GrayImage&, const Detection&)>;

/// Level-set segmentation seeded by the detection.
Segmenter vm_acm_segmenter(double k, SegmenterParams params = {});
/// Uses the detection's own ellipse as the mask.
Segmenter ellipse_segmenter();

struct SegmentedDetection {
  Detection detection;
  SegmentMask mask;
};

/// Iterative detection with a decreasing threshold. Pixels claimed by earlier
/// segmentations are zeroed in a working copy of the image before each scan,
/// and every returned mask is disjoint from all others.
std::vector<SegmentedDetection> detect_iterative(const GrayImage& image, const DetectorConfig& config,
                                                 const Segmenter& segmenter, int frame = 0,
                                                 ScanPlan* plan = nullptr);

}  // namespace ellitrack
