#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "ellitrack/features.hpp"
#include "ellitrack/forest.hpp"
#include "ellitrack/raster.hpp"
#include "ellitrack/segmenter.hpp"

namespace ellitrack::testing {

/// Image with `fg` on pixels inside the ellipse (pixel-centre test) and `bg` elsewhere.
inline GrayImage ellipse_image(int w, int h, Point2 c, Extents e, double theta, double fg = 1.0, double bg = 0.0) {
  std::vector<double> data(static_cast<std::size_t>(w) * h, bg);
  const double ct = std::cos(theta), st = std::sin(theta);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double dx = x - c.x, dy = y - c.y;
      const double u = dx * ct + dy * st, v = -dx * st + dy * ct;
      if (u * u / (e.a * e.a) + v * v / (e.b * e.b) <= 1.0) data[static_cast<std::size_t>(y) * w + x] = fg;
    }
  }
  return GrayImage(w, h, std::move(data));
}

/// Full-frame mask of the same pixel-centre test, written independently of rasterize_ellipse.
inline PixelMask ellipse_mask(int w, int h, Point2 c, Extents e, double theta) {
  PixelMask m(0, 0, w, h);
  const double ct = std::cos(theta), st = std::sin(theta);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double dx = x - c.x, dy = y - c.y;
      const double u = dx * ct + dy * st, v = -dx * st + dy * ct;
      if (u * u / (e.a * e.a) + v * v / (e.b * e.b) <= 1.0) m.set(x, y);
    }
  }
  return m;
}

inline SegmentMask segment_mask_of(const PixelMask& m) { return *make_segment_mask(m); }

inline ObjectDescriptor descriptor_at(const GrayImage& image, Point2 c, Extents e, double theta) {
  Detection d;
  d.center = c;
  d.half_extents = e;
  d.orientation = theta;
  const SegmentMask mask = segment_mask_of(ellipse_mask(image.width(), image.height(), c, e, theta));
  return describe(image, d, mask);
}

/// 200 samples where only feature 0 (center_dist) separates the classes.
inline std::vector<TrainingSample> separable_samples(int per_class, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<TrainingSample> out;
  for (int i = 0; i < 2 * per_class; ++i) {
    const bool positive = i % 2 == 0;
    std::array<double, kFeatureCount> v{};
    for (double& x : v) x = u(rng);
    v[0] = positive ? u(rng) * 4.0 : 6.0 + u(rng) * 4.0;
    out.push_back({FeatureVector::from_values(v), positive});
  }
  return out;
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("ellitrack-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace ellitrack::testing
