#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace ellitrack {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Semi-axes of an ellipse (or half-sizes of its bounding rectangle).
struct Extents {
  double a = 0.0;
  double b = 0.0;
  friend bool operator==(const Extents&, const Extents&) = default;
};

/// Row-major grayscale raster with intensities in [0, 1]. Immutable once built.
class GrayImage {
 public:
  GrayImage() = default;
  /// Throws ContractError when data.size() != width*height or a value lies outside [0, 1].
  GrayImage(int width, int height, std::vector<double> data);

  static GrayImage filled(int width, int height, double value);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }
  std::span<const double> data() const { return data_; }

  double at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  /// Clamp-to-edge access.
  double clamped(int x, int y) const;
  /// Bilinear sample at a subpixel location with clamp-to-edge borders.
  double bilinear(double x, double y) const;

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// Oriented rectangle resampled from a parent image. Local sample (u, v),
/// u in [-ceil(a), ceil(a)], v in [-ceil(b), ceil(b)], sits at column
/// u + ceil(a), row v + ceil(b), and maps to the parent point
/// origin + R(orientation) * (u, v).
struct Patch {
  Point2 origin;
  Extents half_extents;
  double orientation = 0.0;
  GrayImage data;
};

int grid_half(double extent);

Patch extract_patch(const GrayImage& image, Point2 center, Extents half_extents, double orientation);

struct PixelRun {
  int y = 0;
  int x = 0;
  int length = 0;
  friend bool operator==(const PixelRun&, const PixelRun&) = default;
};

/// Binary mask over an axis-aligned window [x0, x0+width) x [y0, y0+height)
/// of an image. A window anchored at (0, 0) with the image size doubles as a
/// frame-sized bitmap.
class PixelMask {
 public:
  PixelMask() = default;
  PixelMask(int x0, int y0, int width, int height);

  int x0() const { return x0_; }
  int y0() const { return y0_; }
  int width() const { return width_; }
  int height() const { return height_; }

  bool contains(int x, int y) const;
  void set(int x, int y, bool value = true);
  std::size_t count() const;
  bool any() const { return count() > 0; }

  std::uint8_t local(int lx, int ly) const { return bits_[static_cast<std::size_t>(ly) * width_ + lx]; }
  std::uint8_t& local(int lx, int ly) { return bits_[static_cast<std::size_t>(ly) * width_ + lx]; }

  /// Smallest window containing every set pixel (empty mask -> 0x0 window at origin).
  PixelMask cropped() const;
  /// Largest 4-connected component; ties resolved toward the first pixel in raster order.
  PixelMask largest_component() const;
  std::size_t intersection_count(const PixelMask& other) const;
  /// Sets every pixel of `other` that falls inside this window.
  void merge(const PixelMask& other);
  /// Clears every pixel set in `other`.
  void subtract(const PixelMask& other);

  std::vector<PixelRun> runs() const;
  static PixelMask from_runs(std::span<const PixelRun> runs);

  friend bool operator==(const PixelMask&, const PixelMask&) = default;

 private:
  int x0_ = 0;
  int y0_ = 0;
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Pixelwise intersection-over-union; two empty masks give 0.
double mask_iou(const PixelMask& lhs, const PixelMask& rhs);

/// Pixels whose centers satisfy the rotated-ellipse inequality.
PixelMask rasterize_ellipse(Point2 center, Extents axes, double orientation);

// --- sequence I/O ---------------------------------------------------------

/// Expands a glob pattern; results sorted lexicographically.
std::vector<std::filesystem::path> expand_pattern(const std::string& pattern);

/// Frames matching `pattern` (binary PGM, or grayscale PNG when built with
/// PNG support) in lexicographic filename order, intensities divided by the
/// format maximum.
std::vector<GrayImage> load_sequence(const std::string& pattern);

GrayImage read_image(const std::filesystem::path& path);
GrayImage read_pgm(const std::filesystem::path& path);
/// Writes binary P5 with the given maxval (255 or 65535); values are rounded.
void write_pgm(const std::filesystem::path& path, const GrayImage& image, int maxval = 65535);

bool png_supported();
GrayImage read_png(const std::filesystem::path& path);
/// 8-bit grayscale PNG encoding of `image`. Throws IoError without PNG support.
std::vector<std::uint8_t> encode_png(const GrayImage& image);

}  // namespace ellitrack
