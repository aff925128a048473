#include "ellitrack/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "ellitrack/error.hpp"

namespace ellitrack {

namespace {

double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ContractError("feature vectors of different length");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

void require_nonempty(const SegmentMask& mask, const char* op) {
  if (mask.area == 0 || mask.pixels.width() == 0) throw ContractError(std::string(op) + ": empty mask");
}

}  // namespace

double oriented_axis(const SegmentMask& mask) {
  require_nonempty(mask, "oriented_axis");
  const double theta = mask.principal_axis;
  const double ex = std::cos(theta);
  const double ey = std::sin(theta);
  double m3 = 0.0;
  double scale = 0.0;
  const PixelMask& px = mask.pixels;
  for (int ly = 0; ly < px.height(); ++ly) {
    for (int lx = 0; lx < px.width(); ++lx) {
      if (!px.local(lx, ly)) continue;
      const double p = (px.x0() + lx - mask.centroid.x) * ex + (px.y0() + ly - mask.centroid.y) * ey;
      m3 += p * p * p;
      scale += std::abs(p * p * p);
    }
  }
  if (m3 < -1e-9 * std::max(scale, 1.0)) return theta + std::numbers::pi;
  return theta;
}

RayFeatures ray_descriptor(const SegmentMask& mask, int rays) {
  require_nonempty(mask, "ray_descriptor");
  if (rays < 8) throw ContractError("ray_descriptor: at least 8 rays required");
  const double theta0 = oriented_axis(mask);
  const PixelMask& px = mask.pixels;
  const double reach = std::hypot(px.width(), px.height()) + 1.0;
  constexpr double step = 0.25;
  RayFeatures out;
  out.distances.resize(rays);
  for (int r = 0; r < rays; ++r) {
    const double ang = theta0 + 2.0 * std::numbers::pi * r / rays;
    const double dx = std::cos(ang);
    const double dy = std::sin(ang);
    double last = 0.0;
    for (double t = 0.0; t <= reach; t += step) {
      const int x = static_cast<int>(std::lround(mask.centroid.x + t * dx));
      const int y = static_cast<int>(std::lround(mask.centroid.y + t * dy));
      if (px.contains(x, y)) last = t;
    }
    out.distances[r] = last;
  }
  double mean = 0.0;
  for (double d : out.distances) mean += d;
  mean /= rays;
  out.norm = mean;
  for (double& d : out.distances) d = mean > 0.0 ? d / mean : 1.0;
  out.diffs.resize(rays);
  for (int r = 0; r < rays; ++r) out.diffs[r] = out.distances[(r + 1) % rays] - out.distances[r];
  return out;
}

std::vector<double> texture_histogram(const GrayImage& image, const SegmentMask& mask, int bins) {
  require_nonempty(mask, "texture_histogram");
  if (bins < 2) throw ContractError("texture_histogram: at least 2 bins required");
  std::vector<double> hist(bins, 0.0);
  std::size_t n = 0;
  const PixelMask& px = mask.pixels;
  for (int ly = 0; ly < px.height(); ++ly) {
    for (int lx = 0; lx < px.width(); ++lx) {
      if (!px.local(lx, ly)) continue;
      const int x = px.x0() + lx;
      const int y = px.y0() + ly;
      if (x < 0 || y < 0 || x >= image.width() || y >= image.height()) continue;
      const int b = std::min(bins - 1, static_cast<int>(std::floor(image.at(x, y) * bins)));
      hist[b] += 1.0;
      ++n;
    }
  }
  if (n == 0) throw ContractError("texture_histogram: mask lies outside the image");
  for (double& h : hist) h /= static_cast<double>(n);
  return hist;
}

FeatureVector FeatureVector::from_values(const std::array<double, kFeatureCount>& v) {
  return {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]};
}

const std::array<const char*, kFeatureCount>& FeatureVector::names() {
  static const std::array<const char*, kFeatureCount> n = {"center_dist",  "iou",          "size_diff",
                                                          "ray_dist_sim", "ray_diff_sim", "ray_norm_sim",
                                                          "texture_dist", "deflection"};
  return n;
}

std::string feature_csv_header() {
  std::string out;
  for (const char* n : FeatureVector::names()) {
    if (!out.empty()) out += ',';
    out += n;
  }
  return out;
}

std::string to_csv_row(const FeatureVector& fv) {
  std::ostringstream os;
  os.precision(17);
  bool first = true;
  for (double v : fv.values()) {
    if (!first) os << ',';
    os << v;
    first = false;
  }
  return os.str();
}

ObjectDescriptor describe(const GrayImage& image, const Detection& detection, const SegmentMask& mask,
                          const FeatureParams& params) {
  return {detection, mask, ray_descriptor(mask, params.rays), texture_histogram(image, mask, params.bins)};
}

FeatureVector pair_features(const ObjectDescriptor& i, const ObjectDescriptor& j) {
  FeatureVector fv;
  fv.center_dist = std::hypot(i.mask.centroid.x - j.mask.centroid.x, i.mask.centroid.y - j.mask.centroid.y);
  fv.iou = mask_iou(i.mask.pixels, j.mask.pixels);
  const double ai = static_cast<double>(i.mask.area);
  const double aj = static_cast<double>(j.mask.area);
  fv.size_diff = std::abs(ai - aj) / std::max(ai, aj);
  fv.ray_dist_sim = euclidean(i.rays.distances, j.rays.distances);
  fv.ray_diff_sim = euclidean(i.rays.diffs, j.rays.diffs);
  fv.ray_norm_sim = std::abs(i.rays.norm - j.rays.norm);
  fv.texture_dist = euclidean(i.histogram, j.histogram);
  double d = std::fmod(std::abs(i.mask.principal_axis - j.mask.principal_axis), std::numbers::pi);
  fv.deflection = std::min(d, std::numbers::pi - d);
  return fv;
}

}  // namespace ellitrack
