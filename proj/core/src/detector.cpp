#include "ellitrack/detector.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <numbers>
#include <set>
#include <tuple>

#include "ellitrack/error.hpp"
#include "ellitrack/parallel.hpp"

namespace ellitrack {

namespace {

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

int good_fft_size(int n) {
  for (int m = std::max(n, 1);; ++m) {
    int r = m;
    for (int p : {2, 3, 5, 7}) {
      while (r % p == 0) r /= p;
    }
    if (r == 1) return m;
  }
}

bool detection_before(const Detection& l, const Detection& r) {
  if (l.fit != r.fit) return l.fit > r.fit;
  return std::tie(l.center.y, l.center.x, l.half_extents.a, l.half_extents.b, l.orientation) <
         std::tie(r.center.y, r.center.x, r.half_extents.a, r.half_extents.b, r.orientation);
}

// Weights of the bilinear taps that extract_patch + fit_value apply around an
// integer centre.
struct Stencil {
  std::vector<std::pair<std::array<int, 2>, double>> taps;
  int radius = 0;
};

Stencil make_stencil(const DelKernel& kernel, double orientation) {
  std::map<std::array<int, 2>, double> acc;
  const double c = std::cos(orientation);
  const double s = std::sin(orientation);
  for (int v = -kernel.half_h; v <= kernel.half_h; ++v) {
    for (int u = -kernel.half_w; u <= kernel.half_w; ++u) {
      const double w = kernel.at(u, v);
      const double px = u * c - v * s;
      const double py = u * s + v * c;
      const double fx0 = std::floor(px);
      const double fy0 = std::floor(py);
      const double fx = px - fx0;
      const double fy = py - fy0;
      const int ix = static_cast<int>(fx0);
      const int iy = static_cast<int>(fy0);
      acc[{ix, iy}] += w * (1.0 - fx) * (1.0 - fy);
      acc[{ix + 1, iy}] += w * fx * (1.0 - fy);
      acc[{ix, iy + 1}] += w * (1.0 - fx) * fy;
      acc[{ix + 1, iy + 1}] += w * fx * fy;
    }
  }
  Stencil st;
  for (const auto& [off, w] : acc) {
    if (w == 0.0) continue;
    st.taps.push_back({off, w});
    st.radius = std::max({st.radius, std::abs(off[0]), std::abs(off[1])});
  }
  return st;
}

}  // namespace

std::vector<std::string> DetectorConfig::validate() const {
  const auto fail = [](const std::string& key, const std::string& what) {
    throw ConfigError("detector." + key + ": " + what);
  };
  if (!(nominal_a > 0.0) || !std::isfinite(nominal_a)) fail("nominal_a", "must be positive");
  if (!(nominal_b > 0.0) || !std::isfinite(nominal_b)) fail("nominal_b", "must be positive");
  if (size_range < 0) fail("size_range", "must be >= 0");
  if (!(nominal_a - size_range > 0.0) || !(nominal_b - size_range > 0.0)) {
    fail("size_range", "nominal size minus size_range must stay positive");
  }
  if (!(k > 0.0 && k < 1.0)) fail("k", "must lie in (0, 1)");
  if (!(lambda0 > 0.0 && lambda0 <= 1.0)) fail("lambda0", "must lie in (0, 1]");
  if (!(tau >= 0.0)) fail("tau", "must be >= 0");
  if (iterations < 1) fail("iterations", "must be >= 1");
  if (!(lambda0 - (iterations - 1) * tau > 0.0)) fail("tau", "threshold of the last iteration must stay positive");
  if (n_orientations < 1) fail("n_orientations", "must be >= 1");
  if (scan_stride < 1) fail("scan_stride", "must be >= 1");
  if (!(nms_iou >= 0.0 && nms_iou <= 1.0)) fail("nms_iou", "must lie in [0, 1]");
  if (!(processed_overlap >= 0.0 && processed_overlap <= 1.0)) fail("processed_overlap", "must lie in [0, 1]");
  if (threads < 1) fail("threads", "must be >= 1");

  std::vector<std::string> warnings;
  if (lambda0 < 0.75 || lambda0 > 0.85) {
    warnings.push_back("detector.lambda0 = " + std::to_string(lambda0) + " is outside the recommended [0.75, 0.85]");
  }
  if (iterations > 1 && (tau < 0.01 || tau > 0.02)) {
    warnings.push_back("detector.tau = " + std::to_string(tau) + " is outside the recommended [0.01, 0.02]");
  }
  return warnings;
}

double fit_value(const DelKernel& kernel, const Patch& patch) {
  if (patch.data.width() != kernel.width() || patch.data.height() != kernel.height()) {
    throw ContractError("fit_value: patch is " + std::to_string(patch.data.width()) + "x" +
                        std::to_string(patch.data.height()) + ", kernel is " + std::to_string(kernel.width()) +
                        "x" + std::to_string(kernel.height()));
  }
  const auto t = patch.data.data();
  // Zero-sum kernel: measuring against t[0] changes nothing but makes flat patches score exactly 0.
  double sum = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) sum += kernel.samples[i] * (t[i] - t[0]);
  return sum;
}

// --- ScanPlan -----------------------------------------------------------------

struct ScanPlan::Impl {
  DetectorConfig config;
  int width = 0;
  int height = 0;
  int radius = 0;
  int nx = 0;
  int ny = 0;
  std::vector<ScanShape> shapes;
  std::vector<std::size_t> kernel_of_shape;
  std::vector<DelKernel> kernels;
  std::vector<Stencil> stencils;
  std::size_t cache_slots = 0;
  mutable std::vector<std::vector<std::complex<double>>> spectra;
  std::vector<std::complex<double>> image_spectrum;
  bool loaded = false;
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;

  std::size_t spectrum_size() const { return static_cast<std::size_t>(ny) * (nx / 2 + 1); }

  std::vector<std::complex<double>> transform(std::vector<double>& real) const {
    std::vector<std::complex<double>> out(spectrum_size());
    fftw_execute_dft_r2c(forward, real.data(), reinterpret_cast<fftw_complex*>(out.data()));
    return out;
  }

  std::vector<std::complex<double>> kernel_spectrum(std::size_t shape) const {
    std::vector<double> real(static_cast<std::size_t>(nx) * ny, 0.0);
    for (const auto& [off, w] : stencils[shape].taps) {
      const int ix = ((-off[0]) % nx + nx) % nx;
      const int iy = ((-off[1]) % ny + ny) % ny;
      real[static_cast<std::size_t>(iy) * nx + ix] += w;
    }
    return transform(real);
  }
};

ScanPlan::ScanPlan(const DetectorConfig& config, int width, int height) : impl_(std::make_unique<Impl>()) {
  config.validate();
  if (width < 1 || height < 1) throw ContractError("ScanPlan: image must be non-empty");
  Impl& p = *impl_;
  p.config = config;
  p.width = width;
  p.height = height;
  for (int da = -config.size_range; da <= config.size_range; ++da) {
    for (int db = -config.size_range; db <= config.size_range; ++db) {
      const Extents ext{config.nominal_a + da, config.nominal_b + db};
      p.kernels.push_back(build_kernel(ext.a, ext.b, config.k));
      for (int o = 0; o < config.n_orientations; ++o) {
        const double theta = std::numbers::pi * o / config.n_orientations;
        p.shapes.push_back({ext, theta});
        p.kernel_of_shape.push_back(p.kernels.size() - 1);
        p.stencils.push_back(make_stencil(p.kernels.back(), theta));
        p.radius = std::max(p.radius, p.stencils.back().radius);
      }
    }
  }
  p.nx = good_fft_size(width + 2 * p.radius);
  p.ny = good_fft_size(height + 2 * p.radius);
  const std::size_t bytes = p.spectrum_size() * sizeof(std::complex<double>);
  p.cache_slots = std::min(p.shapes.size(), config.spectrum_cache_mb * 1024 * 1024 / std::max<std::size_t>(bytes, 1));
  p.spectra.resize(p.shapes.size());

  std::vector<double> real(static_cast<std::size_t>(p.nx) * p.ny);
  std::vector<std::complex<double>> cplx(p.spectrum_size());
  std::lock_guard lock(fftw_planner_mutex());
  // FFTW_ESTIMATE keeps plan selection, and therefore rounding, identical across runs.
  p.forward = fftw_plan_dft_r2c_2d(p.ny, p.nx, real.data(), reinterpret_cast<fftw_complex*>(cplx.data()),
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
  p.inverse = fftw_plan_dft_c2r_2d(p.ny, p.nx, reinterpret_cast<fftw_complex*>(cplx.data()), real.data(),
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!p.forward || !p.inverse) throw Error("ScanPlan: FFTW planning failed");
}

ScanPlan::~ScanPlan() {
  if (!impl_) return;
  std::lock_guard lock(fftw_planner_mutex());
  if (impl_->forward) fftw_destroy_plan(impl_->forward);
  if (impl_->inverse) fftw_destroy_plan(impl_->inverse);
}

int ScanPlan::width() const { return impl_->width; }
int ScanPlan::height() const { return impl_->height; }
const std::vector<ScanShape>& ScanPlan::shapes() const { return impl_->shapes; }
const DelKernel& ScanPlan::kernel_for(std::size_t shape) const {
  return impl_->kernels[impl_->kernel_of_shape.at(shape)];
}

bool ScanPlan::matches(const DetectorConfig& c) const {
  const DetectorConfig& o = impl_->config;
  return c.nominal_a == o.nominal_a && c.nominal_b == o.nominal_b && c.size_range == o.size_range && c.k == o.k &&
         c.n_orientations == o.n_orientations;
}

void ScanPlan::load(const GrayImage& image) {
  Impl& p = *impl_;
  if (image.width() != p.width || image.height() != p.height) {
    throw ContractError("ScanPlan::load: image is " + std::to_string(image.width()) + "x" +
                        std::to_string(image.height()) + ", plan is " + std::to_string(p.width) + "x" +
                        std::to_string(p.height));
  }
  std::vector<double> real(static_cast<std::size_t>(p.nx) * p.ny, 0.0);
  const int pw = p.width + 2 * p.radius;
  const int ph = p.height + 2 * p.radius;
  for (int y = 0; y < ph; ++y) {
    for (int x = 0; x < pw; ++x) {
      real[static_cast<std::size_t>(y) * p.nx + x] = image.clamped(x - p.radius, y - p.radius);
    }
  }
  p.image_spectrum = p.transform(real);
  p.loaded = true;
}

std::vector<double> ScanPlan::response(std::size_t shape) const {
  const Impl& p = *impl_;
  if (!p.loaded) throw ContractError("ScanPlan::response: no image loaded");
  if (shape >= p.shapes.size()) throw ContractError("ScanPlan::response: shape index out of range");
  std::vector<std::complex<double>> local;
  const std::vector<std::complex<double>>* ks = nullptr;
  if (shape < p.cache_slots) {
    if (p.spectra[shape].empty()) p.spectra[shape] = p.kernel_spectrum(shape);
    ks = &p.spectra[shape];
  } else {
    local = p.kernel_spectrum(shape);
    ks = &local;
  }
  std::vector<std::complex<double>> prod(p.spectrum_size());
  for (std::size_t i = 0; i < prod.size(); ++i) prod[i] = p.image_spectrum[i] * (*ks)[i];
  std::vector<double> real(static_cast<std::size_t>(p.nx) * p.ny);
  fftw_execute_dft_c2r(p.inverse, reinterpret_cast<fftw_complex*>(prod.data()), real.data());
  const double scale = 1.0 / (static_cast<double>(p.nx) * p.ny);
  std::vector<double> out(static_cast<std::size_t>(p.width) * p.height);
  for (int y = 0; y < p.height; ++y) {
    for (int x = 0; x < p.width; ++x) {
      out[static_cast<std::size_t>(y) * p.width + x] =
          real[static_cast<std::size_t>(y + p.radius) * p.nx + (x + p.radius)] * scale;
    }
  }
  return out;
}

// --- scanning -----------------------------------------------------------------

namespace {

// Answers "is this footprint too close to processed pixels" quickly for the
// common case of an untouched neighbourhood.
class FootprintGuard {
 public:
  FootprintGuard(const PixelMask& processed, int width, int height, double tolerance)
      : processed_(processed), width_(width), height_(height), tolerance_(tolerance) {
    active_ = processed.width() > 0 && processed.any();
    if (!active_) return;
    integral_.assign(static_cast<std::size_t>(width + 1) * (height + 1), 0);
    for (int y = 0; y < height; ++y) {
      int row = 0;
      for (int x = 0; x < width; ++x) {
        row += processed.contains(x, y) ? 1 : 0;
        integral_[idx(x + 1, y + 1)] = integral_[idx(x + 1, y)] + row;
      }
    }
  }

  bool blocked(int cx, int cy, const ScanShape& shape) const {
    if (!active_) return false;
    const double r = std::max(shape.half_extents.a, shape.half_extents.b);
    const int x0 = std::clamp(static_cast<int>(std::floor(cx - r)), 0, width_);
    const int y0 = std::clamp(static_cast<int>(std::floor(cy - r)), 0, height_);
    const int x1 = std::clamp(static_cast<int>(std::ceil(cx + r)) + 1, 0, width_);
    const int y1 = std::clamp(static_cast<int>(std::ceil(cy + r)) + 1, 0, height_);
    if (x1 <= x0 || y1 <= y0) return false;
    const int box = integral_[idx(x1, y1)] - integral_[idx(x0, y1)] - integral_[idx(x1, y0)] + integral_[idx(x0, y0)];
    if (box == 0) return false;
    const double c = std::cos(shape.orientation);
    const double s = std::sin(shape.orientation);
    const double a2 = shape.half_extents.a * shape.half_extents.a;
    const double b2 = shape.half_extents.b * shape.half_extents.b;
    int area = 0;
    int hit = 0;
    for (int y = static_cast<int>(std::floor(cy - r)); y <= static_cast<int>(std::ceil(cy + r)); ++y) {
      for (int x = static_cast<int>(std::floor(cx - r)); x <= static_cast<int>(std::ceil(cx + r)); ++x) {
        const double dx = x - cx;
        const double dy = y - cy;
        const double u = dx * c + dy * s;
        const double v = -dx * s + dy * c;
        if (u * u / a2 + v * v / b2 > 1.0) continue;
        ++area;
        if (processed_.contains(x, y)) ++hit;
      }
    }
    return hit > 0 && static_cast<double>(hit) > tolerance_ * area;
  }

 private:
  std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y) * (width_ + 1) + x; }

  const PixelMask& processed_;
  int width_;
  int height_;
  double tolerance_;
  bool active_ = false;
  std::vector<int> integral_;
};

}  // namespace

std::vector<Detection> scan(const GrayImage& image, const DetectorConfig& config, double threshold,
                            const PixelMask& processed, ScanPlan* plan) {
  config.validate();
  if (processed.width() > 0 &&
      (processed.x0() != 0 || processed.y0() != 0 || processed.width() != image.width() ||
       processed.height() != image.height())) {
    throw ContractError("scan: processed mask must cover exactly the image");
  }
  if (image.empty()) return {};
  std::unique_ptr<ScanPlan> own;
  if (!plan || plan->width() != image.width() || plan->height() != image.height() || !plan->matches(config)) {
    own = std::make_unique<ScanPlan>(config, image.width(), image.height());
    plan = own.get();
  }
  plan->load(image);
  const FootprintGuard guard(processed, image.width(), image.height(), config.processed_overlap);
  const auto& shapes = plan->shapes();
  const int w = image.width();
  const int h = image.height();
  const int stride = config.scan_stride;
  // The FFT map only preselects; every reported value is recomputed exactly.
  constexpr double slack = 1e-6;

  std::vector<std::vector<Detection>> per_shape(shapes.size());
  parallel_for(shapes.size(), config.threads, [&](std::size_t si) {
    const ScanShape& shape = shapes[si];
    const std::vector<double> resp = plan->response(si);
    const auto at = [&](int x, int y) { return resp[static_cast<std::size_t>(y) * w + x]; };
    std::set<std::pair<int, int>> refined;
    for (int y = 0; y < h; y += stride) {
      for (int x = 0; x < w; x += stride) {
        if (at(x, y) <= threshold - slack) continue;
        if (guard.blocked(x, y, shape)) continue;
        int bx = x, by = y;
        double best = at(x, y);
        for (int dy = -stride; dy <= stride; ++dy) {
          for (int dx = -stride; dx <= stride; ++dx) {
            const int qx = x + dx;
            const int qy = y + dy;
            if (qx < 0 || qy < 0 || qx >= w || qy >= h) continue;
            if (at(qx, qy) > best && !guard.blocked(qx, qy, shape)) {
              best = at(qx, qy);
              bx = qx;
              by = qy;
            }
          }
        }
        refined.insert({by, bx});
      }
    }
    const DelKernel& kernel = plan->kernel_for(si);
    for (const auto& [y, x] : refined) {
      const Point2 center{static_cast<double>(x), static_cast<double>(y)};
      const double fit = fit_value(kernel, extract_patch(image, center, shape.half_extents, shape.orientation));
      if (!(fit > threshold)) continue;
      Detection d;
      d.center = center;
      d.half_extents = shape.half_extents;
      d.orientation = shape.orientation;
      d.fit = fit;
      per_shape[si].push_back(d);
    }
  });

  std::vector<Detection> hits;
  for (auto& v : per_shape) hits.insert(hits.end(), v.begin(), v.end());
  std::sort(hits.begin(), hits.end(), detection_before);
  return hits;
}

std::vector<Detection> suppress_overlaps(std::vector<Detection> hits, double nms_iou) {
  std::stable_sort(hits.begin(), hits.end(), detection_before);
  std::vector<Detection> kept;
  std::vector<PixelMask> kept_masks;
  for (const Detection& d : hits) {
    PixelMask m = rasterize_ellipse(d.center, d.half_extents, d.orientation);
    bool keep = true;
    for (const PixelMask& k : kept_masks) {
      if (k.x0() >= m.x0() + m.width() || m.x0() >= k.x0() + k.width() || k.y0() >= m.y0() + m.height() ||
          m.y0() >= k.y0() + k.height()) {
        continue;
      }
      if (mask_iou(m, k) > nms_iou) {
        keep = false;
        break;
      }
    }
    if (!keep) continue;
    kept.push_back(d);
    kept_masks.push_back(std::move(m));
  }
  return kept;
}

Segmenter vm_acm_segmenter(double k, SegmenterParams params) {
  return [k, params](const GrayImage& image, const Detection& det) { return segment(image, det, k, params); };
}

Segmenter ellipse_segmenter() {
  return [](const GrayImage&, const Detection& det) {
    return make_segment_mask(rasterize_ellipse(det.center, det.half_extents, det.orientation));
  };
}

namespace {

PixelMask clip_to_frame(const PixelMask& m, int width, int height) {
  PixelMask out(0, 0, width, height);
  out.merge(m);
  return out;
}

}  // namespace

std::vector<SegmentedDetection> detect_iterative(const GrayImage& image, const DetectorConfig& config,
                                                 const Segmenter& segmenter, int frame, ScanPlan* plan) {
  config.validate();
  if (!segmenter) throw ContractError("detect_iterative: no segmenter supplied");
  const int w = image.width();
  const int h = image.height();
  std::vector<SegmentedDetection> out;
  if (image.empty()) return out;
  std::unique_ptr<ScanPlan> own;
  if (!plan || plan->width() != w || plan->height() != h || !plan->matches(config)) {
    own = std::make_unique<ScanPlan>(config, w, h);
    plan = own.get();
  }
  std::vector<double> working(image.data().begin(), image.data().end());
  PixelMask processed(0, 0, w, h);

  for (int it = 0; it < config.iterations; ++it) {
    const double threshold = config.threshold(it);
    const GrayImage work(w, h, working);
    const std::vector<Detection> kept = suppress_overlaps(scan(work, config, threshold, processed, plan), config.nms_iou);
    std::vector<std::optional<SegmentMask>> masks(kept.size());
    parallel_for(kept.size(), config.threads, [&](std::size_t i) { masks[i] = segmenter(work, kept[i]); });
    for (std::size_t i = 0; i < kept.size(); ++i) {
      if (!masks[i]) continue;
      PixelMask m = clip_to_frame(masks[i]->pixels, w, h);
      m.subtract(processed);
      auto seg = make_segment_mask(m);
      if (!seg) continue;
      processed.merge(seg->pixels);
      Detection d = kept[i];
      d.frame = frame;
      d.iteration = it;
      out.push_back({d, std::move(*seg)});
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (processed.local(x, y)) working[static_cast<std::size_t>(y) * w + x] = 0.0;
      }
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const SegmentedDetection& l, const SegmentedDetection& r) {
    return detection_before(l.detection, r.detection);
  });
  return out;
}

}  // namespace ellitrack
