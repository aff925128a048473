#include "ellitrack/segmenter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "ellitrack/error.hpp"

namespace ellitrack {

namespace {

constexpr std::array<std::array<int, 2>, 8> kMooreDirs = {{
    {-1, 0}, {-1, -1}, {0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}}};

int moore_index(int dx, int dy) {
  for (int i = 0; i < 8; ++i) {
    if (kMooreDirs[i][0] == dx && kMooreDirs[i][1] == dy) return i;
  }
  return 0;
}

std::vector<std::array<int, 2>> trace_contour(const PixelMask& mask) {
  std::vector<std::array<int, 2>> contour;
  const auto fg = [&](int x, int y) { return mask.contains(x, y); };
  int sx = 0, sy = 0;
  bool found = false;
  for (int ly = 0; ly < mask.height() && !found; ++ly) {
    for (int lx = 0; lx < mask.width(); ++lx) {
      if (mask.local(lx, ly)) {
        sx = mask.x0() + lx;
        sy = mask.y0() + ly;
        found = true;
        break;
      }
    }
  }
  if (!found) return contour;
  contour.push_back({sx, sy});
  int px = sx, py = sy;
  int back = 0;  // west neighbour of the raster-first pixel is background
  const int start_back = back;
  const std::size_t limit = 4 * mask.count() + 16;
  for (std::size_t step = 0; step < limit; ++step) {
    bool moved = false;
    for (int k = 1; k <= 8; ++k) {
      const int dir = (back + k) % 8;
      const int qx = px + kMooreDirs[dir][0];
      const int qy = py + kMooreDirs[dir][1];
      if (!fg(qx, qy)) continue;
      const int prev = (back + k - 1) % 8;
      const int rx = px + kMooreDirs[prev][0];
      const int ry = py + kMooreDirs[prev][1];
      px = qx;
      py = qy;
      back = moore_index(rx - px, ry - py);
      moved = true;
      break;
    }
    if (!moved) break;  // isolated pixel
    if (px == sx && py == sy && back == start_back) break;
    if (px == sx && py == sy) {
      // Re-entering the start from another side still closes a loop once
      // every boundary pixel has been visited.
      if (contour.size() > 1 && contour[1] == std::array<int, 2>{px, py}) break;
    }
    if (!(px == sx && py == sy)) contour.push_back({px, py});
  }
  return contour;
}

struct RegionStats {
  double w_in = 0.0, s1_in = 0.0, s2_in = 0.0;
  double w_out = 0.0, s1_out = 0.0, s2_out = 0.0;

  double mean_in() const { return s1_in / w_in; }
  double mean_out() const { return s1_out / w_out; }
  double var_in() const { return s2_in / w_in - mean_in() * mean_in(); }
  double var_out() const { return s2_out / w_out - mean_out() * mean_out(); }
};

RegionStats region_stats(std::span<const double> phi, const LevelSet& ls, std::span<const double> t) {
  RegionStats st;
  for (std::size_t p = 0; p < phi.size(); ++p) {
    const double h = heaviside(phi[p], ls.epsilon);
    const double inside = 1.0 - h;
    const double wi = ls.h_in[p] * inside;
    const double wo = ls.h_out[p] * h;
    st.w_in += wi;
    st.s1_in += wi * t[p];
    st.s2_in += wi * t[p] * t[p];
    st.w_out += wo;
    st.s1_out += wo * t[p];
    st.s2_out += wo * t[p] * t[p];
  }
  return st;
}

double energy_of(std::span<const double> phi, const LevelSet& ls, std::span<const double> t) {
  const RegionStats st = region_stats(phi, ls, t);
  return ls.lambda1 * st.var_in() + ls.lambda2 * st.var_out();
}

void check_dims(const LevelSet& ls, const GrayImage& window) {
  const std::size_t n = static_cast<std::size_t>(ls.width) * ls.height;
  if (window.width() != ls.width || window.height() != ls.height || ls.phi.size() != n ||
      ls.h_in.size() != n || ls.h_out.size() != n) {
    throw ContractError("level set and window dimensions disagree");
  }
}

double robust_length(double x, double y) {
  const double m = std::max(std::abs(x), std::abs(y));
  if (m == 0.0) return 0.0;
  return m * std::hypot(x / m, y / m);
}

// Distance from (y0, y1), both >= 0, to the ellipse with semi-axes e0 >= e1.
double distance_first_quadrant(double e0, double e1, double y0, double y1) {
  if (y1 > 0.0) {
    if (y0 > 0.0) {
      const double z0 = y0 / e0;
      const double z1 = y1 / e1;
      double g = z0 * z0 + z1 * z1 - 1.0;
      if (g == 0.0) return 0.0;
      const double r0 = (e0 / e1) * (e0 / e1);
      const double n0 = r0 * z0;
      double s0 = z1 - 1.0;
      double s1 = g < 0.0 ? 0.0 : robust_length(n0, z1) - 1.0;
      double s = 0.0;
      for (int i = 0; i < 256; ++i) {
        s = 0.5 * (s0 + s1);
        if (s == s0 || s == s1) break;
        const double q0 = n0 / (s + r0);
        const double q1 = z1 / (s + 1.0);
        g = q0 * q0 + q1 * q1 - 1.0;
        if (g > 0.0) {
          s0 = s;
        } else if (g < 0.0) {
          s1 = s;
        } else {
          break;
        }
      }
      const double x0 = r0 * y0 / (s + r0);
      const double x1 = y1 / (s + 1.0);
      return std::hypot(x0 - y0, x1 - y1);
    }
    return std::abs(y1 - e1);
  }
  const double numer0 = e0 * y0;
  const double denom0 = e0 * e0 - e1 * e1;
  if (numer0 < denom0) {
    const double xde0 = numer0 / denom0;
    const double x0 = e0 * xde0;
    const double x1 = e1 * std::sqrt(std::max(0.0, 1.0 - xde0 * xde0));
    return std::hypot(x0 - y0, x1);
  }
  return std::abs(y0 - e0);
}

}  // namespace

double ellipse_signed_distance(double u, double v, double a, double b) {
  // Rotation round-off (cos(pi/2) ~ 6e-17) would otherwise push the bisection
  // into 0/0; such points lie on an axis.
  constexpr double on_axis = 1e-9;
  double y0 = std::abs(u) < on_axis ? 0.0 : std::abs(u);
  double y1 = std::abs(v) < on_axis ? 0.0 : std::abs(v);
  double e0 = a;
  double e1 = b;
  if (e0 < e1) {
    std::swap(e0, e1);
    std::swap(y0, y1);
  }
  const double d = distance_first_quadrant(e0, e1, y0, y1);
  const bool inside = (u * u) / (a * a) + (v * v) / (b * b) < 1.0;
  return inside ? -d : d;
}

double heaviside(double phi, double epsilon) {
  return 0.5 * (1.0 + (2.0 / std::numbers::pi) * std::atan(phi / epsilon));
}

double dirac(double phi, double epsilon) {
  return (1.0 / std::numbers::pi) * epsilon / (epsilon * epsilon + phi * phi);
}

std::optional<SegmentMask> make_segment_mask(const PixelMask& mask) {
  PixelMask comp = mask.largest_component().cropped();
  const std::size_t area = comp.count();
  if (area == 0) return std::nullopt;
  double sx = 0.0, sy = 0.0;
  for (int ly = 0; ly < comp.height(); ++ly) {
    for (int lx = 0; lx < comp.width(); ++lx) {
      if (!comp.local(lx, ly)) continue;
      sx += comp.x0() + lx;
      sy += comp.y0() + ly;
    }
  }
  const double cx = sx / static_cast<double>(area);
  const double cy = sy / static_cast<double>(area);
  double mu20 = 0.0, mu02 = 0.0, mu11 = 0.0;
  for (int ly = 0; ly < comp.height(); ++ly) {
    for (int lx = 0; lx < comp.width(); ++lx) {
      if (!comp.local(lx, ly)) continue;
      const double dx = comp.x0() + lx - cx;
      const double dy = comp.y0() + ly - cy;
      mu20 += dx * dx;
      mu02 += dy * dy;
      mu11 += dx * dy;
    }
  }
  double axis = 0.5 * std::atan2(2.0 * mu11, mu20 - mu02);
  if (axis < 0.0) axis += std::numbers::pi;
  if (axis >= std::numbers::pi) axis -= std::numbers::pi;

  SegmentMask out;
  out.contour = trace_contour(comp);
  out.pixels = std::move(comp);
  out.area = area;
  out.centroid = {cx, cy};
  out.principal_axis = axis;
  return out;
}

SegmentWindow segment_window(const GrayImage& image, const Detection& det) {
  const double hw = grid_half(det.half_extents.a) + 0.5;
  const double hh = grid_half(det.half_extents.b) + 0.5;
  const double c = std::abs(std::cos(det.orientation));
  const double s = std::abs(std::sin(det.orientation));
  const double rx = hw * c + hh * s;
  const double ry = hw * s + hh * c;
  const int x0 = std::max(0, static_cast<int>(std::floor(det.center.x - rx)));
  const int y0 = std::max(0, static_cast<int>(std::floor(det.center.y - ry)));
  const int x1 = std::min(image.width() - 1, static_cast<int>(std::ceil(det.center.x + rx)));
  const int y1 = std::min(image.height() - 1, static_cast<int>(std::ceil(det.center.y + ry)));
  if (x1 < x0 || y1 < y0) throw ContractError("segment_window: detection lies outside the image");
  const int w = x1 - x0 + 1;
  const int h = y1 - y0 + 1;
  std::vector<double> data(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) data[static_cast<std::size_t>(y) * w + x] = image.at(x0 + x, y0 + y);
  }
  return SegmentWindow{x0, y0, GrayImage(w, h, std::move(data))};
}

LevelSet init_levelset(const Detection& det, const SegmentWindow& window, const DelKernel& kernel,
                       const SegmenterParams& params) {
  const DogParams dog = solve_variances(kernel.half_extents.a, kernel.half_extents.b, kernel.k);
  LevelSet ls;
  ls.width = window.data.width();
  ls.height = window.data.height();
  ls.epsilon = params.epsilon;
  ls.lambda1 = params.lambda1;
  ls.lambda2 = params.lambda2;
  ls.lambda3 = params.lambda3;
  const std::size_t n = static_cast<std::size_t>(ls.width) * ls.height;
  ls.phi.resize(n);
  ls.h_in.assign(n, 0.0);
  ls.h_out.assign(n, 0.0);
  const double c = std::cos(det.orientation);
  const double s = std::sin(det.orientation);
  double pos = 0.0, neg = 0.0;
  for (int y = 0; y < ls.height; ++y) {
    for (int x = 0; x < ls.width; ++x) {
      const double dx = window.x0 + x - det.center.x;
      const double dy = window.y0 + y - det.center.y;
      const double u = dx * c + dy * s;
      const double v = -dx * s + dy * c;
      const std::size_t p = static_cast<std::size_t>(y) * ls.width + x;
      ls.phi[p] = ellipse_signed_distance(u, v, det.half_extents.a, det.half_extents.b);
      const double kv = kernel.continuous(dog, u, v);
      if (kv > 0.0) {
        ls.h_in[p] = kv;
        pos += kv;
      } else if (kv < 0.0) {
        ls.h_out[p] = -kv;
        neg -= kv;
      }
    }
  }
  if (!(pos > 0.0) || !(neg > 0.0)) {
    throw ContractError("init_levelset: window does not cover both kernel lobes");
  }
  for (auto& v : ls.h_in) v /= pos;
  for (auto& v : ls.h_out) v /= neg;
  return ls;
}

double energy(const LevelSet& ls, const GrayImage& window) {
  check_dims(ls, window);
  return energy_of(ls.phi, ls, window.data());
}

std::vector<double> energy_gradient(const LevelSet& ls, const GrayImage& window) {
  check_dims(ls, window);
  const auto t = window.data();
  const RegionStats st = region_stats(ls.phi, ls, t);
  const double mi = st.mean_in(), vi = st.var_in();
  const double mo = st.mean_out(), vo = st.var_out();
  std::vector<double> g(ls.phi.size());
  for (std::size_t p = 0; p < g.size(); ++p) {
    const double d = dirac(ls.phi[p], ls.epsilon);
    const double din = (t[p] - mi) * (t[p] - mi) - vi;
    const double dout = (t[p] - mo) * (t[p] - mo) - vo;
    g[p] = -ls.lambda1 * ls.h_in[p] * d / st.w_in * din + ls.lambda2 * ls.h_out[p] * d / st.w_out * dout;
  }
  return g;
}

std::vector<double> reinitialize(std::span<const double> phi0, int width, int height, int steps) {
  if (static_cast<std::size_t>(width) * height != phi0.size()) {
    throw ContractError("reinitialize: field size does not match dimensions");
  }
  for (double v : phi0) {
    if (!std::isfinite(v)) throw ContractError("reinitialize: non-finite input");
  }
  if (steps <= 0) steps = std::max(width, height);
  constexpr double dt = 0.5;
  std::vector<double> phi(phi0.begin(), phi0.end());
  std::vector<double> next(phi.size());
  std::vector<double> sgn(phi.size());
  for (std::size_t i = 0; i < phi.size(); ++i) sgn[i] = phi0[i] / std::sqrt(phi0[i] * phi0[i] + 1.0);
  const auto at = [&](int x, int y) {
    x = std::clamp(x, 0, width - 1);
    y = std::clamp(y, 0, height - 1);
    return phi[static_cast<std::size_t>(y) * width + x];
  };
  for (int it = 0; it < steps; ++it) {
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * width + x;
        const double c = phi[i];
        const double a = c - at(x - 1, y);  // backward x
        const double b = at(x + 1, y) - c;  // forward x
        const double cc = c - at(x, y - 1);
        const double d = at(x, y + 1) - c;
        double grad;
        if (phi0[i] > 0.0) {
          const double gx = std::max(std::pow(std::max(a, 0.0), 2), std::pow(std::min(b, 0.0), 2));
          const double gy = std::max(std::pow(std::max(cc, 0.0), 2), std::pow(std::min(d, 0.0), 2));
          grad = std::sqrt(gx + gy);
        } else if (phi0[i] < 0.0) {
          const double gx = std::max(std::pow(std::min(a, 0.0), 2), std::pow(std::max(b, 0.0), 2));
          const double gy = std::max(std::pow(std::min(cc, 0.0), 2), std::pow(std::max(d, 0.0), 2));
          grad = std::sqrt(gx + gy);
        } else {
          grad = 1.0;
        }
        next[i] = c + dt * sgn[i] * (1.0 - grad);
      }
    }
    phi.swap(next);
  }
  return phi;
}

std::optional<SegmentMask> evolve(LevelSet& ls, const SegmentWindow& window, const SegmenterParams& params,
                                  EvolveTrace* trace) {
  if (!(params.dt > 0.0)) throw ContractError("evolve: dt must be positive");
  check_dims(ls, window.data);
  const auto t = window.data.data();
  const std::size_t n = ls.phi.size();

  // Per-pixel prior weight h/W, fixed from the initial contour.
  std::vector<double> metric(n, 1.0);
  if (params.preconditioned) {
    const RegionStats st = region_stats(ls.phi, ls, t);
    std::vector<double> weight(n);
    double max_weight = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      weight[p] = ls.lambda1 * ls.h_in[p] / st.w_in + ls.lambda2 * ls.h_out[p] / st.w_out;
      max_weight = std::max(max_weight, weight[p]);
    }
    // Floor keeps the scaling finite where the prior vanishes.
    const double floor = 1e-4 * max_weight;
    for (std::size_t p = 0; p < n; ++p) metric[p] = 1.0 / std::max(weight[p], floor);
  }

  EvolveTrace local;
  EvolveTrace& tr = trace ? *trace : local;
  tr = EvolveTrace{};
  double e = energy_of(ls.phi, ls, t);
  tr.energies.push_back(e);
  tr.after_reinit.push_back(false);

  std::vector<double> trial(n);
  std::vector<bool> last_sign(n);
  for (std::size_t p = 0; p < n; ++p) last_sign[p] = ls.phi[p] < 0.0;
  double step = params.dt;
  for (int iter = 1; iter <= params.max_iters; ++iter) {
    tr.iterations = iter;
    std::vector<double> dir = energy_gradient(ls, window.data);
    double norm = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      dir[p] *= metric[p];
      norm = std::max(norm, std::abs(dir[p]));
    }
    if (norm == 0.0) {
      tr.converged = true;
      break;
    }
    bool accepted = false;
    double e_trial = e;
    for (int attempt = 0; attempt < 40; ++attempt) {
      for (std::size_t p = 0; p < n; ++p) {
        trial[p] = ls.phi[p] - step * dir[p];
        if (!std::isfinite(trial[p])) {
          throw DivergenceError("evolve: non-finite level set at iteration " + std::to_string(iter));
        }
      }
      e_trial = energy_of(trial, ls, t);
      if (!std::isfinite(e_trial)) {
        throw DivergenceError("evolve: non-finite energy at iteration " + std::to_string(iter));
      }
      if (e_trial <= e) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      tr.converged = true;
      break;
    }
    const double rel = (e - e_trial) / std::max(std::abs(e), std::numeric_limits<double>::min());
    ls.phi.swap(trial);
    e = e_trial;
    tr.energies.push_back(e);
    tr.after_reinit.push_back(false);
    step = std::min(params.dt, step * 2.0);
    if (params.reinit_every > 0 && iter % params.reinit_every == 0) {
      ls.phi = reinitialize(ls.phi, ls.width, ls.height, params.reinit_substeps);
      e = energy_of(ls.phi, ls, t);
      tr.energies.push_back(e);
      tr.after_reinit.push_back(true);
      // Descent keeps sharpening phi and reinitialisation keeps undoing it, so
      // the energy alone never settles; an unchanged contour over a whole
      // cycle does.
      std::vector<bool> sign(n);
      for (std::size_t p = 0; p < n; ++p) sign[p] = ls.phi[p] < 0.0;
      if (sign == last_sign) {
        tr.converged = true;
        break;
      }
      last_sign = std::move(sign);
    }
    if (rel < params.rel_tol) {
      tr.converged = true;
      break;
    }
  }

  PixelMask mask(window.x0, window.y0, ls.width, ls.height);
  for (int y = 0; y < ls.height; ++y) {
    for (int x = 0; x < ls.width; ++x) {
      if (ls.phi[static_cast<std::size_t>(y) * ls.width + x] < 0.0) mask.local(x, y) = 1;
    }
  }
  return make_segment_mask(mask);
}

std::optional<SegmentMask> segment(const GrayImage& image, const Detection& detection, double k,
                                   const SegmenterParams& params) {
  const DelKernel kernel = build_kernel(detection.half_extents.a, detection.half_extents.b, k);
  const SegmentWindow window = segment_window(image, detection);
  LevelSet ls = init_levelset(detection, window, kernel, params);
  return evolve(ls, window, params, nullptr);
}

}  // namespace ellitrack
