#include "ellitrack/dei.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "ellitrack/error.hpp"

namespace ellitrack {

double DogParams::c() const { return std::numbers::sqrt2 * a; }
double DogParams::d() const { return std::numbers::sqrt2 * b; }

DogParams solve_variances(double a, double b, double k) {
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
    throw DomainError("solve_variances: semi-axes must be positive and finite (a=" +
                      std::to_string(a) + ", b=" + std::to_string(b) + ")");
  }
  if (!(k > 0.0 && k < 1.0)) {
    throw DomainError("solve_variances: k must lie strictly inside (0, 1), got " + std::to_string(k));
  }
  // (k^2 - 1) / (4 ln k) is positive on (0, 1) and tends to 1/2 as k -> 1.
  const double ratio = (k * k - 1.0) / (4.0 * std::log(k));
  DogParams p;
  p.a = a;
  p.b = b;
  p.k = k;
  p.sigma_x1 = std::sqrt(ratio * a * a);
  p.sigma_y1 = std::sqrt(ratio * b * b);
  p.sigma_x2 = p.sigma_x1 / k;
  p.sigma_y2 = p.sigma_y1 / k;
  return p;
}

double eval_dog(const DogParams& p, double x, double y) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double g1 = std::exp(-(x * x) / (2.0 * p.sigma_x1 * p.sigma_x1) -
                             (y * y) / (2.0 * p.sigma_y1 * p.sigma_y1)) /
                    (two_pi * p.sigma_x1 * p.sigma_y1);
  const double g2 = std::exp(-(x * x) / (2.0 * p.sigma_x2 * p.sigma_x2) -
                             (y * y) / (2.0 * p.sigma_y2 * p.sigma_y2)) /
                    (two_pi * p.sigma_x2 * p.sigma_y2);
  return g1 - g2;
}

DelKernel build_kernel(double a, double b, double k) {
  const DogParams params = solve_variances(a, b, k);
  DelKernel kernel;
  kernel.half_extents = {a, b};
  kernel.k = k;
  kernel.half_w = grid_half(a);
  kernel.half_h = grid_half(b);
  kernel.samples.resize(static_cast<std::size_t>(kernel.width()) * kernel.height());

  double positive = 0.0;
  double negative = 0.0;
  for (int v = -kernel.half_h; v <= kernel.half_h; ++v) {
    for (int u = -kernel.half_w; u <= kernel.half_w; ++u) {
      const double f = eval_dog(params, u, v);
      kernel.samples[static_cast<std::size_t>(v + kernel.half_h) * kernel.width() + (u + kernel.half_w)] = f;
      if (f > 0.0) {
        positive += f;
      } else {
        negative -= f;
      }
    }
  }
  if (!(positive > 0.0) || !(negative > 0.0)) {
    throw DomainError("build_kernel: degenerate kernel for a=" + std::to_string(a) +
                      ", b=" + std::to_string(b));
  }
  kernel.positive_scale = 1.0 / positive;
  kernel.negative_scale = 1.0 / negative;
  for (double& s : kernel.samples) s *= s > 0.0 ? kernel.positive_scale : kernel.negative_scale;
  return kernel;
}

double DelKernel::continuous(const DogParams& params, double u, double v) const {
  if (std::abs(u) > half_w + 0.5 || std::abs(v) > half_h + 0.5) return 0.0;
  const double f = eval_dog(params, u, v);
  return f * (f > 0.0 ? positive_scale : negative_scale);
}

}  // namespace ellitrack
