#pragma once

#include <vector>

#include "ellitrack/raster.hpp"

namespace ellitrack {

/// Difference-of-Gaussians parameters in the reduced (a, b, k) form.
///
/// f = G1 - G2 where G1 (sigma_x1, sigma_y1) is the narrow Gaussian and
/// sigma_x1 = k * sigma_x2. f is positive at the origin, vanishes on the
/// ellipse (a, b) and is most negative on the ellipse (sqrt(2) a, sqrt(2) b).
struct DogParams {
  double a = 0.0;
  double b = 0.0;
  double k = 0.0;
  double sigma_x1 = 0.0;
  double sigma_y1 = 0.0;
  double sigma_x2 = 0.0;
  double sigma_y2 = 0.0;

  /// Semi-axes of the minimum level set.
  double c() const;
  double d() const;
};

/// Closed-form variances for the zero-level ellipse (a, b) and ratio k in (0, 1).
/// Throws DomainError outside that domain.
DogParams solve_variances(double a, double b, double k);

/// f(x, y) for unit-integral Gaussians.
double eval_dog(const DogParams& params, double x, double y);

/// Detection kernel sampled on the integer grid [-ceil(a), ceil(a)] x [-ceil(b), ceil(b)].
///
/// Positive samples are divided by their sum and negative samples by the
/// magnitude of theirs, so the grid sums to zero, the positive part sums to
/// one and the sign pattern of f (positive inside the (a, b) ellipse,
/// negative in the rectangle corners) is preserved exactly.
struct DelKernel {
  Extents half_extents;
  double k = 0.0;
  int half_w = 0;  ///< ceil(a)
  int half_h = 0;  ///< ceil(b)
  std::vector<double> samples;  ///< row-major, (2*half_w+1) x (2*half_h+1)
  double positive_scale = 0.0;  ///< 1 / (sum of positive raw samples)
  double negative_scale = 0.0;  ///< 1 / |sum of negative raw samples|

  int width() const { return 2 * half_w + 1; }
  int height() const { return 2 * half_h + 1; }
  double at(int u, int v) const {
    return samples[static_cast<std::size_t>(v + half_h) * width() + (u + half_w)];
  }
  /// The normalised kernel at an off-grid point; zero outside the pixel
  /// footprint of the grid, |u| <= half_w + 0.5 and |v| <= half_h + 0.5.
  double continuous(const DogParams& params, double u, double v) const;
};

DelKernel build_kernel(double a, double b, double k);

}  // namespace ellitrack
