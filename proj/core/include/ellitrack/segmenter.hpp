#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "ellitrack/dei.hpp"
#include "ellitrack/detection.hpp"
#include "ellitrack/raster.hpp"

namespace ellitrack {

/// Object mask in image coordinates plus derived shape statistics.
struct SegmentMask {
  PixelMask pixels;  ///< single 4-connected component, tight window
  std::vector<std::array<int, 2>> contour;  ///< boundary pixels, traced clockwise from the top-left
  std::size_t area = 0;
  Point2 centroid;
  double principal_axis = 0.0;  ///< radians in [0, pi)
};

/// Keeps the largest 4-connected component and computes the statistics.
/// Returns nullopt for an empty mask.
std::optional<SegmentMask> make_segment_mask(const PixelMask& mask);

/// Axis-aligned window of the image covering a detection's rotated DEL
/// rectangle, clipped to the image. The level set lives on this grid.
struct SegmentWindow {
  int x0 = 0;
  int y0 = 0;
  GrayImage data;
};

SegmentWindow segment_window(const GrayImage& image, const Detection& detection);

struct LevelSet {
  int width = 0;
  int height = 0;
  std::vector<double> phi;    ///< negative inside the contour
  std::vector<double> h_in;   ///< object prior, sums to 1
  std::vector<double> h_out;  ///< background prior, sums to 1
  double epsilon = 1.0;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double lambda3 = 1.0;  ///< curve-variance weight; the term is constant and not evaluated
};

struct SegmenterParams {
  double dt = 0.5;
  int max_iters = 500;
  int reinit_every = 10;
  int reinit_substeps = 5;
  double rel_tol = 1e-4;
  double epsilon = 1.0;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double lambda3 = 1.0;
  /// Scale each pixel's gradient by the inverse of its prior weight. Without
  /// it the contour barely moves where the DoG prior vanishes (on the initial
  /// ellipse itself).
  bool preconditioned = true;
};

/// phi = signed distance to the detection's ellipse (negative inside);
/// h_in / h_out = normalised positive / negative parts of the rotated kernel.
LevelSet init_levelset(const Detection& detection, const SegmentWindow& window, const DelKernel& kernel,
                       const SegmenterParams& params = {});

double heaviside(double phi, double epsilon);
double dirac(double phi, double epsilon);

/// lambda1 * Var_in + lambda2 * Var_out with h-weighted, mass-normalised
/// variances; the inside indicator is 1 - H(phi).
double energy(const LevelSet& ls, const GrayImage& window);

/// Exact derivative of `energy` with respect to every phi sample.
std::vector<double> energy_gradient(const LevelSet& ls, const GrayImage& window);

struct EvolveTrace {
  std::vector<double> energies;      ///< energy after every accepted step (index 0 = initial)
  std::vector<bool> after_reinit;    ///< energies[i] was measured right after a reinitialisation
  int iterations = 0;
  bool converged = false;
};

/// Descends the energy from `ls.phi`. Accepted steps never increase the
/// energy (the step is halved until they do). Returns the largest component
/// of {phi < 0} in image coordinates, or nullopt when it is empty. Throws
/// DivergenceError on non-finite phi.
std::optional<SegmentMask> evolve(LevelSet& ls, const SegmentWindow& window, const SegmenterParams& params,
                                  EvolveTrace* trace = nullptr);

/// Sussman-Smereka-Osher reinitialisation: iterates
/// phi_t = S(phi0) (1 - |grad phi|) with Godunov upwinding and pseudo-time
/// step 0.5. steps <= 0 picks max(width, height), enough for the correction
/// to sweep the whole grid.
std::vector<double> reinitialize(std::span<const double> phi, int width, int height, int steps = 0);

/// Signed distance from (u, v) to the axis-aligned ellipse u^2/a^2 + v^2/b^2 = 1.
double ellipse_signed_distance(double u, double v, double a, double b);

/// init_levelset + evolve for one detection.
std::optional<SegmentMask> segment(const GrayImage& image, const Detection& detection, double k,
                                   const SegmenterParams& params = {});

}  // namespace ellitrack
