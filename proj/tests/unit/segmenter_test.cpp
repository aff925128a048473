#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "ellitrack/dei.hpp"
#include "ellitrack/error.hpp"
#include "ellitrack/metrics.hpp"
#include "ellitrack/segmenter.hpp"
#include "support.hpp"

using namespace ellitrack;
using ellitrack::testing::ellipse_image;
using ellitrack::testing::ellipse_mask;

namespace {

Detection det(Point2 c, Extents e, double theta) {
  Detection d;
  d.center = c;
  d.half_extents = e;
  d.orientation = theta;
  return d;
}

struct Fixture {
  GrayImage image;
  Detection detection;
  SegmentWindow window;
  LevelSet ls;
};

Fixture fixture(const GrayImage& image, const Detection& d, const SegmenterParams& params = {}) {
  Fixture f{image, d, segment_window(image, d), {}};
  f.ls = init_levelset(d, f.window, build_kernel(d.half_extents.a, d.half_extents.b, 0.9), params);
  return f;
}

GrayImage random_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> d(static_cast<std::size_t>(w) * h);
  for (double& v : d) v = u(rng);
  return GrayImage(w, h, d);
}

/// Ellipse with a disk bitten out of one end.
GrayImage bitten(int w, int h, Point2 c, Extents e, Point2 bite, double r, PixelMask* truth) {
  PixelMask m = ellipse_mask(w, h, c, e, 0.0);
  std::vector<double> d(static_cast<std::size_t>(w) * h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (std::hypot(x - bite.x, y - bite.y) <= r) m.set(x, y, false);
      if (m.contains(x, y)) d[static_cast<std::size_t>(y) * w + x] = 1.0;
    }
  }
  *truth = m;
  return GrayImage(w, h, d);
}

double median_gradient(const std::vector<double>& phi, int w, int h) {
  std::vector<double> g;
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      const double gx = (phi[y * w + x + 1] - phi[y * w + x - 1]) / 2;
      const double gy = (phi[(y + 1) * w + x] - phi[(y - 1) * w + x]) / 2;
      g.push_back(std::hypot(gx, gy));
    }
  }
  std::nth_element(g.begin(), g.begin() + g.size() / 2, g.end());
  return g[g.size() / 2];
}

}  // namespace

TEST(InitLevelset, PriorsAndSigns) {
  const Detection d = det({30, 25}, {10, 5}, 0.3);
  const Fixture f = fixture(GrayImage::filled(64, 50, 0.2), d);
  double in = 0, out = 0;
  for (std::size_t i = 0; i < f.ls.phi.size(); ++i) {
    ASSERT_TRUE(std::isfinite(f.ls.phi[i]));
    ASSERT_GE(f.ls.h_in[i], 0.0);
    ASSERT_GE(f.ls.h_out[i], 0.0);
    in += f.ls.h_in[i];
    out += f.ls.h_out[i];
  }
  EXPECT_NEAR(in, 1.0, 1e-12);
  EXPECT_NEAR(out, 1.0, 1e-12);
  const int cx = 30 - f.window.x0, cy = 25 - f.window.y0;
  EXPECT_LT(f.ls.phi[cy * f.ls.width + cx], 0.0);
}

TEST(InitLevelset, ZeroLevelOnTheEllipse) {
  const Detection d = det({32, 32}, {10, 5}, 0.0);
  const Fixture f = fixture(GrayImage::filled(64, 64, 0.0), d);
  // bilinear phi at 64 boundary points
  for (int i = 0; i < 64; ++i) {
    const double t = 2 * std::numbers::pi * i / 64;
    const double x = 32 + 10 * std::cos(t) - f.window.x0, y = 32 + 5 * std::sin(t) - f.window.y0;
    const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0, fy = y - y0;
    const auto p = [&](int xx, int yy) { return f.ls.phi[yy * f.ls.width + xx]; };
    const double v = (1 - fx) * (1 - fy) * p(x0, y0) + fx * (1 - fy) * p(x0 + 1, y0) + (1 - fx) * fy * p(x0, y0 + 1) +
                     fx * fy * p(x0 + 1, y0 + 1);
    EXPECT_LT(std::abs(v), 0.75);
  }
}

TEST(InitLevelset, InsidePriorAvoidsCorners) {
  const Detection d = det({32, 32}, {10, 5}, 0.0);
  const Fixture f = fixture(GrayImage::filled(64, 64, 0.0), d);
  double corners = 0;
  for (int sy : {-1, 1}) {
    for (int sx : {-1, 1}) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int x = 32 + sx * 10 + dx - f.window.x0, y = 32 + sy * 5 + dy - f.window.y0;
          if (x >= 0 && y >= 0 && x < f.ls.width && y < f.ls.height) corners += f.ls.h_in[y * f.ls.width + x];
        }
      }
    }
  }
  EXPECT_LT(corners, 0.01);
}

TEST(Energy, ConstantPatchIsZero) {
  const Fixture f = fixture(GrayImage::filled(64, 64, 0.6), det({32, 32}, {10, 5}, 0.2));
  EXPECT_NEAR(energy(f.ls, f.window.data), 0.0, 1e-15);
}

TEST(Energy, PerfectPartitionIsZeroAndShiftedIsPositive) {
  // binary image split exactly where phi changes sign (sharp Heaviside)
  const Detection d = det({32, 32}, {10, 5}, 0.0);
  SegmenterParams p;
  p.epsilon = 1e-9;
  Fixture f = fixture(GrayImage::filled(64, 64, 0.0), d, p);
  std::vector<double> data(f.window.data.data().begin(), f.window.data.data().end());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = f.ls.phi[i] < 0 ? 1.0 : 0.0;
  const GrayImage split(f.ls.width, f.ls.height, data);
  EXPECT_NEAR(energy(f.ls, split), 0.0, 1e-12);
  // mixing a background level into the weighted inside region makes the inside variance positive
  for (std::size_t i = 0; i < data.size(); i += 3) {
    if (f.ls.phi[i] < 0 && f.ls.h_in[i] > 0) data[i] = 0.5;
  }
  EXPECT_GT(energy(f.ls, GrayImage(f.ls.width, f.ls.height, data)), 1e-6);
}

TEST(Energy, ScalesWithLambdas) {
  const GrayImage img = random_image(48, 40, 3);
  Fixture f = fixture(img, det({24, 20}, {9, 5}, 0.5));
  const double e = energy(f.ls, f.window.data);
  const auto g = energy_gradient(f.ls, f.window.data);
  f.ls.lambda1 *= 2.5;
  f.ls.lambda2 *= 2.5;
  EXPECT_NEAR(energy(f.ls, f.window.data), 2.5 * e, 1e-12 * std::abs(e));
  const auto g2 = energy_gradient(f.ls, f.window.data);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(std::signbit(g[i]), std::signbit(g2[i]));
}

TEST(EnergyGradient, MatchesFiniteDifferences) {
  const GrayImage img = random_image(32, 32, 17);
  Fixture f = fixture(img, det({16, 16}, {9, 5}, 0.4));
  std::mt19937_64 rng(23);
  // smooth random phi so the Dirac weights are not negligible anywhere
  for (std::size_t i = 0; i < f.ls.phi.size(); ++i) f.ls.phi[i] = 0.3 * f.ls.phi[i] + std::normal_distribution<>(0, 0.5)(rng);
  const auto grad = energy_gradient(f.ls, f.window.data);
  std::uniform_int_distribution<std::size_t> site(0, f.ls.phi.size() - 1);
  int checked = 0;
  for (int trial = 0; trial < 1000 && checked < 100; ++trial) {
    const std::size_t i = site(rng);
    if (std::abs(grad[i]) < 1e-7) continue;  // relative error meaningless at ~0
    const double h = 1e-4;  // smaller steps are dominated by rounding
    LevelSet plus = f.ls, minus = f.ls;
    plus.phi[i] += h;
    minus.phi[i] -= h;
    const double fd = (energy(plus, f.window.data) - energy(minus, f.window.data)) / (2 * h);
    EXPECT_LT(std::abs(fd - grad[i]) / std::abs(grad[i]), 1e-5) << "site " << i;
    ++checked;
  }
  EXPECT_EQ(checked, 100);
}

TEST(Evolve, StaysOnABinaryEllipseOptimum) {
  const Point2 c{32, 30};
  const Extents e{10, 5};
  const GrayImage img = ellipse_image(64, 60, c, e, 0.0);
  const auto mask = segment(img, det(c, e, 0.0), 0.9);
  ASSERT_TRUE(mask);
  const PixelMask truth = ellipse_mask(64, 60, c, e, 0.0);
  // the contour may give up single-pixel tips where the object prior vanishes, never background
  EXPECT_EQ(mask->pixels.intersection_count(truth), mask->area);
  EXPECT_GE(mask_iou(mask->pixels, truth), 0.9);
}

TEST(Evolve, EnergyDescendsOnFixtures) {
  for (int i = 0; i < 5; ++i) {
    const double theta = 0.3 * i;
    const Point2 c{32.0 + i * 0.3, 30.0 - i * 0.2};
    const GrayImage img = ellipse_image(64, 60, c, {9.0 + i * 0.5, 5}, theta, 0.8, 0.1);
    Fixture f = fixture(img, det({c.x + 1.5, c.y - 1}, {10, 5}, theta + 0.1));
    EvolveTrace trace;
    const auto mask = evolve(f.ls, f.window, SegmenterParams{}, &trace);
    ASSERT_TRUE(mask);
    ASSERT_GE(trace.energies.size(), 2u);
    EXPECT_LT(trace.energies.back(), trace.energies.front());
    for (std::size_t k = 1; k < trace.energies.size(); ++k) {
      if (trace.after_reinit[k]) continue;
      EXPECT_LE(trace.energies[k], trace.energies[k - 1] + 1e-10) << "fixture " << i << " step " << k;
    }
    EXPECT_GT(mask->area, 0u);
    EXPECT_LE(mask->area, static_cast<std::size_t>(f.ls.width) * f.ls.height);
  }
}

TEST(Evolve, ConcaveBiteIsRecovered) {
  PixelMask truth;
  const GrayImage img = bitten(80, 64, {40, 32}, {10, 5}, {49, 32}, 3.5, &truth);
  const auto mask = segment(img, det({40, 32}, {10, 5}, 0.0), 0.9);
  ASSERT_TRUE(mask);
  const PixelMask pred[] = {mask->pixels};
  const PixelMask gt[] = {truth};
  EXPECT_GE(voc_score(pred, gt), 0.85);
}

TEST(Evolve, ResultIsOneComponent) {
  const GrayImage img = ellipse_image(64, 60, {32, 30}, {10, 5}, 0.7, 0.9, 0.05);
  const auto mask = segment(img, det({32, 30}, {10, 5}, 0.7), 0.9);
  ASSERT_TRUE(mask);
  EXPECT_EQ(mask->pixels.largest_component().count(), mask->area);
}

TEST(Reinitialize, SignedDistanceIsAFixedPointInSign) {
  const int w = 40, h = 36;
  std::vector<double> phi(w * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) phi[y * w + x] = ellipse_signed_distance(x - 20.0, y - 18.0, 9, 6);
  }
  const auto out = reinitialize(phi, w, h, 5);
  for (std::size_t i = 0; i < phi.size(); ++i) EXPECT_EQ(std::signbit(out[i]), std::signbit(phi[i]));
}

TEST(Reinitialize, SteepFunctionRelaxesTowardUnitGradient) {
  const int w = 40, h = 40;
  std::vector<double> phi(w * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) phi[y * w + x] = 10 * (std::hypot(x - 20.0, y - 20.0) - 8);
  }
  ASSERT_NEAR(median_gradient(phi, w, h), 10.0, 0.5);
  EXPECT_LT(median_gradient(reinitialize(phi, w, h), w, h), 1.5);
}

TEST(Reinitialize, StepInputOnlyFlipsAtTheInterface) {
  const int w = 40, h = 40;
  std::vector<double> phi(w * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) phi[y * w + x] = std::hypot(x - 19.5, y - 20.2) < 11 ? -1.0 : 1.0;
  }
  const auto out = reinitialize(phi, w, h);
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      const int i = y * w + x;
      if (std::signbit(out[i]) == std::signbit(phi[i])) continue;
      // a step function locates its zero level only to within a pixel
      const bool at_interface = std::signbit(phi[i - 1]) != std::signbit(phi[i]) ||
                                std::signbit(phi[i + 1]) != std::signbit(phi[i]) ||
                                std::signbit(phi[i - w]) != std::signbit(phi[i]) ||
                                std::signbit(phi[i + w]) != std::signbit(phi[i]);
      EXPECT_TRUE(at_interface) << x << "," << y;
    }
  }
}

TEST(EllipseSignedDistance, MatchesDenseBoundarySampling) {
  const double a = 9, b = 4;
  for (auto [u, v] : {std::pair{0.0, 0.0}, {12.0, 3.0}, {-3.0, 2.0}, {0.0, 7.0}, {9.0, 0.0}, {5.0, -6.0}}) {
    double best = 1e300;
    for (int i = 0; i < 200000; ++i) {
      const double t = 2 * std::numbers::pi * i / 200000;
      best = std::min(best, std::hypot(u - a * std::cos(t), v - b * std::sin(t)));
    }
    const bool inside = u * u / (a * a) + v * v / (b * b) < 1;
    EXPECT_NEAR(ellipse_signed_distance(u, v, a, b), inside ? -best : best, 1e-6) << u << "," << v;
  }
}

TEST(MakeSegmentMask, EmptyMaskGivesNothing) {
  EXPECT_FALSE(make_segment_mask(PixelMask(0, 0, 5, 5)).has_value());
}
