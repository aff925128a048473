#include <benchmark/benchmark.h>

#include <cmath>

#include "ellitrack/segmenter.hpp"

using namespace ellitrack;

namespace {

GrayImage ellipse_frame(int w, int h, Point2 c, Extents e) {
  std::vector<double> d(static_cast<std::size_t>(w) * h, 0.05);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double u = (x - c.x) / e.a, v = (y - c.y) / e.b;
      if (u * u + v * v <= 1.0) d[static_cast<std::size_t>(y) * w + x] = 0.9;
    }
  }
  return GrayImage(w, h, std::move(d));
}

Detection detection(Point2 c, Extents e) {
  Detection d;
  d.center = c;
  d.half_extents = e;
  return d;
}

void BM_Segment(benchmark::State& state) {
  const GrayImage img = ellipse_frame(80, 64, {40.3, 31.6}, {9.5, 5.5});
  const Detection d = detection({41, 32}, {10, 5});
  for (auto _ : state) benchmark::DoNotOptimize(segment(img, d, 0.9));
}
BENCHMARK(BM_Segment)->Unit(benchmark::kMicrosecond);

void BM_EnergyGradient(benchmark::State& state) {
  const GrayImage img = ellipse_frame(80, 64, {40, 32}, {10, 5});
  const Detection d = detection({40, 32}, {10, 5});
  const SegmentWindow w = segment_window(img, d);
  const LevelSet ls = init_levelset(d, w, build_kernel(10, 5, 0.9));
  for (auto _ : state) benchmark::DoNotOptimize(energy_gradient(ls, w.data));
}
BENCHMARK(BM_EnergyGradient);

void BM_Reinitialize(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::vector<double> phi(static_cast<std::size_t>(n) * n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) phi[static_cast<std::size_t>(y) * n + x] = 3 * (std::hypot(x - n / 2.0, y - n / 2.0) - n / 4.0);
  }
  for (auto _ : state) benchmark::DoNotOptimize(reinitialize(phi, n, n, 5));
}
BENCHMARK(BM_Reinitialize)->Arg(32)->Arg(64);

}  // namespace
