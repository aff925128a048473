#include <benchmark/benchmark.h>

#include "ellitrack/detector.hpp"
#include "ellitrack/synth.hpp"

using namespace ellitrack;

namespace {

GrayImage scene_frame(int size, int objects) {
  SceneConfig sc;
  sc.width = sc.height = size;
  sc.n_objects = objects;
  sc.frames = 1;
  sc.seed = 5;
  return generate(sc).frames[0];
}

void BM_Scan(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const GrayImage img = scene_frame(size, size / 16);
  DetectorConfig dc;
  ScanPlan plan(dc, size, size);
  const PixelMask none;
  for (auto _ : state) benchmark::DoNotOptimize(scan(img, dc, dc.lambda0, none, &plan));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(plan.shapes().size()));
}
BENCHMARK(BM_Scan)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_FitValue(benchmark::State& state) {
  const GrayImage img = scene_frame(128, 8);
  const DelKernel k = build_kernel(10, 5, 0.9);
  for (auto _ : state) {
    const Patch p = extract_patch(img, {64, 64}, {10, 5}, 0.3);
    benchmark::DoNotOptimize(fit_value(k, p));
  }
}
BENCHMARK(BM_FitValue);

void BM_DetectIterative(benchmark::State& state) {
  const GrayImage img = scene_frame(256, 20);
  DetectorConfig dc;
  dc.iterations = static_cast<int>(state.range(0));
  ScanPlan plan(dc, 256, 256);
  for (auto _ : state) benchmark::DoNotOptimize(detect_iterative(img, dc, ellipse_segmenter(), 0, &plan));
}
BENCHMARK(BM_DetectIterative)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace
