#include <benchmark/benchmark.h>

#include <random>

#include "ellitrack/forest.hpp"

using namespace ellitrack;

namespace {

std::vector<TrainingSample> samples(int n) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<TrainingSample> out;
  for (int i = 0; i < n; ++i) {
    std::array<double, kFeatureCount> v{};
    for (double& x : v) x = u(rng);
    out.push_back({FeatureVector::from_values(v), v[0] + 0.3 * v[1] + 0.2 * u(rng) < 0.75});
  }
  return out;
}

void BM_TrainForest(benchmark::State& state) {
  const auto s = samples(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(train_forest(s, 50, 1));
}
BENCHMARK(BM_TrainForest)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_Votes(benchmark::State& state) {
  const auto s = samples(1000);
  const Forest f = train_forest(s, 50, 1);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(f.votes(s[i++ % s.size()].features));
}
BENCHMARK(BM_Votes);

}  // namespace
