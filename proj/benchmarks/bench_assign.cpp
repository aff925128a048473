#include <benchmark/benchmark.h>

#include <random>

#include "ellitrack/assign.hpp"

using namespace ellitrack;

namespace {

CostMatrix random_costs(int n, std::uint64_t seed, double forbid) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  CostMatrix m(n, n, 0.0);
  for (double& c : m.costs) c = u(rng) < forbid ? kForbidden : u(rng);
  return m;
}

void BM_SolveLap(benchmark::State& state) {
  const CostMatrix m = random_costs(static_cast<int>(state.range(0)), 1, 0.0);
  for (auto _ : state) benchmark::DoNotOptimize(solve_lap(m));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SolveLap)->RangeMultiplier(2)->Range(8, 512)->Complexity();

void BM_SolveLapWithSlack(benchmark::State& state) {
  const CostMatrix m = random_costs(static_cast<int>(state.range(0)), 2, 0.8);
  for (auto _ : state) benchmark::DoNotOptimize(solve_lap_with_slack(m, 0.5));
}
BENCHMARK(BM_SolveLapWithSlack)->RangeMultiplier(2)->Range(8, 256);

void BM_SolveGreedy(benchmark::State& state) {
  const CostMatrix m = random_costs(static_cast<int>(state.range(0)), 3, 0.8);
  for (auto _ : state) benchmark::DoNotOptimize(solve_greedy(m, 0.5));
}
BENCHMARK(BM_SolveGreedy)->RangeMultiplier(2)->Range(8, 256);

}  // namespace
BENCHMARK_MAIN();
