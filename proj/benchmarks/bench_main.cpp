#include <random>
#include <string>

#include <benchmark/benchmark.h>

#include "cislunar/cr3bp.hpp"
#include "cislunar/orbit_catalog.hpp"
#include "cislunar/scenario.hpp"
#include "cislunar/tasking.hpp"

using namespace cislunar;

namespace {

const std::vector<PeriodicOrbit>& catalog() {
  static const auto c = load_catalog(std::string(CISLUNAR_BENCH_DATA_DIR) + "/catalog.json");
  return c;
}

WeightTensor random_weights(int M, int N, int L, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  WeightTensor w(M, N, L);
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < N; ++j)
      for (int k = 0; k < L; ++k) w(i, j, k) = u(rng);
  return w;
}

void BM_PropagateStmOnePeriod(benchmark::State& state) {
  const auto& orbit = catalog()[static_cast<std::size_t>(state.range(0))];
  const Cr3bpParams params;
  for (auto _ : state) benchmark::DoNotOptimize(propagate(orbit.x0, 0.0, orbit.period, params));
  state.SetLabel(orbit.name);
}
BENCHMARK(BM_PropagateStmOnePeriod)->DenseRange(0, 9)->Unit(benchmark::kMillisecond);

void BM_MaxTrace(benchmark::State& state) {
  const auto w = random_weights(3, 7, static_cast<int>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(solve_max_trace(w));
}
BENCHMARK(BM_MaxTrace)->Arg(6)->Arg(10)->Arg(14)->Unit(benchmark::kMillisecond);

void BM_MaxMin(benchmark::State& state) {
  const auto w = random_weights(2, 3, static_cast<int>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(solve_max_min(w));
}
BENCHMARK(BM_MaxMin)->Arg(3)->Arg(5)->Arg(7)->Unit(benchmark::kMillisecond);

void BM_BuildWeights(benchmark::State& state) {
  const Scenario s = load_scenario(std::string(CISLUNAR_BENCH_DATA_DIR) + "/tables23.json");
  const Schedule schedule = Schedule::make(s.t0, static_cast<int>(state.range(0)), s.delta_t, s.eps_t);
  const auto observers = make_trajectories(s.observers, s.params, schedule);
  const auto targets = make_trajectories(s.targets, s.params, schedule);
  for (auto _ : state) benchmark::DoNotOptimize(build_weight_model(observers, targets, s.noise(), schedule));
}
BENCHMARK(BM_BuildWeights)->Arg(20)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
