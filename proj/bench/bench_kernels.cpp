#include <benchmark/benchmark.h>

#include "cutoff/estimators.hpp"
#include "cutoff/support.hpp"

using namespace cutoff;

namespace {

Execution mode(const benchmark::State& state) { return state.range(0) ? Execution::parallel : Execution::serial; }

std::vector<double> grid(double step, double end) {
  std::vector<double> t;
  for (int k = 0; k * step <= end + 1e-12; ++k) t.push_back(k * step);
  return t;
}

void BM_TvUpper(benchmark::State& state) {
  const auto g = TorusGeometry::cube(2, 16);
  const auto t = grid(0.5, 10);
  for (auto _ : state) {
    benchmark::DoNotOptimize(tv_upper_via_coalescence(ModelSpec::ising(0.3), g, t, 200, 1, mode(state)));
  }
}

void BM_TvLower(benchmark::State& state) {
  const auto g = TorusGeometry::cube(1, 64);
  const auto t = grid(0.5, 10);
  for (auto _ : state) {
    benchmark::DoNotOptimize(tv_lower_via_statistic(ModelSpec::ising(0.4), g, t, 200, 1, {}, mode(state)));
  }
}

void BM_Xi(benchmark::State& state) {
  const auto g = TorusGeometry::cube(1, 128);
  const auto t = grid(0.5, 10);
  for (auto _ : state) benchmark::DoNotOptimize(xi_t_curve(ModelSpec::ising(0.4), g, t, 500, 1, mode(state)));
}

void BM_SupportMaps(benchmark::State& state) {
  const auto g = TorusGeometry::cube(2, 32);
  const auto p = BlockPartition::build(g, default_block_side(32), default_halo(32));
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8};
  const auto t = grid(1.0, 3);
  const auto th = SparsityThresholds::defaults(32, 2);
  for (auto _ : state) benchmark::DoNotOptimize(support_maps(ModelSpec::ising(0.3), p, seeds, t, th, mode(state)));
}

}  // namespace

// Argument 0 runs the serial reference, 1 the OpenMP kernel.
BENCHMARK(BM_TvUpper)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TvLower)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Xi)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SupportMaps)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
