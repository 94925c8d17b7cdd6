#include <benchmark/benchmark.h>

#include <omp.h>

#include "mcpose/harness.hpp"

namespace {

mcpose::ExperimentConfig bench_config(std::size_t runs) {
  mcpose::ExperimentConfig cfg = mcpose::desk_scale_config();
  cfg.sim.n_runs = runs;
  cfg.sim.n_frames = 50;
  return cfg;
}

void BM_MonteCarloSerial(benchmark::State& state) {
  const auto cfg = bench_config(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(mcpose::monte_carlo(cfg, mcpose::Execution::Serial));
  }
  state.counters["runs/s"] = benchmark::Counter(static_cast<double>(state.range(0)) *
                                                    static_cast<double>(state.iterations()),
                                                benchmark::Counter::kIsRate);
}

void BM_MonteCarloParallel(benchmark::State& state) {
  const auto cfg = bench_config(static_cast<std::size_t>(state.range(0)));
  omp_set_num_threads(static_cast<int>(state.range(1)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(mcpose::monte_carlo(cfg, mcpose::Execution::Parallel));
  }
  state.counters["runs/s"] = benchmark::Counter(static_cast<double>(state.range(0)) *
                                                    static_cast<double>(state.iterations()),
                                                benchmark::Counter::kIsRate);
  state.counters["threads"] = static_cast<double>(state.range(1));
}

}  // namespace

BENCHMARK(BM_MonteCarloSerial)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_MonteCarloParallel)
    ->ArgsProduct({{8}, {1, 2, 4, 8}})
    ->Unit(benchmark::kMillisecond)
    ->UseRealTime();

BENCHMARK_MAIN();
