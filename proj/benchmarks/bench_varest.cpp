#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "pgee/varest.hpp"

namespace {

pgee::FitKernel kernel_for(std::size_t N) {
  return pgee::fit(bench::dataset(N), pgee::WorkingModel{}).kernel;
}

}  // namespace

static void BM_Estimator(benchmark::State& state) {
  const auto id = pgee::kAllEstimators[static_cast<std::size_t>(state.range(0))];
  const auto k = kernel_for(static_cast<std::size_t>(state.range(1)));
  state.SetLabel(std::string(pgee::to_string(id)));
  for (auto _ : state) benchmark::DoNotOptimize(pgee::estimate_variance(k, id));
}
BENCHMARK(BM_Estimator)
    ->ArgsProduct({benchmark::CreateDenseRange(0, 13, 1), {10, 50}})
    ->Unit(benchmark::kMicrosecond);

// the whole list shares one leverage decomposition
static void BM_AllEstimators(benchmark::State& state) {
  const auto k = kernel_for(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(pgee::estimate_all(k));
}
BENCHMARK(BM_AllEstimators)->Arg(10)->Arg(50)->Arg(200)->Unit(benchmark::kMicrosecond);

static void BM_Overcorrection(benchmark::State& state) {
  const auto k = kernel_for(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(pgee::overcorrection_diagnostic(k));
}
BENCHMARK(BM_Overcorrection)->Arg(10)->Arg(50)->Unit(benchmark::kMicrosecond);
