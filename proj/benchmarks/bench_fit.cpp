#include <benchmark/benchmark.h>

#include "bench_common.hpp"

static void BM_Fit(benchmark::State& state) {
  const auto d = bench::dataset(static_cast<std::size_t>(state.range(0)));
  pgee::WorkingModel wm;
  wm.dispersion = std::nullopt;
  for (auto _ : state) benchmark::DoNotOptimize(pgee::fit(d, wm));
}
BENCHMARK(BM_Fit)->Arg(10)->Arg(50)->Arg(200)->Unit(benchmark::kMicrosecond);

static void BM_FitUnpenalized(benchmark::State& state) {
  const auto d = bench::dataset(static_cast<std::size_t>(state.range(0)));
  pgee::FitOptions o;
  o.penalized = false;
  for (auto _ : state) benchmark::DoNotOptimize(pgee::fit(d, pgee::WorkingModel{}, o));
}
BENCHMARK(BM_FitUnpenalized)->Arg(10)->Arg(50)->Unit(benchmark::kMicrosecond);

static void BM_FirthPenalty(benchmark::State& state) {
  const auto d = bench::dataset(50);
  const auto f = pgee::fit(d, pgee::WorkingModel{});
  for (auto _ : state) benchmark::DoNotOptimize(pgee::firth_penalty(f.kernel, d));
}
BENCHMARK(BM_FirthPenalty)->Unit(benchmark::kMicrosecond);
