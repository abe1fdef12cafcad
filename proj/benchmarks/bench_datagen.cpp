#include <benchmark/benchmark.h>

#include "pgee/datagen.hpp"

static void BM_ClfDraw(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const auto coef = pgee::clf_coefficients(static_cast<std::size_t>(n), pgee::CorrStructure::Exchangeable, 0.2);
  const Eigen::VectorXd mu = Eigen::VectorXd::Constant(n, 0.2);
  pgee::StreamRng rng(1);
  for (auto _ : state) benchmark::DoNotOptimize(pgee::clf_generate(mu, coef, rng));
}
BENCHMARK(BM_ClfDraw)->Arg(4)->Arg(8)->Arg(16);

static void BM_GenerateReplicate(benchmark::State& state) {
  pgee::Scenario s;
  s.N = static_cast<std::size_t>(state.range(0));
  s.event_rate = 0.1;
  const double b0 = pgee::calibrate_intercept(s);
  std::uint64_t rep = 0;
  for (auto _ : state) benchmark::DoNotOptimize(pgee::generate_replicate(s, b0, 0, rep++));
}
BENCHMARK(BM_GenerateReplicate)->Arg(10)->Arg(50)->Unit(benchmark::kMicrosecond);

static void BM_CalibrateIntercept(benchmark::State& state) {
  pgee::Scenario s;
  s.N = 50;
  s.n_pattern = {3, 8};
  for (auto _ : state) benchmark::DoNotOptimize(pgee::calibrate_intercept(s));
}
BENCHMARK(BM_CalibrateIntercept)->Unit(benchmark::kMicrosecond);
