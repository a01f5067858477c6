#include <benchmark/benchmark.h>

#include <map>

#include "wde/besov_densities.hpp"
#include "wde/coefficients.hpp"
#include "wde/estimators.hpp"
#include "wde/monte_carlo.hpp"
#include "wde/projection_kernel.hpp"

using namespace wde;

namespace {

const DensityModel& normal() {
  static const DensityModel d = mc::make_zoo_density("normal", 14);
  return d;
}

const Sample& sample(std::size_t n) {
  static std::map<std::size_t, Sample> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, sample_density(normal(), n, 42)).first;
  return it->second;
}

Exec exec_of(const benchmark::State& state) { return state.range(0) ? Exec::parallel : Exec::serial; }

void BM_ProjectDensity(benchmark::State& state) {
  const auto ctx = shared_context("db2", 14);
  for (auto _ : state) benchmark::DoNotOptimize(project_density(*ctx, 6, normal().grid, exec_of(state)));
}

void BM_EmpiricalCoefficients(benchmark::State& state) {
  const auto ctx = shared_context("db2", 14);
  const auto& s = sample(static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(empirical_coefficients(s, ctx->b(), 4, 10, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}

void BM_EvalDensity(benchmark::State& state) {
  const auto ctx = shared_context("db2", 14);
  const Estimator est = fit_linear(sample(1 << 16), ctx, 8);
  std::vector<double> points(1 << 16);
  for (std::size_t i = 0; i < points.size(); ++i) points[i] = -6.0 + 12.0 * static_cast<double>(i) / points.size();
  for (auto _ : state) benchmark::DoNotOptimize(eval_density(est, points, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(points.size()));
}

}  // namespace

BENCHMARK(BM_ProjectDensity)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EmpiricalCoefficients)->ArgNames({"parallel", "n"})->Args({0, 1 << 16})->Args({1, 1 << 16})
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvalDensity)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
