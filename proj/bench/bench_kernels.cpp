// Serial reference vs OpenMP for the two parallel kernels: Monte Carlo
// replications (simulate + LSE) and the uncached covariance table. Also
// boundary-only vs full-hull Cholesky sampling.
#include <benchmark/benchmark.h>

#include "nusar/covariance.hpp"
#include "nusar/estimate.hpp"
#include "nusar/replicate.hpp"
#include "nusar/simulate.hpp"

namespace {

using namespace nusar;

void replications(benchmark::State& state, ExecPolicy policy) {
  const int s = static_cast<int>(state.range(0));
  const ModelParams p{0.49, 0.49};
  const TriangleWindow w = TriangleWindow::balanced(s);
  const FieldSampler sampler(p, w, SimMethod::boundary_cholesky(), InnovationDist::Gaussian);
  constexpr std::size_t kReps = 64;
  for (auto _ : state) {
    auto est = run_replications<double>(
        kReps, [&](std::size_t r) { return lse(sampler.sample(RngStream(7, r)), w).alpha_hat; }, policy);
    benchmark::DoNotOptimize(est.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(kReps));
}

void BM_ReplicationsSerial(benchmark::State& state) { replications(state, ExecPolicy::Serial); }
void BM_ReplicationsOpenMP(benchmark::State& state) { replications(state, ExecPolicy::OpenMP); }
BENCHMARK(BM_ReplicationsSerial)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ReplicationsOpenMP)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void cov_table(benchmark::State& state, ExecPolicy policy) {
  const int extent = static_cast<int>(state.range(0));
  const CovKernel kernel({0.45, 0.45});
  for (auto _ : state) {
    auto t = covariance_table(kernel, extent, extent, policy);
    benchmark::DoNotOptimize(t.values.data());
  }
}

void BM_CovTableSerial(benchmark::State& state) { cov_table(state, ExecPolicy::Serial); }
void BM_CovTableOpenMP(benchmark::State& state) { cov_table(state, ExecPolicy::OpenMP); }
BENCHMARK(BM_CovTableSerial)->Arg(32)->Arg(96)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CovTableOpenMP)->Arg(32)->Arg(96)->Unit(benchmark::kMillisecond);

void sample(benchmark::State& state, SimMethod method) {
  const int s = static_cast<int>(state.range(0));
  const FieldSampler sampler({0.3, 0.4}, TriangleWindow::balanced(s), method, InnovationDist::Gaussian);
  std::uint64_t rep = 0;
  for (auto _ : state) {
    Field f = sampler.sample(RngStream(11, rep++));
    benchmark::DoNotOptimize(f.values().data());
  }
}

void BM_SampleBoundaryCholesky(benchmark::State& state) { sample(state, SimMethod::boundary_cholesky()); }
void BM_SampleFullCholesky(benchmark::State& state) { sample(state, SimMethod::full_cholesky()); }
BENCHMARK(BM_SampleBoundaryCholesky)->Arg(12)->Arg(24)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_SampleFullCholesky)->Arg(12)->Arg(24)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
