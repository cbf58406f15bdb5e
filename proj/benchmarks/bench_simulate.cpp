#include <benchmark/benchmark.h>

#include "hyperembed/simulate.hpp"

using namespace hyperembed;

static void BM_GenGroundTruth(benchmark::State& state) {
  SimDesign design;
  design.n = static_cast<int>(state.range(0));
  design.m = 10 * design.n;
  design.k = 2;
  design.rho = 0.5;
  design.beta_star = -3.0;
  design.seed = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(gen_ground_truth(design));
  }
}
BENCHMARK(BM_GenGroundTruth)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

static void BM_GenHypergraph(benchmark::State& state) {
  SimDesign design;
  design.n = static_cast<int>(state.range(0));
  design.m = 10 * design.n;
  design.k = 2;
  design.beta_star = -3.0;
  design.seed = 1;
  const GroundTruth gt = gen_ground_truth(design);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(gen_hypergraph(gt, ++seed));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long long>(design.m) * design.n);
}
BENCHMARK(BM_GenHypergraph)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
