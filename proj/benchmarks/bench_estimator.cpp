#include <benchmark/benchmark.h>

#include "hyperembed/estimator.hpp"
#include "hyperembed/simulate.hpp"

using namespace hyperembed;

namespace {

IncidenceMatrix make_incidence(int n, double beta) {
  SimDesign design;
  design.n = n;
  design.m = 2 * n;
  design.k = 2;
  design.beta_star = beta;
  design.seed = 11;
  const GroundTruth gt = gen_ground_truth(design);
  return incidence(gen_hypergraph(gt, 12));
}

}  // namespace

static void BM_UsvtInit(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const IncidenceMatrix y = make_incidence(n, -1.0);
  const TuneResult tune = tune_c_beta(y, 1.5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(usvt_init(y, 2, tune.c_beta));
  }
}
BENCHMARK(BM_UsvtInit)->Arg(200)->Arg(400)->Unit(benchmark::kMillisecond);

static void BM_Fit(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const IncidenceMatrix y = make_incidence(n, -1.0);
  FitConfig config;
  config.k = 2;
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit(y, config));
  }
}
BENCHMARK(BM_Fit)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);

static void BM_ProjectF2(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  SimDesign design;
  design.n = n;
  design.m = 2 * n;
  design.k = 2;
  design.beta_star = -1.0;
  design.seed = 3;
  const GroundTruth gt = gen_ground_truth(design);
  UncenteredParams p;
  p.alpha_dagger = gt.alpha_dagger;
  p.F = gt.params.F;
  p.Z = gt.params.Z;
  const F2Bounds bounds = F2Bounds::strict(3.0, 0.9, 2.0, 2.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(project_f2(p, bounds));
  }
}
BENCHMARK(BM_ProjectF2)->Arg(400)->Arg(1600);
