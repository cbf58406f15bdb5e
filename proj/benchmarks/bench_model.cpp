#include <benchmark/benchmark.h>

#include "hyperembed/model.hpp"
#include "hyperembed/rng.hpp"

using namespace hyperembed;

namespace {

UncenteredParams make_params(int m, int n, int k) {
  Rng rng(42);
  UncenteredParams p;
  p.alpha_dagger.resize(n);
  for (int i = 0; i < n; ++i) p.alpha_dagger[i] = rng.uniform(-2.0, 0.0);
  p.F.resize(m, k);
  p.Z.resize(n, k);
  for (int j = 0; j < m; ++j)
    for (int c = 0; c < k; ++c) p.F(j, c) = rng.uniform(-1.0, 1.0);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < k; ++c) p.Z(i, c) = rng.uniform(-1.0, 1.0);
  return p;
}

Eigen::MatrixXd make_y(int m, int n) {
  Rng rng(7);
  Eigen::MatrixXd y(m, n);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < n; ++i) y(j, i) = rng.bernoulli(0.2) ? 1.0 : 0.0;
  return y;
}

}  // namespace

static void BM_LogLikelihood(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const UncenteredParams p = make_params(2 * n, n, 2);
  const Eigen::MatrixXd y = make_y(2 * n, n);
  for (auto _ : state) {
    benchmark::DoNotOptimize(log_likelihood(p, y));
  }
  state.SetItemsProcessed(state.iterations() * 2 * static_cast<long long>(n) * n);
}
BENCHMARK(BM_LogLikelihood)->Arg(200)->Arg(400)->Arg(800);

static void BM_Gradient(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const UncenteredParams p = make_params(2 * n, n, 2);
  const Eigen::MatrixXd y = make_y(2 * n, n);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gradient(p, y));
  }
  state.SetItemsProcessed(state.iterations() * 2 * static_cast<long long>(n) * n);
}
BENCHMARK(BM_Gradient)->Arg(200)->Arg(400)->Arg(800);

static void BM_IdentifiabilityTransform(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  UncenteredParams p = make_params(2 * n, n, 2);
  p.F.rowwise() -= p.F.colwise().mean();
  for (auto _ : state) {
    benchmark::DoNotOptimize(identifiability_transform(p.F, p.Z));
  }
}
BENCHMARK(BM_IdentifiabilityTransform)->Arg(400)->Arg(1600);
