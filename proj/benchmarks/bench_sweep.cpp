#include <benchmark/benchmark.h>

#include "vcshrink/gibbs.hpp"
#include "vcshrink/pipeline.hpp"

using namespace vcshrink;

namespace {

GibbsSampler exp1_sampler(std::size_t n, int trees) {
  DgpSpec spec = DgpSpec::experiment1();
  spec.n_train = n;
  spec.n_test = 1;
  spec.seed = 1;
  auto tt = simulate(spec);
  Hyperparameters h;
  h.trees = trees;
  h = h.resolved(tt.train.y, tt.train.p());
  return GibbsSampler(std::move(tt.train), h);
}

// One full sweep on exp1 data after a short warm-up.
void BM_Sweep(benchmark::State& state) {
  auto s = exp1_sampler(static_cast<std::size_t>(state.range(0)), static_cast<int>(state.range(1)));
  const RngStream stream(2, 0);
  for (int k = 0; k < 50; ++k) s.sweep(stream);
  for (auto _ : state) s.sweep(stream);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Sweep)->Args({250, 50})->Args({500, 50})->Args({1000, 50})->Args({2000, 50})->Args({500, 10})
    ->Unit(benchmark::kMillisecond);

void BM_LeafLogMarginal(benchmark::State& state) {
  SufficientStats s;
  for (int i = 0; i < 20; ++i) s.add(0.1 * i, 1.0 - 0.05 * i);
  double sigma2 = 0.9;
  for (auto _ : state) {
    benchmark::DoNotOptimize(leaf_log_marginal(s, 0.02, sigma2));
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_LeafLogMarginal);

void BM_ScaleUpdates(benchmark::State& state) {
  auto s = exp1_sampler(500, 50);
  const RngStream stream(3, 0);
  for (int k = 0; k < 20; ++k) s.sweep(stream);
  Rng rng = stream.engine();
  for (auto _ : state) {
    s.update_lambda(rng);
    s.update_tau(rng);
    s.update_c2(rng);
  }
}
BENCHMARK(BM_ScaleUpdates);

}  // namespace

BENCHMARK_MAIN();
