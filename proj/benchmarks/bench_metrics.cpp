#include <benchmark/benchmark.h>

#include <vector>

#include "relkit/eval_metrics.hpp"
#include "relkit/rng.hpp"

namespace {

struct Pairs {
  std::vector<double> x, y;
};

// Rating-like data: eleven levels, heavy ties.
Pairs rating_pairs(std::size_t n) {
  relkit::rng::Engine e(n);
  Pairs p;
  p.x.resize(n);
  p.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    p.x[i] = static_cast<double>(relkit::rng::below(e, 11));
    p.y[i] = p.x[i] + relkit::rng::normal(e);
  }
  return p;
}

void BM_Spearman(benchmark::State& state) {
  const auto p = rating_pairs(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(relkit::spearman(p.x, p.y));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Spearman)->RangeMultiplier(4)->Range(256, 65536)->Complexity();

void BM_KendallTauB(benchmark::State& state) {
  const auto p = rating_pairs(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(relkit::kendall_tau_b(p.x, p.y));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_KendallTauB)->RangeMultiplier(4)->Range(256, 65536)->Complexity(benchmark::oNLogN);

void BM_Evaluate(benchmark::State& state) {
  const auto p = rating_pairs(2598);
  for (auto _ : state) benchmark::DoNotOptimize(relkit::evaluate(p.x, p.y));
}
BENCHMARK(BM_Evaluate);

}  // namespace

BENCHMARK_MAIN();
