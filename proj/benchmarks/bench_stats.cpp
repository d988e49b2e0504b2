#include <benchmark/benchmark.h>

#include <vector>

#include "relkit/art_anova.hpp"
#include "relkit/rng.hpp"
#include "relkit/special_functions.hpp"
#include "relkit/stats.hpp"

namespace {

relkit::Sample ratings(std::size_t n, std::uint64_t seed) {
  relkit::rng::Engine e(seed);
  relkit::Sample s(n);
  for (auto& v : s) v = static_cast<double>(relkit::rng::below(e, 11));
  return s;
}

void BM_MannWhitney(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = ratings(n, 1), b = ratings(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(relkit::mann_whitney_u(a, b));
}
BENCHMARK(BM_MannWhitney)->Arg(100)->Arg(5000);

void BM_KruskalWallis(benchmark::State& state) {
  std::vector<relkit::Sample> groups;
  for (std::uint64_t g = 0; g < 5; ++g) groups.push_back(ratings(2000, g));
  for (auto _ : state) benchmark::DoNotOptimize(relkit::kruskal_wallis(groups));
}
BENCHMARK(BM_KruskalWallis);

void BM_SteelDwass(benchmark::State& state) {
  std::vector<relkit::Sample> groups;
  for (std::int64_t g = 0; g < state.range(0); ++g) groups.push_back(ratings(500, static_cast<std::uint64_t>(g)));
  for (auto _ : state) benchmark::DoNotOptimize(relkit::steel_dwass(groups));
}
BENCHMARK(BM_SteelDwass)->Arg(3)->Arg(5);

void BM_StudentizedRangeTail(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  double q = 0.5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(relkit::special::studentized_range_sf(q, k));
    q = q > 6.0 ? 0.5 : q + 0.37;
  }
}
BENCHMARK(BM_StudentizedRangeTail)->Arg(2)->Arg(5)->Arg(10);

void BM_ArtAnova(benchmark::State& state) {
  relkit::TwoWayDesign d;
  d.levels_a = 3;
  d.levels_b = 2;
  relkit::rng::Engine e(9);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    d.a.push_back(static_cast<int>(i % 3));
    d.b.push_back(static_cast<int>((i / 3) % 2));
    y[i] = static_cast<double>(relkit::rng::below(e, 11));
  }
  for (auto _ : state) benchmark::DoNotOptimize(relkit::art_anova_2x(y, d));
}
BENCHMARK(BM_ArtAnova)->Arg(600)->Arg(9000);

}  // namespace

BENCHMARK_MAIN();
