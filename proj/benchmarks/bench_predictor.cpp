#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "relkit/predictor/model.hpp"
#include "relkit/predictor/optimizer.hpp"
#include "relkit/rng.hpp"

using namespace relkit::predictor;

namespace {

// Default desk-scale sizes; F and D match typical encoder outputs.
ModelConfig bench_config() {
  ModelConfig c;
  c.audio_dim = 64;
  c.text_dim = 64;
  c.num_listeners = 100;
  return c;
}

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  relkit::rng::Engine e(seed);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = relkit::rng::normal(e);
  return m;
}

void BM_Forward(benchmark::State& state) {
  const auto cfg = bench_config();
  const auto params = ModelParams::initialize(cfg);
  const auto audio = random_matrix(64, state.range(0), 1);
  const Eigen::VectorXd text = random_matrix(64, 1, 2);
  for (auto _ : state) benchmark::DoNotOptimize(forward(params, audio, text, 3));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->Arg(10)->Arg(100)->Arg(500);

void BM_ForwardBackward(benchmark::State& state) {
  const auto cfg = bench_config();
  const auto params = ModelParams::initialize(cfg);
  auto grads = ModelParams::zeros(cfg);
  const auto audio = random_matrix(64, state.range(0), 1);
  const Eigen::VectorXd text = random_matrix(64, 1, 2);
  ForwardCache cache;
  for (auto _ : state) {
    const double y = forward(params, audio, text, 3, &cache);
    backward(params, cache, y - 0.5, grads);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardBackward)->Arg(10)->Arg(100)->Arg(500);

void BM_AdamStep(benchmark::State& state) {
  const auto cfg = bench_config();
  auto params = ModelParams::initialize(cfg);
  auto grads = ModelParams::initialize(ModelConfig{cfg.audio_dim, cfg.text_dim, cfg.listener_dim, cfg.hidden,
                                                   cfg.head_hidden, cfg.num_listeners, 99});
  Adam adam(params, AdamHyper{});
  for (auto _ : state) adam.step(params, grads, 1e-7);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(params.parameter_count()));
}
BENCHMARK(BM_AdamStep);

}  // namespace

BENCHMARK_MAIN();
