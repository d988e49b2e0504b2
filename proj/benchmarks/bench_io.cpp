#include <benchmark/benchmark.h>

#include <filesystem>
#include <unistd.h>

#include "relkit/data_model.hpp"
#include "relkit/feature_io.hpp"
#include "relkit/fixture.hpp"
#include "relkit/predictor/checkpoint.hpp"

namespace {

void BM_DecodeRfb(benchmark::State& state) {
  const auto frames = static_cast<std::uint32_t>(state.range(0));
  std::vector<float> values(64u * frames);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<float>(i) * 0.25f;
  const auto bytes = relkit::encode_rfb(relkit::FeatureTensor::matrix(64, frames, values));
  for (auto _ : state) benchmark::DoNotOptimize(relkit::decode_rfb(bytes));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(bytes.size()));
}
BENCHMARK(BM_DecodeRfb)->Arg(100)->Arg(1000);

void BM_CheckpointRoundTrip(benchmark::State& state) {
  relkit::predictor::ModelConfig cfg;
  cfg.audio_dim = 64;
  cfg.text_dim = 64;
  cfg.num_listeners = 1000;
  const auto params = relkit::predictor::ModelParams::initialize(cfg);
  for (auto _ : state) {
    const auto bytes = relkit::predictor::encode_checkpoint(cfg, params);
    benchmark::DoNotOptimize(relkit::predictor::decode_checkpoint(bytes));
  }
}
BENCHMARK(BM_CheckpointRoundTrip);

void BM_LoadDataset(benchmark::State& state) {
  const auto dir = std::filesystem::temp_directory_path() / ("relkit_bench_" + std::to_string(::getpid()));
  relkit::write_fixture(relkit::FixtureSpec{}, dir);
  for (auto _ : state) benchmark::DoNotOptimize(relkit::load_dataset(dir / "dataset"));
  std::filesystem::remove_all(dir);
}
BENCHMARK(BM_LoadDataset)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
