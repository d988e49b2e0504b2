#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "relkit/data_model.hpp"

namespace relkit {

// Parameters of the synthetic rating study written by make_fixture.
struct FixtureSpec {
  std::uint64_t seed = 7;
  std::size_t num_texts = 200;
  std::size_t synthetic_per_text = 2;
  std::size_t anchors_per_split = 10;
  std::size_t anchors_per_listener = 3;  // per split
  std::size_t num_listeners = 60;
  std::size_t anchor_failing_listeners = 4;
  std::size_t harsh_listeners = 2;  // rate everything far below the truth
  std::size_t flat_listeners = 3;   // always give the same score
  std::size_t ratings_per_pair = 5;
  std::size_t quality_ratings_per_pair = 2;  // IS and OS
  double test_fraction = 0.3;
  double listener_bias_sd = 0.8;
  double noise_sd = 1.0;
  double animal_synthetic_shift = -3.0;
  double temporal_synthetic_shift = -1.5;
  // When false the features and embeddings are drawn independently of the
  // scores.
  bool features_carry_signal = true;
  double clap_noise_sd = 0.18;
  std::size_t audio_dim = 16;
  std::size_t text_dim = 16;
  std::size_t clap_dim = 32;
  std::vector<std::size_t> frame_counts = {6, 8, 10};

  static FixtureSpec small();
  void validate() const;
};

// Accepts "small" / "default" or key=value overrides separated by commas,
// e.g. "small,num_texts=40,seed=3". Throws UsageError.
FixtureSpec parse_fixture_spec(const std::string& text, std::uint64_t seed);

struct FixtureListeners {
  std::vector<std::string> anchor_failing;
  std::vector<std::string> harsh;
  std::vector<std::string> flat;
};

struct Fixture {
  Dataset dataset;
  FixtureListeners planted;
  std::map<std::string, double> true_mean;  // noise-free expected REL per pair
};

Fixture generate_fixture(const FixtureSpec& spec);

// Layout under `root`:
//   dataset/{pairs,listeners,evaluations}.jsonl
//   features/audio/<id>.rfb (F x T), features/text/<id>.rfb (D)
//   clap/audio/<id>.rfb, clap/text/<id>.rfb (E)
//   manifest.json
Fixture write_fixture(const FixtureSpec& spec, const std::filesystem::path& root);

}  // namespace relkit
