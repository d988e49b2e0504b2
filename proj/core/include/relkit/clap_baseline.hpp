#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "relkit/data_model.hpp"
#include "relkit/eval_metrics.hpp"

namespace relkit {

// Cosine similarity of an audio and a text embedding. Throws DataError on a
// length mismatch and NumericError on a zero-norm vector.
double clap_score(std::span<const double> audio_emb, std::span<const double> text_emb);
double clap_score(std::span<const float> audio_emb, std::span<const float> text_emb);

struct EmbeddingPair {
  std::vector<double> audio;
  std::vector<double> text;
};

struct BaselineReport {
  MetricReport metrics;
  std::map<TopCategory, std::optional<double>> per_category;
  std::vector<std::string> missing;  // pairs without embeddings, skipped
  std::map<std::string, double> scores;
};

// Scores every pair in `truth_raw` (per-pair mean on the 0-10 scale) that
// has an embedding and evaluates against the normalized truth.
BaselineReport baseline_report(const std::map<std::string, EmbeddingPair>& embeddings,
                               const std::map<std::string, double>& truth_raw,
                               const Dataset& d);

// Reads <audio_dir>/<id>.rfb and <text_dir>/<id>.rfb (rank 1) for each id;
// ids without both files are left out.
std::map<std::string, EmbeddingPair> load_embeddings(const std::filesystem::path& audio_dir,
                                                     const std::filesystem::path& text_dir,
                                                     const std::vector<std::string>& pair_ids);

}  // namespace relkit
