#include "relkit/clap_baseline.hpp"

#include <algorithm>
#include <cmath>

#include "relkit/error.hpp"
#include "relkit/feature_io.hpp"

namespace relkit {
namespace {

template <typename T>
double cosine(std::span<const T> a, std::span<const T> t) {
  if (a.size() != t.size()) throw DataError("embedding length mismatch");
  double dot = 0.0, na = 0.0, nt = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i];
    const double y = t[i];
    dot += x * y;
    na += x * x;
    nt += y * y;
  }
  if (na == 0.0 || nt == 0.0) throw NumericError("zero-norm embedding");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nt)), -1.0, 1.0);
}

std::vector<double> widen(const FeatureTensor& t) {
  if (t.rank() != 1) throw DataError("CLAP embedding must be rank 1");
  return {t.data.begin(), t.data.end()};
}

}  // namespace

double clap_score(std::span<const double> audio_emb, std::span<const double> text_emb) {
  return cosine(audio_emb, text_emb);
}

double clap_score(std::span<const float> audio_emb, std::span<const float> text_emb) {
  return cosine(audio_emb, text_emb);
}

BaselineReport baseline_report(const std::map<std::string, EmbeddingPair>& embeddings,
                               const std::map<std::string, double>& truth_raw, const Dataset& d) {
  BaselineReport out;
  std::vector<double> pred, truth;
  std::vector<CategorySet> cats;
  for (const auto& [id, raw] : truth_raw) {
    auto it = embeddings.find(id);
    if (it == embeddings.end()) {
      out.missing.push_back(id);
      continue;
    }
    const double s = clap_score(it->second.audio, it->second.text);
    out.scores.emplace(id, s);
    pred.push_back(s);
    truth.push_back(normalize_score(raw));
    cats.push_back(d.pair(id).top_categories);
  }
  out.metrics = evaluate(pred, truth);
  out.per_category = per_category_srcc(pred, truth, cats);
  return out;
}

std::map<std::string, EmbeddingPair> load_embeddings(const std::filesystem::path& audio_dir,
                                                     const std::filesystem::path& text_dir,
                                                     const std::vector<std::string>& pair_ids) {
  std::map<std::string, EmbeddingPair> out;
  for (const auto& id : pair_ids) {
    const auto ap = feature_path(audio_dir, id);
    const auto tp = feature_path(text_dir, id);
    if (!std::filesystem::exists(ap) || !std::filesystem::exists(tp)) continue;
    out.emplace(id, EmbeddingPair{widen(read_feature(ap)), widen(read_feature(tp))});
  }
  return out;
}

}  // namespace relkit
