#pragma once

#include <array>
#include <bitset>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace relkit {

enum class MetricKind : std::uint8_t { kRel, kIs, kOs };
enum class Split : std::uint8_t { kTrain, kTest };
enum class Origin : std::uint8_t { kOriginal, kAudioLdm, kAudioLdm2, kTango, kTango2 };

// The eight coarse sound classes used for per-category analysis.
enum class TopCategory : std::uint8_t {
  kHumanSounds,
  kAnimal,
  kNaturalSounds,
  kMusic,
  kSoundsOfThings,
  kSourceAmbiguousSounds,
  kChannelEnvironmentBackground,
  kSpeech,
};
inline constexpr std::size_t kNumTopCategories = 8;
inline constexpr std::array<TopCategory, kNumTopCategories> kAllTopCategories = {
    TopCategory::kHumanSounds,    TopCategory::kAnimal,
    TopCategory::kNaturalSounds,  TopCategory::kMusic,
    TopCategory::kSoundsOfThings, TopCategory::kSourceAmbiguousSounds,
    TopCategory::kChannelEnvironmentBackground, TopCategory::kSpeech,
};

inline constexpr int kMinScore = 0;
inline constexpr int kMaxScore = 10;

std::string_view to_string(MetricKind m);
std::string_view to_string(Split s);
std::string_view to_string(Origin o);
std::string_view to_string(TopCategory c);

// Parsers throw DataError on unknown names.
MetricKind parse_metric(std::string_view s);
Split parse_split(std::string_view s);
Origin parse_origin(std::string_view s);
TopCategory parse_top_category(std::string_view s);

class CategorySet {
 public:
  CategorySet() = default;
  CategorySet(std::initializer_list<TopCategory> cats) {
    for (auto c : cats) insert(c);
  }
  void insert(TopCategory c) { bits_.set(static_cast<std::size_t>(c)); }
  bool contains(TopCategory c) const { return bits_.test(static_cast<std::size_t>(c)); }
  std::size_t size() const { return bits_.count(); }
  bool empty() const { return bits_.none(); }
  std::vector<TopCategory> members() const;
  bool operator==(const CategorySet&) const = default;

 private:
  std::bitset<kNumTopCategories> bits_;
};

struct EvaluationRecord {
  std::string listener_id;
  std::string pair_id;
  MetricKind metric = MetricKind::kRel;
  int score = 0;
  Split split = Split::kTrain;
};

struct AudioTextPair {
  std::string pair_id;
  std::string text;
  std::string audio_ref;
  Origin origin = Origin::kOriginal;
  std::vector<std::string> event_labels;
  CategorySet top_categories;
  bool is_anchor = false;
  double duration_s = 0.0;

  bool is_synthetic() const { return origin != Origin::kOriginal; }
};

// Listener questionnaire. Answers are option codes; kUnanswered marks a
// skipped question.
inline constexpr std::size_t kNumQuestions = 12;
inline constexpr std::string_view kUnanswered = "unanswered";

// Option codes accepted for question `q` (0-based), not including kUnanswered.
const std::vector<std::string_view>& question_options(std::size_t q);
bool is_valid_answer(std::size_t q, std::string_view code);

struct ListenerProfile {
  std::string listener_id;
  std::array<std::string, kNumQuestions> answers;

  ListenerProfile() { answers.fill(std::string(kUnanswered)); }
  explicit ListenerProfile(std::string id) : ListenerProfile() { listener_id = std::move(id); }
};

struct Dataset {
  std::map<std::string, AudioTextPair> pairs;
  std::map<std::string, ListenerProfile> listeners;
  std::vector<EvaluationRecord> records;

  const AudioTextPair& pair(const std::string& id) const;
};

// Throws DataError on dangling references, duplicate (listener, pair, metric)
// keys, out-of-range scores or invalid pair fields.
void validate(const Dataset& d);

struct StatsSummary {
  std::size_t evaluations = 0;
  std::size_t pairs = 0;
  double duration_s = 0.0;
  std::size_t listeners = 0;
  bool operator==(const StatsSummary&) const = default;
};

// Counts over records of `metric`, restricted to `split` when given.
// Durations are summed over distinct pairs.
StatsSummary dataset_stats(const Dataset& d, MetricKind metric,
                           std::optional<Split> split = std::nullopt);

std::map<std::string, double> mean_score_per_pair(const Dataset& d, MetricKind metric);

// Keeps records satisfying `keep` and only the pairs/listeners they reference.
template <typename Pred>
Dataset filter_records(const Dataset& d, Pred keep);

Dataset restrict_to_split(const Dataset& d, Split split);
Dataset restrict_to_metric(const Dataset& d, MetricKind metric);

// Union of two datasets drawn from the same source. Records are concatenated;
// validation catches accidental key collisions.
Dataset merge(const Dataset& a, const Dataset& b);

// Partitions the records of `test_portion` into (validation, test) so that no
// audio_ref and no text string occurs on both sides. Pairs sharing an audio
// file or a caption form connected components that are never split; the
// components are distributed so the evaluation counts are as close as
// possible. The side with fewer evaluations is returned as validation.
// Throws DataError when everything forms a single component.
std::pair<Dataset, Dataset> split_validation_test(const Dataset& test_portion,
                                                  std::uint64_t seed);

// JSONL persistence (pairs.jsonl, listeners.jsonl, evaluations.jsonl).
Dataset load_dataset(const std::filesystem::path& root);
void save_dataset(const Dataset& d, const std::filesystem::path& root);

// --- template implementation ---

template <typename Pred>
Dataset filter_records(const Dataset& d, Pred keep) {
  Dataset out;
  for (const auto& r : d.records) {
    if (!keep(r)) continue;
    out.records.push_back(r);
    if (!out.pairs.contains(r.pair_id)) out.pairs.emplace(r.pair_id, d.pairs.at(r.pair_id));
    if (!out.listeners.contains(r.listener_id))
      out.listeners.emplace(r.listener_id, d.listeners.at(r.listener_id));
  }
  return out;
}

}  // namespace relkit
