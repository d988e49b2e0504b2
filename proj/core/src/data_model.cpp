#include "relkit/data_model.hpp"

#include <set>
#include <tuple>

#include "relkit/error.hpp"

namespace relkit {
namespace {

constexpr std::array<std::string_view, 3> kMetricNames = {"REL", "IS", "OS"};
constexpr std::array<std::string_view, 2> kSplitNames = {"train", "test"};
constexpr std::array<std::string_view, 5> kOriginNames = {"original", "audioldm", "audioldm2",
                                                          "tango", "tango2"};
constexpr std::array<std::string_view, kNumTopCategories> kCategoryNames = {
    "HumanSounds",    "Animal",
    "NaturalSounds",  "Music",
    "SoundsOfThings", "SourceAmbiguousSounds",
    "ChannelEnvironmentBackground", "Speech",
};

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view s, const std::array<std::string_view, N>& names,
                std::string_view what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<Enum>(i);
  }
  throw DataError("unknown " + std::string(what) + " '" + std::string(s) + "'");
}

const std::array<std::vector<std::string_view>, kNumQuestions>& option_table() {
  static const std::array<std::vector<std::string_view>, kNumQuestions> table = {{
      {"le20", "21-30", "31-40", "41-50", "51-60", "ge61"},                    // Q01 age
      {"M", "F", "NBi"},                                                       // Q02 gender
      {"0", "1", "2", "3", "4", "ge5"},                                        // Q03 participations
      {"never", "le1month", "le6months", "le1year", "gt1year"},                // Q04 recency
      {"1", "2", "3", "4", "ge5"},                                             // Q05 repeats
      {"headphone", "earphone", "others"},                                     // Q06 device
      {"quiet", "somewhat_quiet", "neutral", "somewhat_noisy", "noisy"},       // Q07 environment
      {"easy", "somewhat_easy", "neutral", "somewhat_difficult", "difficult"}, // Q08 difficulty
      {"yes", "no"},                                                           // Q09 audio field
      {"EU", "NA", "SA", "AS", "AF", "OC"},                                    // Q10 nationality
      {"EU", "NA", "SA", "AS", "AF", "OC"},                                    // Q11 mother country
      {"EU", "NA", "SA", "AS", "AF", "OC"},                                    // Q12 residence
  }};
  return table;
}

}  // namespace

std::string_view to_string(MetricKind m) { return kMetricNames[static_cast<std::size_t>(m)]; }
std::string_view to_string(Split s) { return kSplitNames[static_cast<std::size_t>(s)]; }
std::string_view to_string(Origin o) { return kOriginNames[static_cast<std::size_t>(o)]; }
std::string_view to_string(TopCategory c) { return kCategoryNames[static_cast<std::size_t>(c)]; }

MetricKind parse_metric(std::string_view s) {
  return parse_enum<MetricKind>(s, kMetricNames, "metric");
}
Split parse_split(std::string_view s) { return parse_enum<Split>(s, kSplitNames, "split"); }
Origin parse_origin(std::string_view s) { return parse_enum<Origin>(s, kOriginNames, "origin"); }
TopCategory parse_top_category(std::string_view s) {
  return parse_enum<TopCategory>(s, kCategoryNames, "top category");
}

std::vector<TopCategory> CategorySet::members() const {
  std::vector<TopCategory> out;
  for (auto c : kAllTopCategories) {
    if (contains(c)) out.push_back(c);
  }
  return out;
}

const std::vector<std::string_view>& question_options(std::size_t q) {
  return option_table().at(q);
}

bool is_valid_answer(std::size_t q, std::string_view code) {
  if (code == kUnanswered) return true;
  for (auto opt : question_options(q)) {
    if (opt == code) return true;
  }
  return false;
}

const AudioTextPair& Dataset::pair(const std::string& id) const {
  auto it = pairs.find(id);
  if (it == pairs.end()) throw DataError("unknown pair_id '" + id + "'");
  return it->second;
}

void validate(const Dataset& d) {
  for (const auto& [id, p] : d.pairs) {
    if (id != p.pair_id) throw DataError("pair key mismatch for '" + id + "'");
    if (p.text.empty()) throw DataError("pair '" + id + "' has empty text");
    if (!(p.duration_s >= 0.0)) throw DataError("pair '" + id + "' has negative duration");
  }
  for (const auto& [id, l] : d.listeners) {
    if (id != l.listener_id) throw DataError("listener key mismatch for '" + id + "'");
    for (std::size_t q = 0; q < kNumQuestions; ++q) {
      if (!is_valid_answer(q, l.answers[q])) {
        throw DataError("listener '" + id + "' has invalid answer '" + l.answers[q] + "' for q" +
                        (q < 9 ? "0" : "") + std::to_string(q + 1));
      }
    }
  }
  std::set<std::tuple<std::string_view, std::string_view, MetricKind>> seen;
  for (const auto& r : d.records) {
    if (!d.pairs.contains(r.pair_id))
      throw DataError("dangling pair reference '" + r.pair_id + "'");
    if (!d.listeners.contains(r.listener_id))
      throw DataError("dangling listener reference '" + r.listener_id + "'");
    if (r.score < kMinScore || r.score > kMaxScore)
      throw DataError("score out of range: " + std::to_string(r.score));
    if (!seen.emplace(r.listener_id, r.pair_id, r.metric).second) {
      throw DataError("duplicate evaluation (" + r.listener_id + ", " + r.pair_id + ", " +
                      std::string(to_string(r.metric)) + ")");
    }
  }
}

StatsSummary dataset_stats(const Dataset& d, MetricKind metric, std::optional<Split> split) {
  StatsSummary s;
  std::set<std::string_view> pairs;
  std::set<std::string_view> listeners;
  for (const auto& r : d.records) {
    if (r.metric != metric || (split && r.split != *split)) continue;
    ++s.evaluations;
    pairs.insert(r.pair_id);
    listeners.insert(r.listener_id);
  }
  s.pairs = pairs.size();
  s.listeners = listeners.size();
  for (auto id : pairs) s.duration_s += d.pair(std::string(id)).duration_s;
  return s;
}

std::map<std::string, double> mean_score_per_pair(const Dataset& d, MetricKind metric) {
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& r : d.records) {
    if (r.metric != metric) continue;
    auto& [sum, n] = acc[r.pair_id];
    sum += r.score;
    ++n;
  }
  std::map<std::string, double> out;
  for (const auto& [id, sn] : acc) out.emplace(id, sn.first / static_cast<double>(sn.second));
  return out;
}

Dataset restrict_to_split(const Dataset& d, Split split) {
  return filter_records(d, [split](const EvaluationRecord& r) { return r.split == split; });
}

Dataset restrict_to_metric(const Dataset& d, MetricKind metric) {
  return filter_records(d, [metric](const EvaluationRecord& r) { return r.metric == metric; });
}

Dataset merge(const Dataset& a, const Dataset& b) {
  Dataset out = a;
  for (const auto& [id, p] : b.pairs) out.pairs.emplace(id, p);
  for (const auto& [id, l] : b.listeners) out.listeners.emplace(id, l);
  out.records.insert(out.records.end(), b.records.begin(), b.records.end());
  validate(out);
  return out;
}

}  // namespace relkit
