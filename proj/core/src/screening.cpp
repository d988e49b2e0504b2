#include "relkit/screening.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>

#include "relkit/error.hpp"

namespace relkit {
namespace {

struct ListenerScores {
  std::vector<int> anchor;
  std::vector<int> original;
  std::vector<int> non_anchor;
};

std::map<std::string, ListenerScores> collect(const Dataset& d, MetricKind metric) {
  std::map<std::string, ListenerScores> out;
  for (const auto& r : d.records) {
    if (r.metric != metric) continue;
    const auto& p = d.pair(r.pair_id);
    auto& s = out[r.listener_id];
    if (p.is_anchor) {
      s.anchor.push_back(r.score);
    } else {
      s.non_anchor.push_back(r.score);
      if (p.origin == Origin::kOriginal) s.original.push_back(r.score);
    }
  }
  return out;
}

std::optional<double> mean_of(const std::vector<int>& v) {
  if (v.empty()) return std::nullopt;
  double sum = 0.0;
  for (int x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

}  // namespace

void ScreeningPolicy::validate() const {
  auto in_range = [](double x) { return x >= kMinScore && x <= kMaxScore; };
  if (!in_range(anchor_mean_exclude_at)) throw UsageError("anchor threshold outside [0, 10]");
  if (original_mean_exclude_at_or_below && !in_range(*original_mean_exclude_at_or_below))
    throw UsageError("original-mean threshold outside [0, 10]");
  if (entropy_drop_fraction && !(*entropy_drop_fraction >= 0.0 && *entropy_drop_fraction < 1.0))
    throw UsageError("entropy drop fraction outside [0, 1)");
}

ScreeningPolicy policy_by_name(std::string_view name) {
  if (name == "train") return ScreeningPolicy::train();
  if (name == "test") return ScreeningPolicy::test();
  if (name == "analysis") return ScreeningPolicy::analysis();
  throw UsageError("unknown screening policy '" + std::string(name) + "'");
}

std::optional<double> anchor_mean(const Dataset& d, MetricKind metric, const std::string& listener_id) {
  std::vector<int> scores;
  for (const auto& r : d.records) {
    if (r.metric == metric && r.listener_id == listener_id && d.pair(r.pair_id).is_anchor)
      scores.push_back(r.score);
  }
  return mean_of(scores);
}

std::optional<double> original_mean(const Dataset& d, MetricKind metric,
                                    const std::string& listener_id) {
  std::vector<int> scores;
  for (const auto& r : d.records) {
    if (r.metric != metric || r.listener_id != listener_id) continue;
    const auto& p = d.pair(r.pair_id);
    if (!p.is_anchor && p.origin == Origin::kOriginal) scores.push_back(r.score);
  }
  return mean_of(scores);
}

double score_entropy(const std::vector<int>& scores) {
  if (scores.empty()) throw DataError("entropy of an empty rating set");
  std::array<std::size_t, kMaxScore + 1> counts{};
  for (int s : scores) ++counts.at(static_cast<std::size_t>(s));
  const double n = static_cast<double>(scores.size());
  double h = 0.0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h == 0.0 ? 0.0 : h;  // normalise -0.0
}

double rating_entropy(const Dataset& d, MetricKind metric, const std::string& listener_id) {
  std::vector<int> scores;
  for (const auto& r : d.records) {
    if (r.metric == metric && r.listener_id == listener_id) scores.push_back(r.score);
  }
  if (scores.empty()) throw DataError("listener '" + listener_id + "' has no ratings");
  return score_entropy(scores);
}

std::string_view to_string(ExclusionReason r) {
  switch (r) {
    case ExclusionReason::kAnchorMean: return "anchor_mean";
    case ExclusionReason::kOriginalMean: return "original_mean";
    case ExclusionReason::kLowEntropy: return "low_entropy";
  }
  return "unknown";
}

ScreeningResult screen(const Dataset& d, MetricKind metric, const ScreeningPolicy& policy) {
  policy.validate();
  const auto scores = collect(d, metric);
  ScreeningResult result;
  std::set<std::string> excluded;

  for (const auto& [id, s] : scores) {
    if (auto m = mean_of(s.anchor); m && *m >= policy.anchor_mean_exclude_at) {
      result.excluded.push_back({id, ExclusionReason::kAnchorMean, *m});
      excluded.insert(id);
    }
  }

  if (policy.original_mean_exclude_at_or_below) {
    for (const auto& [id, s] : scores) {
      if (excluded.contains(id)) continue;
      if (auto m = mean_of(s.original); m && *m <= *policy.original_mean_exclude_at_or_below) {
        result.excluded.push_back({id, ExclusionReason::kOriginalMean, *m});
        excluded.insert(id);
      }
    }
  }

  if (policy.entropy_drop_fraction) {
    std::vector<std::pair<double, std::string>> ranked;
    for (const auto& [id, s] : scores) {
      if (excluded.contains(id) || s.non_anchor.empty()) continue;
      ranked.emplace_back(score_entropy(s.non_anchor), id);
    }
    std::sort(ranked.begin(), ranked.end());
    // The epsilon absorbs representation error, e.g. 0.29 * 100 = 28.999...
    const auto drop = static_cast<std::size_t>(
        std::floor(*policy.entropy_drop_fraction * static_cast<double>(ranked.size()) + 1e-9));
    for (std::size_t i = 0; i < drop; ++i) {
      result.excluded.push_back({ranked[i].second, ExclusionReason::kLowEntropy, ranked[i].first});
      excluded.insert(ranked[i].second);
    }
  }

  result.kept = filter_records(d, [&](const EvaluationRecord& r) {
    return !excluded.contains(r.listener_id) && !d.pair(r.pair_id).is_anchor;
  });
  return result;
}

}  // namespace relkit
