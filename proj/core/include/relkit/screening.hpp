#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "relkit/data_model.hpp"

namespace relkit {

// Thresholds of the listener screen. Stages run in order: anchor mean,
// mean over original-audio pairs, lowest-entropy cut.
struct ScreeningPolicy {
  // Exclude when the listener's mean anchor score is >= this.
  double anchor_mean_exclude_at = 2.0;
  // Exclude when the mean over original (non-anchor) pairs is <= this.
  std::optional<double> original_mean_exclude_at_or_below;
  // Drop floor(fraction * L) lowest-entropy listeners among survivors.
  std::optional<double> entropy_drop_fraction;

  static ScreeningPolicy train() { return {2.0, std::nullopt, std::nullopt}; }
  static ScreeningPolicy test() { return {1.0, std::nullopt, std::nullopt}; }
  static ScreeningPolicy analysis() { return {2.0, 6.0, 0.05}; }

  // Throws UsageError when a threshold is outside [0, 10] or the fraction
  // is outside [0, 1).
  void validate() const;
};

// "train" | "test" | "analysis"; throws UsageError otherwise.
ScreeningPolicy policy_by_name(std::string_view name);

// Mean score over anchor pairs, or nullopt when the listener rated no anchor.
std::optional<double> anchor_mean(const Dataset& d, MetricKind metric, const std::string& listener_id);

// Mean over non-anchor pairs of Original origin; nullopt when there are none.
std::optional<double> original_mean(const Dataset& d, MetricKind metric,
                                    const std::string& listener_id);

// Shannon entropy (nats) of the listener's empirical score distribution over
// 0..10. Throws DataError when the listener has no rating for `metric`.
double rating_entropy(const Dataset& d, MetricKind metric, const std::string& listener_id);
double score_entropy(const std::vector<int>& scores);

enum class ExclusionReason { kAnchorMean, kOriginalMean, kLowEntropy };
std::string_view to_string(ExclusionReason r);

struct Exclusion {
  std::string listener_id;
  ExclusionReason reason;
  double value;  // the statistic that triggered the exclusion
};

struct ScreeningResult {
  Dataset kept;  // all records of excluded listeners and all anchor records removed
  std::vector<Exclusion> excluded;
};

ScreeningResult screen(const Dataset& d, MetricKind metric, const ScreeningPolicy& policy);

}  // namespace relkit
