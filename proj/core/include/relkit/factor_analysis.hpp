#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "relkit/art_anova.hpp"
#include "relkit/data_model.hpp"
#include "relkit/stats.hpp"
#include "relkit/text_metrics.hpp"

namespace relkit {

enum class FactorKind {
  kNumEventLabels,
  kNumTopCategories,
  kCategoryMembership,
  kWordCount,
  kTemporalPreposition,
  kFleschReadingEase,
};

struct FactorSpec {
  FactorKind kind = FactorKind::kNumEventLabels;
  std::optional<TopCategory> category;  // kCategoryMembership only
  std::size_t bins = 3;                 // quantile bins for word count / Flesch

  std::string name() const;
  std::string group() const;
};

// Label counts above these caps share the top level.
inline constexpr std::size_t kEventLabelCap = 4;
inline constexpr std::size_t kTopCategoryCap = 3;

// The 13 factors in their customary report order.
std::vector<FactorSpec> all_factor_specs(std::size_t bins = 3);
// Accepts the names produced by FactorSpec::name(); throws UsageError otherwise.
FactorSpec parse_factor(std::string_view name, std::size_t bins = 3);

struct LevelBoxplots {
  std::string level;
  BoxplotSummary all;
  std::optional<BoxplotSummary> original;
  std::optional<BoxplotSummary> synthetic;
};

struct FactorReport {
  std::string factor;
  std::string group;
  double alpha = 0.05;
  std::vector<std::string> levels;
  TestResult among_items;  // Mann-Whitney for two levels, Kruskal-Wallis otherwise
  bool among_items_significant = false;
  TwoWayAnova art;  // A = factor level, B = original vs synthetic
  bool interaction_significant = false;
  std::vector<TestResult> steel_dwass;  // three or more levels
  std::vector<LevelBoxplots> boxplots;
};

using TextFeatureMap = std::map<std::string, TextFeatures>;

TextFeatureMap compute_text_feature_map(const Dataset& d);

// Per-evaluation REL scores of non-anchor pairs grouped by the factor's
// levels. Throws DataError when fewer than two levels carry data or a
// (level, origin) cell is empty.
FactorReport factor_analysis(const Dataset& d, const TextFeatureMap& features,
                             const FactorSpec& spec, double alpha = 0.05);

}  // namespace relkit
