#include "relkit/factor_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "relkit/error.hpp"

namespace relkit {
namespace {

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

// Assigns each pair a level index and returns the level labels.
struct LevelAssignment {
  std::map<std::string, int> level_of;  // pair_id -> level
  std::vector<std::string> labels;
};

LevelAssignment discrete_levels(const std::map<std::string, std::size_t>& values, std::size_t cap) {
  std::set<std::size_t> present;
  for (const auto& [id, v] : values) present.insert(std::min(v, cap));
  std::map<std::size_t, int> index;
  LevelAssignment out;
  for (auto v : present) {
    index.emplace(v, static_cast<int>(out.labels.size()));
    out.labels.push_back(v == cap ? std::to_string(v) + "+" : std::to_string(v));
  }
  for (const auto& [id, v] : values) out.level_of.emplace(id, index.at(std::min(v, cap)));
  return out;
}

LevelAssignment quantile_levels(const std::map<std::string, double>& values, std::size_t bins) {
  if (bins < 2) throw UsageError("need at least two bins");
  std::vector<double> sorted;
  for (const auto& [id, v] : values) sorted.push_back(v);
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> cuts;
  for (std::size_t i = 1; i < bins; ++i) {
    const double c = quantile_inclusive(sorted, static_cast<double>(i) / static_cast<double>(bins));
    if (cuts.empty() || c > cuts.back()) cuts.push_back(c);
  }
  auto raw_level = [&](double v) {
    return static_cast<int>(std::count_if(cuts.begin(), cuts.end(), [v](double c) { return v > c; }));
  };
  // Drop empty bins and label the rest by their observed range.
  std::map<int, std::pair<double, double>> range;
  for (double v : sorted) {
    auto [it, fresh] = range.emplace(raw_level(v), std::make_pair(v, v));
    if (!fresh) it->second.second = std::max(it->second.second, v);
  }
  std::map<int, int> remap;
  LevelAssignment out;
  for (const auto& [raw, lohi] : range) {
    remap.emplace(raw, static_cast<int>(out.labels.size()));
    out.labels.push_back(lohi.first == lohi.second
                             ? format_number(lohi.first)
                             : format_number(lohi.first) + ".." + format_number(lohi.second));
  }
  for (const auto& [id, v] : values) out.level_of.emplace(id, remap.at(raw_level(v)));
  return out;
}

const TextFeatures& features_of(const TextFeatureMap& f, const std::string& pair_id) {
  auto it = f.find(pair_id);
  if (it == f.end()) throw DataError("no text features for pair '" + pair_id + "'");
  return it->second;
}

LevelAssignment assign_levels(const Dataset& d, const std::set<std::string>& pair_ids,
                              const TextFeatureMap& features, const FactorSpec& spec) {
  switch (spec.kind) {
    case FactorKind::kNumEventLabels:
    case FactorKind::kNumTopCategories: {
      std::map<std::string, std::size_t> counts;
      for (const auto& id : pair_ids) {
        const auto& p = d.pair(id);
        counts.emplace(id, spec.kind == FactorKind::kNumEventLabels ? p.event_labels.size()
                                                                     : p.top_categories.size());
      }
      return discrete_levels(counts, spec.kind == FactorKind::kNumEventLabels ? kEventLabelCap
                                                                              : kTopCategoryCap);
    }
    case FactorKind::kCategoryMembership: {
      if (!spec.category) throw UsageError("category factor without a category");
      LevelAssignment out;
      out.labels = {std::string(to_string(*spec.category)), "others"};
      for (const auto& id : pair_ids)
        out.level_of.emplace(id, d.pair(id).top_categories.contains(*spec.category) ? 0 : 1);
      return out;
    }
    case FactorKind::kTemporalPreposition: {
      LevelAssignment out;
      out.labels = {"with", "without"};
      for (const auto& id : pair_ids)
        out.level_of.emplace(id, features_of(features, id).has_temporal_preposition ? 0 : 1);
      return out;
    }
    case FactorKind::kWordCount:
    case FactorKind::kFleschReadingEase: {
      std::map<std::string, double> values;
      for (const auto& id : pair_ids) {
        const auto& f = features_of(features, id);
        values.emplace(id, spec.kind == FactorKind::kWordCount ? static_cast<double>(f.word_count)
                                                               : f.flesch_reading_ease);
      }
      return quantile_levels(values, spec.bins);
    }
  }
  throw UsageError("unknown factor");
}

}  // namespace

std::string FactorSpec::name() const {
  switch (kind) {
    case FactorKind::kNumEventLabels: return "num_event_labels";
    case FactorKind::kNumTopCategories: return "num_top_categories";
    case FactorKind::kCategoryMembership:
      return "category:" + std::string(to_string(category.value_or(TopCategory::kHumanSounds)));
    case FactorKind::kWordCount: return "word_count";
    case FactorKind::kTemporalPreposition: return "temporal_preposition";
    case FactorKind::kFleschReadingEase: return "flesch_reading_ease";
  }
  return "unknown";
}

std::string FactorSpec::group() const {
  switch (kind) {
    case FactorKind::kNumEventLabels:
    case FactorKind::kNumTopCategories: return "sound_event_labels";
    case FactorKind::kCategoryMembership: return "category_vs_others";
    default: return "text_complexity";
  }
}

std::vector<FactorSpec> all_factor_specs(std::size_t bins) {
  std::vector<FactorSpec> out;
  out.push_back({FactorKind::kNumEventLabels, std::nullopt, bins});
  out.push_back({FactorKind::kNumTopCategories, std::nullopt, bins});
  for (auto c : kAllTopCategories) out.push_back({FactorKind::kCategoryMembership, c, bins});
  out.push_back({FactorKind::kWordCount, std::nullopt, bins});
  out.push_back({FactorKind::kTemporalPreposition, std::nullopt, bins});
  out.push_back({FactorKind::kFleschReadingEase, std::nullopt, bins});
  return out;
}

FactorSpec parse_factor(std::string_view name, std::size_t bins) {
  for (const auto& spec : all_factor_specs(bins)) {
    if (spec.name() == name) return spec;
  }
  throw UsageError("unknown factor '" + std::string(name) + "'");
}

TextFeatureMap compute_text_feature_map(const Dataset& d) {
  TextFeatureMap out;
  for (const auto& [id, p] : d.pairs) out.emplace(id, compute_text_features(p.text));
  return out;
}

FactorReport factor_analysis(const Dataset& d, const TextFeatureMap& features,
                             const FactorSpec& spec, double alpha) {
  std::set<std::string> pair_ids;
  for (const auto& r : d.records) {
    if (r.metric == MetricKind::kRel && !d.pair(r.pair_id).is_anchor) pair_ids.insert(r.pair_id);
  }
  if (pair_ids.empty()) throw DataError(spec.name() + ": no REL evaluations");
  const auto levels = assign_levels(d, pair_ids, features, spec);

  FactorReport report;
  report.factor = spec.name();
  report.group = spec.group();
  report.alpha = alpha;
  report.levels = levels.labels;

  const std::size_t n_levels = levels.labels.size();
  std::vector<Sample> by_level(n_levels);
  std::vector<Sample> by_level_original(n_levels), by_level_synthetic(n_levels);
  std::vector<double> y;
  TwoWayDesign design;
  design.levels_a = static_cast<int>(n_levels);
  design.levels_b = 2;
  for (const auto& r : d.records) {
    if (r.metric != MetricKind::kRel) continue;
    const auto& p = d.pair(r.pair_id);
    if (p.is_anchor) continue;
    const int level = levels.level_of.at(r.pair_id);
    const auto score = static_cast<double>(r.score);
    by_level[static_cast<std::size_t>(level)].push_back(score);
    (p.is_synthetic() ? by_level_synthetic : by_level_original)[static_cast<std::size_t>(level)].push_back(score);
    y.push_back(score);
    design.a.push_back(level);
    design.b.push_back(p.is_synthetic() ? 1 : 0);
  }
  if (n_levels < 2) throw DataError(spec.name() + ": fewer than two levels with data");
  for (std::size_t l = 0; l < n_levels; ++l) {
    if (by_level_original[l].empty() || by_level_synthetic[l].empty()) {
      throw DataError(spec.name() + ": level '" + levels.labels[l] +
                      "' has no data for original or synthetic audio");
    }
  }

  if (n_levels == 2) {
    report.among_items = mann_whitney_u(by_level[0], by_level[1]);
  } else {
    report.among_items = kruskal_wallis(by_level);
    report.steel_dwass = steel_dwass(by_level);
    for (auto& sd : report.steel_dwass) {
      sd.group_labels = {levels.labels[std::stoul(sd.group_labels[0])],
                         levels.labels[std::stoul(sd.group_labels[1])]};
    }
  }
  report.among_items.group_labels = levels.labels;
  report.among_items_significant = report.among_items.p_value < alpha;

  report.art = art_anova_2x(y, design);
  report.interaction_significant = report.art.interaction.p_value < alpha;

  for (std::size_t l = 0; l < n_levels; ++l) {
    LevelBoxplots b;
    b.level = levels.labels[l];
    b.all = boxplot_summary(by_level[l]);
    b.original = boxplot_summary(by_level_original[l]);
    b.synthetic = boxplot_summary(by_level_synthetic[l]);
    report.boxplots.push_back(std::move(b));
  }
  return report;
}

}  // namespace relkit
