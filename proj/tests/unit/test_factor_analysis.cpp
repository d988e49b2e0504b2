#include <gtest/gtest.h>

#include <map>

#include "relkit/error.hpp"
#include "relkit/factor_analysis.hpp"
#include "relkit/fixture.hpp"
#include "relkit/pipeline.hpp"
#include "relkit/rng.hpp"
#include "relkit/screening.hpp"
#include "test_util.hpp"

namespace relkit {
namespace {

using test_support::add_pair;
using test_support::pair_of;
using test_support::rate;

const FactorReport& find(const std::vector<FactorOutcome>& all, const std::string& name) {
  for (const auto& o : all) {
    if (o.factor == name) {
      EXPECT_TRUE(o.report) << o.skipped_reason;
      return *o.report;
    }
  }
  throw std::runtime_error("factor not found: " + name);
}

TEST(FactorSpecs, NamesRoundTrip) {
  const auto specs = all_factor_specs();
  ASSERT_EQ(specs.size(), 13u);
  for (const auto& s : specs) EXPECT_EQ(parse_factor(s.name()).name(), s.name());
  EXPECT_THROW(parse_factor("shoe_size"), UsageError);
}

TEST(FactorAnalysis, FlagsPlantedAnimalInteraction) {
  FixtureSpec spec;
  spec.temporal_synthetic_shift = 0.0;
  const auto fx = generate_fixture(spec);
  const auto screened = screen(restrict_to_metric(fx.dataset, MetricKind::kRel), MetricKind::kRel,
                               ScreeningPolicy::analysis());
  const auto text = compute_text_feature_map(screened.kept);
  const auto out = run_factor_analyses(screened.kept, text, all_factor_specs(), 0.05, 2);
  const auto& animal = find(out, "category:Animal");
  EXPECT_TRUE(animal.interaction_significant);
  EXPECT_LT(animal.art.interaction.p_value, 1e-6);
  EXPECT_EQ(animal.among_items.method, TestMethod::kMannWhitneyU);
  EXPECT_EQ(animal.levels.size(), 2u);
  EXPECT_EQ(animal.boxplots.size(), 2u);

  const auto& labels = find(out, "num_event_labels");
  EXPECT_EQ(labels.among_items.method, TestMethod::kKruskalWallis);
  EXPECT_EQ(labels.steel_dwass.size(), labels.levels.size() * (labels.levels.size() - 1) / 2);
}

// Ratings are redrawn iid (original pairs from 5..10, synthetic from 0..10),
// so origin has a main effect and nothing else does.
TEST(FactorAnalysis, NullFixtureFalsePositiveRate) {
  std::map<std::string, int> interaction, among;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    FixtureSpec spec = FixtureSpec::small();
    spec.seed = seed;
    auto fx = generate_fixture(spec);
    rng::Engine e(seed * 7919);
    for (auto& r : fx.dataset.records) {
      if (r.metric != MetricKind::kRel) continue;
      const bool original = fx.dataset.pair(r.pair_id).origin == Origin::kOriginal;
      r.score = original ? 5 + static_cast<int>(rng::below(e, 6)) : static_cast<int>(rng::below(e, 11));
    }
    const auto text = compute_text_feature_map(fx.dataset);
    for (const auto& s : all_factor_specs()) {
      const auto r = factor_analysis(fx.dataset, text, s);
      interaction[r.factor] += r.interaction_significant;
      among[r.factor] += r.among_items_significant;
    }
  }
  for (const auto& [factor, count] : interaction) {
    EXPECT_LE(count, 10) << factor;
    EXPECT_LE(among[factor], 10) << factor;
  }
}

TEST(FactorAnalysis, MissingLevelIsAnError) {
  Dataset d;
  // Every pair is Animal-only, so the "rest" level is empty.
  for (int i = 0; i < 6; ++i) {
    const auto id = "p" + std::to_string(i);
    add_pair(d, pair_of(id, "a dog barks", i % 2 ? Origin::kTango : Origin::kOriginal));
    rate(d, "L1", id, 3 + i);
    rate(d, "L2", id, 4 + i);
  }
  const auto text = compute_text_feature_map(d);
  FactorSpec s;
  s.kind = FactorKind::kCategoryMembership;
  s.category = TopCategory::kAnimal;
  EXPECT_THROW(factor_analysis(d, text, s), DataError);

  const auto out = run_factor_analyses(d, text, {s}, 0.05, 1);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_FALSE(out[0].report);
  EXPECT_FALSE(out[0].skipped_reason.empty());
}

TEST(FactorAnalysis, ParallelRunMatchesSerial) {
  FixtureSpec spec = FixtureSpec::small();
  const auto fx = generate_fixture(spec);
  const auto text = compute_text_feature_map(fx.dataset);
  const auto serial = run_factor_analyses(fx.dataset, text, all_factor_specs(), 0.05, 1);
  const auto parallel = run_factor_analyses(fx.dataset, text, all_factor_specs(), 0.05, 4);
  ASSERT_EQ(serial.size(), parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    EXPECT_EQ(serial[i].factor, parallel[i].factor);
    ASSERT_EQ(serial[i].report.has_value(), parallel[i].report.has_value());
    if (!serial[i].report) continue;
    EXPECT_EQ(serial[i].report->art.interaction.p_value, parallel[i].report->art.interaction.p_value);
    EXPECT_EQ(serial[i].report->among_items.statistic, parallel[i].report->among_items.statistic);
  }
}

}  // namespace
}  // namespace relkit
