#pragma once

#include <span>
#include <vector>

#include "relkit/stats.hpp"

namespace relkit {

// Two crossed factors; a[i] in [0, levels_a), b[i] in [0, levels_b).
struct TwoWayDesign {
  std::vector<int> a;
  std::vector<int> b;
  int levels_a = 0;
  int levels_b = 0;

  std::size_t size() const { return a.size(); }
  // Throws DataError on out-of-range levels, an empty cell, or no residual df.
  void validate() const;
};

enum class ArtEffect { kA, kB, kInteraction };

struct TwoWayAnova {
  TestResult effect_a;
  TestResult effect_b;
  TestResult interaction;
  const TestResult& get(ArtEffect e) const;
};

// Least-squares fit of the full model with interaction on an effect-coded
// design; each effect is tested by the extra sum of squares of dropping its
// columns (type III), so unbalanced cells are handled.
TwoWayAnova factorial_anova(std::span<const double> y, const TwoWayDesign& design);

// Cell residual plus the estimated effect of `effect` from cell and marginal
// means.
std::vector<double> align_responses(std::span<const double> y, const TwoWayDesign& design,
                                    ArtEffect effect);

// Aligned rank transform ANOVA: align for each effect, rank with average
// ties, refit the full model on the ranks and keep that effect's F test.
TwoWayAnova art_anova_2x(std::span<const double> y, const TwoWayDesign& design);

}  // namespace relkit
