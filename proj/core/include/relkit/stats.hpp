#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace relkit {

enum class TestMethod { kMannWhitneyU, kKruskalWallis, kSteelDwassPair, kArtAnovaEffect };
std::string_view to_string(TestMethod m);

struct TestResult {
  TestMethod method = TestMethod::kMannWhitneyU;
  double statistic = 0.0;  // U, H, pairwise t, or F
  double p_value = 1.0;    // two-sided where applicable
  // Standardized statistic without continuity correction (Mann-Whitney and
  // Steel-Dwass only).
  std::optional<double> z;
  std::vector<std::string> group_labels;
  std::vector<std::size_t> n_per_group;
  double df1 = 0.0;
  double df2 = 0.0;
  std::string note;
};

using Sample = std::vector<double>;

// Two-sided Mann-Whitney U test. U counts pairs with a > b plus half the ties;
// p uses the tie-corrected normal approximation with a 0.5 continuity
// correction. Throws NumericError when every value is identical.
TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b);

// Kruskal-Wallis H with tie correction; p from chi-square with k-1 df.
// Two groups are accepted and flagged in `note`.
TestResult kruskal_wallis(const std::vector<Sample>& groups);

// Steel-Dwass all-pairs comparison. Each pair is ranked on its own pooled
// data; p = P(Q >= |t| sqrt(2)) for the range of k standard normals.
std::vector<TestResult> steel_dwass(const std::vector<Sample>& groups);

struct BoxplotSummary {
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double whisker_low = 0.0;
  double whisker_high = 0.0;
  std::vector<double> outliers;
  std::size_t n = 0;
};

// Linearly interpolated quantile at position (n-1)p of the sorted data.
double quantile_inclusive(std::span<const double> sorted, double p);

// Quartiles by quantile_inclusive; whiskers reach the most extreme points
// within 1.5 IQR of the quartiles. Throws DataError on an empty sample.
BoxplotSummary boxplot_summary(std::span<const double> sample);

}  // namespace relkit
