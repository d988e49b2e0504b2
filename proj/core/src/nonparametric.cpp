#include <algorithm>
#include <cmath>

#include "relkit/error.hpp"
#include "relkit/ranking.hpp"
#include "relkit/special_functions.hpp"
#include "relkit/stats.hpp"

namespace relkit {
namespace {

struct RankSum {
  double rank_sum_first = 0.0;  // sum of ranks of the first sample in the pooled ranking
  double tie_term = 0.0;
};

RankSum pooled_rank_sum(std::span<const double> a, std::span<const double> b) {
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto r = average_ranks(pooled);
  RankSum out;
  out.tie_term = r.tie_term;
  for (std::size_t i = 0; i < a.size(); ++i) out.rank_sum_first += r.ranks[i];
  return out;
}

// Tie-corrected variance of U (equivalently of a rank sum) for sizes na, nb.
double rank_sum_variance(double na, double nb, double tie_term) {
  const double n = na + nb;
  return na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
}

}  // namespace

std::string_view to_string(TestMethod m) {
  switch (m) {
    case TestMethod::kMannWhitneyU: return "MannWhitneyU";
    case TestMethod::kKruskalWallis: return "KruskalWallis";
    case TestMethod::kSteelDwassPair: return "SteelDwassPair";
    case TestMethod::kArtAnovaEffect: return "ArtAnovaEffect";
  }
  return "unknown";
}

TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw DataError("Mann-Whitney needs two nonempty samples");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const auto rs = pooled_rank_sum(a, b);
  const double u = rs.rank_sum_first - na * (na + 1.0) / 2.0;
  const double var = rank_sum_variance(na, nb, rs.tie_term);
  if (!(var > 0.0)) throw NumericError("Mann-Whitney: degenerate variance (all values identical)");
  const double sd = std::sqrt(var);
  const double diff = u - na * nb / 2.0;
  TestResult r;
  r.method = TestMethod::kMannWhitneyU;
  r.statistic = u;
  r.z = diff / sd;
  r.p_value = std::min(1.0, 2.0 * special::normal_sf(std::max(std::fabs(diff) - 0.5, 0.0) / sd));
  r.n_per_group = {a.size(), b.size()};
  return r;
}

TestResult kruskal_wallis(const std::vector<Sample>& groups) {
  if (groups.size() < 2) throw DataError("Kruskal-Wallis needs at least two groups");
  std::vector<double> pooled;
  for (const auto& g : groups) {
    if (g.empty()) throw DataError("Kruskal-Wallis: empty group");
    pooled.insert(pooled.end(), g.begin(), g.end());
  }
  const auto r = average_ranks(pooled);
  const double n = static_cast<double>(pooled.size());
  const double correction = 1.0 - r.tie_term / (n * n * n - n);
  if (!(correction > 0.0)) throw NumericError("Kruskal-Wallis: degenerate (all values identical)");

  double sum_sq = 0.0;
  std::size_t offset = 0;
  TestResult out;
  for (const auto& g : groups) {
    double rsum = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) rsum += r.ranks[offset + i];
    offset += g.size();
    sum_sq += rsum * rsum / static_cast<double>(g.size());
    out.n_per_group.push_back(g.size());
  }
  const double h = std::max(0.0, (12.0 / (n * (n + 1.0)) * sum_sq - 3.0 * (n + 1.0)) / correction);
  out.method = TestMethod::kKruskalWallis;
  out.statistic = h;
  out.df1 = static_cast<double>(groups.size() - 1);
  out.p_value = special::chi_square_sf(h, out.df1);
  if (groups.size() == 2) out.note = "two groups: Mann-Whitney is the usual choice";
  return out;
}

std::vector<TestResult> steel_dwass(const std::vector<Sample>& groups) {
  if (groups.size() < 2) throw DataError("Steel-Dwass needs at least two groups");
  const int k = static_cast<int>(groups.size());
  std::vector<TestResult> out;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    for (std::size_t j = i + 1; j < groups.size(); ++j) {
      const auto& a = groups[i];
      const auto& b = groups[j];
      if (a.empty() || b.empty()) throw DataError("Steel-Dwass: empty group");
      const double na = static_cast<double>(a.size());
      const double nb = static_cast<double>(b.size());
      const auto rs = pooled_rank_sum(a, b);
      const double var = rank_sum_variance(na, nb, rs.tie_term);
      if (!(var > 0.0)) throw NumericError("Steel-Dwass: degenerate pair");
      const double t = (rs.rank_sum_first - na * (na + nb + 1.0) / 2.0) / std::sqrt(var);
      TestResult r;
      r.method = TestMethod::kSteelDwassPair;
      r.statistic = t;
      r.z = t;
      r.p_value = special::studentized_range_sf(std::fabs(t) * std::sqrt(2.0), k);
      r.n_per_group = {a.size(), b.size()};
      r.group_labels = {std::to_string(i), std::to_string(j)};
      out.push_back(std::move(r));
    }
  }
  return out;
}

double quantile_inclusive(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw DataError("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

BoxplotSummary boxplot_summary(std::span<const double> sample) {
  if (sample.empty()) throw DataError("boxplot of an empty sample");
  std::vector<double> s(sample.begin(), sample.end());
  std::sort(s.begin(), s.end());
  BoxplotSummary b;
  b.n = s.size();
  b.q1 = quantile_inclusive(s, 0.25);
  b.median = quantile_inclusive(s, 0.5);
  b.q3 = quantile_inclusive(s, 0.75);
  const double iqr = b.q3 - b.q1;
  const double lo_fence = b.q1 - 1.5 * iqr;
  const double hi_fence = b.q3 + 1.5 * iqr;
  b.whisker_low = b.q1;
  b.whisker_high = b.q3;
  for (double x : s) {
    if (x < lo_fence || x > hi_fence) {
      b.outliers.push_back(x);
    } else {
      b.whisker_low = std::min(b.whisker_low, x);
      b.whisker_high = std::max(b.whisker_high, x);
    }
  }
  return b;
}

}  // namespace relkit
