#include "relkit/eval_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "relkit/error.hpp"
#include "relkit/ranking.hpp"

namespace relkit {
namespace {

std::int64_t tie_pairs(std::int64_t t) { return t * (t - 1) / 2; }

// Sorts v[lo, hi) and returns the number of strict inversions.
std::int64_t merge_count(std::vector<double>& v, std::vector<double>& buf, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t swaps = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<std::int64_t>(mid - i);
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

void require_same_length(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("metric inputs differ in length");
}

}  // namespace

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  require_same_length(x, y);
  const std::size_t n = x.size();
  if (n < 2) return std::nullopt;
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
  require_same_length(x, y);
  const auto rx = average_ranks(x).ranks;
  const auto ry = average_ranks(y).ranks;
  return pearson(rx, ry);
}

std::optional<double> kendall_tau_b(std::span<const double> x, std::span<const double> y) {
  require_same_length(x, y);
  const std::size_t n = x.size();
  if (n < 2) return std::nullopt;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });

  const auto total = tie_pairs(static_cast<std::int64_t>(n));
  std::int64_t x_ties = 0, joint_ties = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && x[order[j]] == x[order[i]]) ++j;
    x_ties += tie_pairs(static_cast<std::int64_t>(j - i));
    for (std::size_t a = i; a < j;) {
      std::size_t b = a + 1;
      while (b < j && y[order[b]] == y[order[a]]) ++b;
      joint_ties += tie_pairs(static_cast<std::int64_t>(b - a));
      a = b;
    }
    i = j;
  }

  std::vector<double> ys(n), buf(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[order[i]];
  const auto swaps = merge_count(ys, buf, 0, n);
  std::int64_t y_ties = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && ys[j] == ys[i]) ++j;
    y_ties += tie_pairs(static_cast<std::int64_t>(j - i));
    i = j;
  }

  const auto denom_x = total - x_ties;
  const auto denom_y = total - y_ties;
  if (denom_x == 0 || denom_y == 0) return std::nullopt;
  const double numerator = static_cast<double>(total - x_ties - y_ties + joint_ties - 2 * swaps);
  const double tau = numerator / std::sqrt(static_cast<double>(denom_x) * static_cast<double>(denom_y));
  return std::clamp(tau, -1.0, 1.0);
}

MetricReport evaluate(std::span<const double> pred, std::span<const double> truth) {
  require_same_length(pred, truth);
  if (pred.size() < 2) throw DataError("evaluation needs at least two items");
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!std::isfinite(pred[i]) || !std::isfinite(truth[i]))
      throw NumericError("non-finite prediction or target");
  }
  MetricReport r;
  r.n = pred.size();
  double se = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) se += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  r.mse = se / static_cast<double>(r.n);
  r.lcc = pearson(pred, truth);
  r.srcc = spearman(pred, truth);
  r.ktau = kendall_tau_b(pred, truth);
  return r;
}

std::map<TopCategory, std::optional<double>> per_category_srcc(
    std::span<const double> pred, std::span<const double> truth,
    std::span<const CategorySet> categories) {
  require_same_length(pred, truth);
  if (categories.size() != pred.size()) throw DataError("category list length mismatch");
  std::map<TopCategory, std::optional<double>> out;
  for (auto c : kAllTopCategories) {
    std::vector<double> p, t;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (!categories[i].contains(c)) continue;
      p.push_back(pred[i]);
      t.push_back(truth[i]);
    }
    out[c] = p.size() < 2 ? std::nullopt : spearman(p, t);
  }
  return out;
}

}  // namespace relkit
