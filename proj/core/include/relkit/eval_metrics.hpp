#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "relkit/data_model.hpp"

namespace relkit {

// Correlations are nullopt when undefined (a constant argument).
struct MetricReport {
  double mse = 0.0;
  std::optional<double> lcc;
  std::optional<double> srcc;
  std::optional<double> ktau;
  std::size_t n = 0;
};

std::optional<double> pearson(std::span<const double> x, std::span<const double> y);
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);
// Kendall tau-b, O(n log n) (Knight's merge-sort method).
std::optional<double> kendall_tau_b(std::span<const double> x, std::span<const double> y);

// Throws DataError unless both have the same length >= 2.
MetricReport evaluate(std::span<const double> pred, std::span<const double> truth);

// SRCC over the items belonging to each category; nullopt below two items.
std::map<TopCategory, std::optional<double>> per_category_srcc(
    std::span<const double> pred, std::span<const double> truth,
    std::span<const CategorySet> categories);

// Scores live on [-1, 1] for training and reporting: y / 5 - 1.
inline double normalize_score(double raw) { return raw / 5.0 - 1.0; }
inline double denormalize_score(double norm) { return 5.0 * (norm + 1.0); }

}  // namespace relkit
