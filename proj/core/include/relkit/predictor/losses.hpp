#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace relkit::predictor {

// Zero inside the tolerance band, squared error outside it.
double clipped_mse(double y_hat, double y_norm, double tau);

// Mean over unordered pairs of max(0, |(yh_i - yh_j) - (y_i - y_j)| - alpha).
// Returns 0 for batches smaller than two.
double contrastive_loss(std::span<const double> y_hat, std::span<const double> y_norm, double alpha);

// (1 - beta) / (1 - beta^n). Throws DataError for n = 0.
double cbl_weight(std::size_t n_class, double beta_cbl);

// Score class in 1..10: max(1, ceil(y)). Throws DataError outside [0, 10].
int class_of(double raw_score);

class ClassCounts {
 public:
  void add(double raw_score) { ++counts_[static_cast<std::size_t>(class_of(raw_score))]; }
  std::size_t count(int cls) const { return counts_.at(static_cast<std::size_t>(cls)); }
  // CBL weight for the class of `raw_score`; unseen classes count as one.
  double weight(double raw_score, double beta_cbl) const;

 private:
  std::array<std::size_t, 11> counts_{};
};

struct LossWeights {
  double tau = 0.25;
  double alpha = 0.1;
  double beta = 1.0;
  double gamma = 0.5;
};

struct LossValue {
  double total = 0.0;
  double regression = 0.0;   // weighted mean clipped MSE
  double contrastive = 0.0;  // weighted mean pair hinge
  bool contrastive_skipped = false;
  std::vector<double> d_y_hat;  // d(total) / d(y_hat_i)
};

// beta * mean_i(E_i * clipped_mse_i) + gamma * mean_{i<j}((E_i + E_j) / 2 * hinge_ij).
// Subgradients at the clip and hinge boundaries are 0.
LossValue total_loss(std::span<const double> y_hat, std::span<const double> y_norm,
                     std::span<const double> cbl, const LossWeights& w);

}  // namespace relkit::predictor
