#include "relkit/predictor/losses.hpp"

#include <cmath>

#include "relkit/error.hpp"

namespace relkit::predictor {

double clipped_mse(double y_hat, double y_norm, double tau) {
  const double e = y_hat - y_norm;
  return std::abs(e) <= tau ? 0.0 : e * e;
}

double contrastive_loss(std::span<const double> y_hat, std::span<const double> y_norm, double alpha) {
  if (y_hat.size() != y_norm.size()) throw DataError("contrastive_loss: length mismatch");
  const std::size_t n = y_hat.size();
  if (n < 2) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = (y_hat[i] - y_hat[j]) - (y_norm[i] - y_norm[j]);
      sum += std::max(0.0, std::abs(d) - alpha);
    }
  }
  return sum / static_cast<double>(n * (n - 1) / 2);
}

double cbl_weight(std::size_t n_class, double beta_cbl) {
  if (n_class == 0) throw DataError("cbl_weight: class count must be >= 1");
  if (!(beta_cbl > 0.0 && beta_cbl < 1.0)) throw UsageError("beta_cbl must lie in (0, 1)");
  if (n_class == 1) return 1.0;
  return (1.0 - beta_cbl) / (1.0 - std::pow(beta_cbl, static_cast<double>(n_class)));
}

int class_of(double raw_score) {
  if (!(raw_score >= 0.0 && raw_score <= 10.0))
    throw DataError("score outside [0, 10]: " + std::to_string(raw_score));
  return std::max(1, static_cast<int>(std::ceil(raw_score)));
}

double ClassCounts::weight(double raw_score, double beta_cbl) const {
  return cbl_weight(std::max<std::size_t>(1, count(class_of(raw_score))), beta_cbl);
}

LossValue total_loss(std::span<const double> y_hat, std::span<const double> y_norm,
                     std::span<const double> cbl, const LossWeights& w) {
  const std::size_t n = y_hat.size();
  if (y_norm.size() != n || cbl.size() != n) throw DataError("total_loss: length mismatch");
  if (n == 0) throw DataError("total_loss: empty batch");
  LossValue out;
  out.d_y_hat.assign(n, 0.0);

  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y_hat[i] - y_norm[i];
    if (std::abs(e) <= w.tau) continue;
    out.regression += cbl[i] * e * e * inv_n;
    out.d_y_hat[i] += w.beta * cbl[i] * 2.0 * e * inv_n;
  }

  if (n < 2) {
    out.contrastive_skipped = true;
  } else {
    const double inv_pairs = 1.0 / static_cast<double>(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double d = (y_hat[i] - y_hat[j]) - (y_norm[i] - y_norm[j]);
        const double h = std::abs(d) - w.alpha;
        if (h <= 0.0) continue;
        const double e = 0.5 * (cbl[i] + cbl[j]) * inv_pairs;
        out.contrastive += e * h;
        const double g = w.gamma * e * (d > 0.0 ? 1.0 : -1.0);
        out.d_y_hat[i] += g;
        out.d_y_hat[j] -= g;
      }
    }
  }
  out.total = w.beta * out.regression + w.gamma * out.contrastive;
  return out;
}

}  // namespace relkit::predictor
