#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "relkit/predictor/trainer.hpp"
#include "relkit/rng.hpp"

namespace relkit::test_support {

struct GradCase {
  predictor::ModelConfig cfg;
  std::vector<predictor::FeatureBundle> features;
  std::vector<predictor::BatchItem> batch;
  predictor::LossWeights weights;
  predictor::ModelParams params;
};

// Random config with every dimension in [1, max_dim], T in [1, max_t], and
// a batch of `batch_size` items sharing T. Listener embeddings and biases
// are filled too so every tensor carries a nonzero gradient.
inline GradCase random_grad_case(std::uint64_t seed, std::size_t batch_size = 2, std::size_t max_dim = 8,
                                 std::size_t max_t = 5) {
  rng::Engine e(seed);
  auto dim = [&](std::size_t hi) { return 1 + static_cast<std::size_t>(rng::below(e, hi)); };
  GradCase c;
  c.cfg.audio_dim = dim(max_dim);
  c.cfg.text_dim = dim(max_dim);
  c.cfg.listener_dim = dim(max_dim);
  c.cfg.hidden = dim(max_dim);
  c.cfg.head_hidden = dim(max_dim);
  c.cfg.num_listeners = 3;
  c.cfg.seed = seed;
  c.params = predictor::ModelParams::initialize(c.cfg);
  for (auto& [name, t] : c.params.tensors()) {
    if (name.find("bias") != std::string::npos || name == "head.b1" || name == "head.b2" ||
        name == "listener_embedding") {
      for (Eigen::Index i = 0; i < t->size(); ++i) t->data()[i] = 0.3 * rng::normal(e);
    }
  }
  const auto frames = static_cast<Eigen::Index>(dim(max_t));
  c.features.resize(batch_size);
  for (auto& f : c.features) {
    f.audio.resize(static_cast<Eigen::Index>(c.cfg.audio_dim), frames);
    for (Eigen::Index i = 0; i < f.audio.size(); ++i) f.audio.data()[i] = rng::normal(e);
    f.text.resize(static_cast<Eigen::Index>(c.cfg.text_dim));
    for (Eigen::Index i = 0; i < f.text.size(); ++i) f.text[i] = rng::normal(e);
  }
  for (std::size_t i = 0; i < batch_size; ++i) {
    predictor::BatchItem item;
    item.features = &c.features[i];
    item.listener = static_cast<std::size_t>(rng::below(e, c.cfg.num_listeners + 1));
    item.target_norm = rng::uniform(e, -1.0, 1.0);
    item.cbl = rng::uniform(e, 0.2, 1.0);
    c.batch.push_back(item);
  }
  // Small tolerance and margin keep the loss away from its kinks.
  c.weights = {0.02, 0.01, 1.0, 0.5};
  return c;
}

// Sets targets so that item 0 and item 2 sit inside the MSE clip, the pair
// (0, 2) sits inside the contrastive margin and everything else lies outside,
// each at least a quarter tolerance away from a kink. Needs three items.
inline void straddle_kinks(GradCase& c) {
  c.weights = {0.1, 0.05, 1.0, 0.5};
  std::vector<double> y_hat;
  for (const auto& item : c.batch)
    y_hat.push_back(predictor::forward(c.params, item.features->audio, item.features->text, item.listener));
  const double tau = c.weights.tau;
  const double alpha = c.weights.alpha;
  c.batch[0].target_norm = y_hat[0] + 0.5 * tau;
  c.batch[1].target_norm = y_hat[1] - 3.0 * tau;
  c.batch[2].target_norm = y_hat[2] + 0.5 * tau + 0.5 * alpha;
  for (std::size_t i = 3; i < c.batch.size(); ++i) c.batch[i].target_norm = y_hat[i] + 4.0 * tau * (i % 2 ? 1 : -1);
}

struct GradCheckResult {
  double worst_relative_error = 0.0;
  std::string worst_tensor;
};

// Central differences with step h for every element of every tensor;
// relative error per tensor is |analytic - numeric| / max(|analytic|, |numeric|)
// in the Euclidean norm over the tensor.
inline GradCheckResult check_gradients(GradCase& c, double h = 1e-4) {
  auto grads = predictor::ModelParams::zeros(c.cfg);
  predictor::batch_loss(c.params, c.batch, c.weights, &grads);
  GradCheckResult out;
  auto params = c.params.tensors();
  auto analytic = grads.tensors();
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& t = *params[k].second;
    Eigen::MatrixXd numeric(t.rows(), t.cols());
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const double saved = t.data()[i];
      t.data()[i] = saved + h;
      const double up = predictor::batch_loss(c.params, c.batch, c.weights, nullptr).total;
      t.data()[i] = saved - h;
      const double down = predictor::batch_loss(c.params, c.batch, c.weights, nullptr).total;
      t.data()[i] = saved;
      numeric.data()[i] = (up - down) / (2.0 * h);
    }
    const auto& a = *analytic[k].second;
    const double scale = std::max({a.norm(), numeric.norm(), 1e-8});
    const double err = (a - numeric).norm() / scale;
    if (err > out.worst_relative_error) {
      out.worst_relative_error = err;
      out.worst_tensor = params[k].first;
    }
  }
  return out;
}

}  // namespace relkit::test_support
