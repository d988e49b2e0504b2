#pragma once

#include <cstddef>
#include <map>
#include <string>

#include "relkit/predictor/losses.hpp"

namespace relkit::predictor {

struct TrainConfig {
  double tau = 0.25;
  double alpha = 0.1;
  double beta_cbl = 0.99;
  double beta = 1.0;
  double gamma = 0.5;
  double lr0 = 2.0e-5;
  std::size_t total_steps = 15000;  // micro-batches
  std::size_t warmup_steps = 4000;
  std::size_t batch_size = 12;
  std::size_t accum_every = 2;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t eval_every = 500;  // optimizer steps

  LossWeights loss_weights() const { return {tau, alpha, beta, gamma}; }
  void validate() const;
};

// Keys are the field names above. Unknown keys and malformed values throw
// UsageError.
TrainConfig apply_train_config(TrainConfig base, const std::map<std::string, std::string>& kv);

}  // namespace relkit::predictor
