#pragma once

#include <cstddef>
#include <span>

#include "relkit/predictor/model.hpp"
#include "relkit/predictor/train_config.hpp"

namespace relkit::predictor {

// Linear warm-up to lr0 at warmup_steps, then linear decay to 0 at
// total_steps.
double lr_at(std::size_t step, const TrainConfig& cfg);

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update in place; `t` is the 1-based step count.
void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, std::size_t t, double lr, const AdamHyper& h);

class Adam {
 public:
  Adam(const ModelParams& like, AdamHyper h);

  // Throws NumericError naming the tensor when a gradient or updated value
  // is not finite; params are left untouched in that case.
  void step(ModelParams& params, const ModelParams& grads, double lr);
  std::size_t steps_taken() const { return t_; }

 private:
  AdamHyper h_;
  ModelParams m_;
  ModelParams v_;
  std::size_t t_ = 0;
};

}  // namespace relkit::predictor
