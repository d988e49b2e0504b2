#include "relkit/predictor/optimizer.hpp"

#include <cmath>

#include "relkit/error.hpp"

namespace relkit::predictor {

double lr_at(std::size_t step, const TrainConfig& cfg) {
  if (step > cfg.total_steps) throw UsageError("lr_at: step beyond total_steps");
  const auto s = static_cast<double>(step);
  if (cfg.warmup_steps > 0 && step <= cfg.warmup_steps)
    return cfg.lr0 * s / static_cast<double>(cfg.warmup_steps);
  if (cfg.total_steps == cfg.warmup_steps) return cfg.lr0;
  return cfg.lr0 * static_cast<double>(cfg.total_steps - step) /
         static_cast<double>(cfg.total_steps - cfg.warmup_steps);
}

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, std::size_t t, double lr, const AdamHyper& h) {
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * grad[i];
    v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * grad[i] * grad[i];
    param[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + h.eps);
  }
}

Adam::Adam(const ModelParams& like, AdamHyper h) : h_(h), m_(like), v_(like) {
  m_.set_zero();
  v_.set_zero();
}

void Adam::step(ModelParams& params, const ModelParams& grads, double lr) {
  const auto g = grads.tensors();
  for (const auto& [name, t] : g) {
    if (!t->allFinite()) throw NumericError("non-finite gradient in " + name);
  }
  ModelParams next = params;
  ++t_;
  auto p = next.tensors();
  auto m = m_.tensors();
  auto v = v_.tensors();
  for (std::size_t k = 0; k < p.size(); ++k) {
    const auto n = static_cast<std::size_t>(p[k].second->size());
    adam_update({p[k].second->data(), n}, {g[k].second->data(), n}, {m[k].second->data(), n},
                {v[k].second->data(), n}, t_, lr, h_);
    if (!p[k].second->allFinite()) throw NumericError("non-finite update in " + p[k].first);
  }
  params = std::move(next);
}

}  // namespace relkit::predictor
