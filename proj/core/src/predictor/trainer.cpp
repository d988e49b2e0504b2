#include "relkit/predictor/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "relkit/error.hpp"
#include "relkit/eval_metrics.hpp"
#include "relkit/feature_io.hpp"
#include "relkit/kv_config.hpp"
#include "relkit/predictor/optimizer.hpp"
#include "relkit/rng.hpp"

namespace relkit::predictor {

void TrainConfig::validate() const {
  if (!(tau >= 0.0) || !(alpha >= 0.0)) throw UsageError("tau and alpha must be >= 0");
  if (!(beta_cbl > 0.0 && beta_cbl < 1.0)) throw UsageError("beta_cbl must lie in (0, 1)");
  if (!(beta >= 0.0) || !(gamma >= 0.0)) throw UsageError("beta and gamma must be >= 0");
  if (!(lr0 >= 0.0)) throw UsageError("lr0 must be >= 0");
  if (total_steps == 0) throw UsageError("total_steps must be >= 1");
  if (warmup_steps > total_steps) throw UsageError("warmup_steps exceeds total_steps");
  if (batch_size == 0 || accum_every == 0 || eval_every == 0)
    throw UsageError("batch_size, accum_every and eval_every must be >= 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    throw UsageError("adam betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw UsageError("adam_eps must be > 0");
}

TrainConfig apply_train_config(TrainConfig base, const std::map<std::string, std::string>& kv) {
  const std::map<std::string, double TrainConfig::*> reals = {
      {"tau", &TrainConfig::tau},       {"alpha", &TrainConfig::alpha},
      {"beta_cbl", &TrainConfig::beta_cbl}, {"beta", &TrainConfig::beta},
      {"gamma", &TrainConfig::gamma},   {"lr0", &TrainConfig::lr0},
      {"adam_beta1", &TrainConfig::adam_beta1}, {"adam_beta2", &TrainConfig::adam_beta2},
      {"adam_eps", &TrainConfig::adam_eps},
  };
  const std::map<std::string, std::size_t TrainConfig::*> counts = {
      {"total_steps", &TrainConfig::total_steps}, {"warmup_steps", &TrainConfig::warmup_steps},
      {"batch_size", &TrainConfig::batch_size},   {"accum_every", &TrainConfig::accum_every},
      {"eval_every", &TrainConfig::eval_every},
  };
  for (const auto& [k, v] : kv) {
    if (auto it = reals.find(k); it != reals.end()) {
      base.*(it->second) = kv_double(k, v);
    } else if (auto jt = counts.find(k); jt != counts.end()) {
      base.*(jt->second) = kv_uint(k, v);
    } else {
      throw UsageError("unknown train config key '" + k + "'");
    }
  }
  return base;
}

FeatureStore load_features(const std::filesystem::path& dir, const std::vector<std::string>& pair_ids) {
  FeatureStore out;
  std::optional<std::size_t> f_dim;
  std::optional<std::size_t> d_dim;
  for (const auto& id : pair_ids) {
    const auto a_path = feature_path(dir / "audio", id);
    const auto t_path = feature_path(dir / "text", id);
    if (!std::filesystem::exists(a_path) || !std::filesystem::exists(t_path))
      throw DataError("missing features for pair " + id + " under " + dir.string());
    const auto a = read_feature(a_path);
    const auto t = read_feature(t_path);
    if (a.rank() != 2 || a.cols() == 0) throw DataError(a_path.string() + ": audio features must be F x T");
    if (t.rank() != 1) throw DataError(t_path.string() + ": text features must be rank 1");
    if (f_dim && *f_dim != a.rows()) throw DataError(a_path.string() + ": inconsistent F");
    if (d_dim && *d_dim != t.rows()) throw DataError(t_path.string() + ": inconsistent D");
    f_dim = a.rows();
    d_dim = t.rows();
    FeatureBundle b;
    b.audio.resize(static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(a.cols()));
    for (std::size_t r = 0; r < a.rows(); ++r) {
      for (std::size_t c = 0; c < a.cols(); ++c)
        b.audio(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = a.at(r, c);
    }
    b.text.resize(static_cast<Eigen::Index>(t.rows()));
    for (std::size_t i = 0; i < t.rows(); ++i) b.text(static_cast<Eigen::Index>(i)) = t.data[i];
    out.emplace(id, std::move(b));
  }
  return out;
}

std::map<std::string, std::size_t> listener_rows(const Dataset& train) {
  std::map<std::string, std::size_t> rows;
  std::size_t next = 1;
  for (const auto& [id, profile] : train.listeners) rows[id] = next++;
  return rows;
}

std::vector<TrainingExample> build_training_set(const Dataset& train,
                                                const std::map<std::string, std::size_t>& rows) {
  std::vector<TrainingExample> out;
  for (const auto& r : train.records) {
    if (r.metric != MetricKind::kRel) continue;
    const auto it = rows.find(r.listener_id);
    if (it == rows.end()) throw DataError("listener without embedding row: " + r.listener_id);
    const double raw = r.score;
    out.push_back({r.pair_id, it->second, raw, normalize_score(raw)});
  }
  for (const auto& [pair_id, mean] : mean_score_per_pair(train, MetricKind::kRel)) {
    out.push_back({pair_id, 0, mean, normalize_score(mean)});
  }
  return out;
}

LossValue batch_loss(const ModelParams& params, std::span<const BatchItem> batch,
                     const LossWeights& w, ModelParams* grads, double scale) {
  std::vector<double> y_hat(batch.size());
  std::vector<double> y(batch.size());
  std::vector<double> e(batch.size());
  std::vector<ForwardCache> caches(grads ? batch.size() : 0);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& b = batch[i];
    y_hat[i] = forward(params, b.features->audio, b.features->text, b.listener,
                       grads ? &caches[i] : nullptr);
    y[i] = b.target_norm;
    e[i] = b.cbl;
  }
  LossValue loss = total_loss(y_hat, y, e, w);
  if (grads) {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (loss.d_y_hat[i] != 0.0) backward(params, caches[i], scale * loss.d_y_hat[i], *grads);
    }
    for (const auto& [name, t] : grads->tensors()) {
      if (!t->allFinite()) throw NumericError("non-finite gradient in " + name);
    }
  }
  return loss;
}

double predict(const ModelParams& params, const FeatureBundle& f, std::size_t listener) {
  return std::clamp(forward(params, f.audio, f.text, listener), -1.0, 1.0);
}

std::map<std::string, double> predict_all(const ModelParams& params, const FeatureStore& features,
                                          const std::vector<std::string>& pair_ids) {
  std::map<std::string, double> out;
  for (const auto& id : pair_ids) {
    const auto it = features.find(id);
    if (it == features.end()) throw DataError("missing features for pair " + id);
    out[id] = predict(params, it->second);
  }
  return out;
}

namespace {

// Batches share a frame count; order within and across buckets is
// reshuffled every epoch.
class BatchStream {
 public:
  BatchStream(const std::vector<TrainingExample>& examples, const FeatureStore& features,
              std::size_t batch_size, std::uint64_t seed)
      : batch_size_(batch_size), engine_(seed) {
    for (std::size_t i = 0; i < examples.size(); ++i) {
      buckets_[features.at(examples[i].pair_id).audio.cols()].push_back(i);
    }
  }

  const std::vector<std::size_t>& next() {
    if (cursor_ == epoch_.size()) refill();
    return epoch_[cursor_++];
  }

 private:
  void refill() {
    epoch_.clear();
    cursor_ = 0;
    for (auto& [frames, idx] : buckets_) {
      rng::shuffle(idx, engine_);
      for (std::size_t s = 0; s < idx.size(); s += batch_size_) {
        const auto e = std::min(idx.size(), s + batch_size_);
        epoch_.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(s),
                            idx.begin() + static_cast<std::ptrdiff_t>(e));
      }
    }
    rng::shuffle(epoch_, engine_);
  }

  std::size_t batch_size_;
  rng::Engine engine_;
  std::map<Eigen::Index, std::vector<std::size_t>> buckets_;
  std::vector<std::vector<std::size_t>> epoch_;
  std::size_t cursor_ = 0;
};

std::optional<double> validation_srcc(const ModelParams& params, const FeatureStore& features,
                                      const std::vector<std::string>& ids,
                                      const std::vector<double>& truth_norm) {
  std::vector<double> pred;
  pred.reserve(ids.size());
  for (const auto& id : ids) pred.push_back(predict(params, features.at(id)));
  return spearman(pred, truth_norm);
}

}  // namespace

TrainResult train(const Dataset& train_set, const Dataset& validation, const FeatureStore& features,
                  ModelConfig model_cfg, const TrainConfig& cfg) {
  cfg.validate();
  const Dataset train_rel = restrict_to_metric(train_set, MetricKind::kRel);
  const Dataset val_rel = restrict_to_metric(validation, MetricKind::kRel);
  if (train_rel.records.empty()) throw DataError("training set has no REL evaluations");
  if (val_rel.records.empty()) throw DataError("validation set has no REL evaluations");

  const auto rows = listener_rows(train_rel);
  if (model_cfg.num_listeners == 0) model_cfg.num_listeners = rows.size();
  if (model_cfg.num_listeners != rows.size())
    throw DataError("model config num_listeners=" + std::to_string(model_cfg.num_listeners) +
                    " but the training set has " + std::to_string(rows.size()) + " listeners");

  const auto examples = build_training_set(train_rel, rows);
  for (const auto& ex : examples) {
    if (!features.contains(ex.pair_id)) throw DataError("missing features for pair " + ex.pair_id);
  }
  std::vector<std::string> val_ids;
  std::vector<double> val_truth;
  for (const auto& [id, mean] : mean_score_per_pair(val_rel, MetricKind::kRel)) {
    if (!features.contains(id)) throw DataError("missing features for pair " + id);
    val_ids.push_back(id);
    val_truth.push_back(normalize_score(mean));
  }
  const auto& any = features.at(examples.front().pair_id);
  model_cfg.audio_dim = static_cast<std::size_t>(any.audio.rows());
  model_cfg.text_dim = static_cast<std::size_t>(any.text.size());

  ClassCounts counts;
  for (const auto& ex : examples) counts.add(ex.target_raw);
  std::vector<double> cbl(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) cbl[i] = counts.weight(examples[i].target_raw, cfg.beta_cbl);

  TrainResult result;
  result.config = model_cfg;
  ModelParams params = ModelParams::initialize(model_cfg);
  ModelParams grads = ModelParams::zeros(model_cfg);
  Adam adam(params, {cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps});
  BatchStream stream(examples, features, cfg.batch_size, model_cfg.seed ^ 0x5eed5eed5eed5eedULL);
  const LossWeights w = cfg.loss_weights();

  std::size_t pending = 0;
  std::size_t opt_steps = 0;
  std::size_t last_eval = 0;
  double loss_sum = 0.0;
  std::size_t loss_n = 0;
  double last_lr = 0.0;
  std::vector<BatchItem> batch;

  auto evaluate_now = [&](std::size_t micro) {
    EvalPoint p;
    p.optimizer_step = opt_steps;
    p.micro_step = micro;
    p.lr = last_lr;
    p.train_loss = loss_n ? loss_sum / static_cast<double>(loss_n) : 0.0;
    p.val_srcc = validation_srcc(params, features, val_ids, val_truth);
    loss_sum = 0.0;
    loss_n = 0;
    last_eval = opt_steps;
    const bool better = p.val_srcc && (!result.best_srcc || *p.val_srcc > *result.best_srcc);
    if (better || result.history.empty()) {
      result.best = params;
      result.best_step = opt_steps;
      if (better) result.best_srcc = p.val_srcc;
    }
    result.history.push_back(p);
  };

  auto apply = [&](std::size_t micro) {
    // Gradients were accumulated at scale 1/accum_every; a short final
    // group is rescaled to a plain mean.
    if (pending != cfg.accum_every) {
      const double fix = static_cast<double>(cfg.accum_every) / static_cast<double>(pending);
      for (auto& [name, t] : grads.tensors()) *t *= fix;
    }
    last_lr = lr_at(micro, cfg);
    adam.step(params, grads, last_lr);
    grads.set_zero();
    pending = 0;
    ++opt_steps;
    if (opt_steps % cfg.eval_every == 0) evaluate_now(micro);
  };

  const double scale = 1.0 / static_cast<double>(cfg.accum_every);
  for (std::size_t micro = 1; micro <= cfg.total_steps; ++micro) {
    const auto& idx = stream.next();
    batch.clear();
    for (const auto i : idx) {
      batch.push_back({&features.at(examples[i].pair_id), examples[i].listener, examples[i].target_norm, cbl[i]});
    }
    const LossValue loss = batch_loss(params, batch, w, &grads, scale);
    if (loss.contrastive_skipped) ++result.single_item_batches;
    loss_sum += loss.total;
    ++loss_n;
    ++pending;
    if (pending == cfg.accum_every) apply(micro);
  }
  if (pending > 0) apply(cfg.total_steps);
  if (result.history.empty() || last_eval != opt_steps) evaluate_now(cfg.total_steps);
  return result;
}

}  // namespace relkit::predictor
