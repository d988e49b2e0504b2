#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "relkit/data_model.hpp"
#include "relkit/predictor/losses.hpp"
#include "relkit/predictor/model.hpp"
#include "relkit/predictor/train_config.hpp"

namespace relkit::predictor {

struct FeatureBundle {
  Eigen::MatrixXd audio;  // F x T
  Eigen::VectorXd text;   // D
};

using FeatureStore = std::map<std::string, FeatureBundle>;

// Reads <dir>/audio/<id>.rfb (rank 2) and <dir>/text/<id>.rfb (rank 1),
// widening to double. Throws DataError naming the first pair without
// features, or on inconsistent dimensions across pairs.
FeatureStore load_features(const std::filesystem::path& dir, const std::vector<std::string>& pair_ids);

// Listener ids in sorted order map to embedding rows 1..L.
std::map<std::string, std::size_t> listener_rows(const Dataset& train);

struct TrainingExample {
  std::string pair_id;
  std::size_t listener = 0;  // 0 = average listener
  double target_raw = 0.0;
  double target_norm = 0.0;
};

// One example per REL record plus one average-listener example per pair
// (mean of its REL scores).
std::vector<TrainingExample> build_training_set(const Dataset& train,
                                                const std::map<std::string, std::size_t>& rows);

struct BatchItem {
  const FeatureBundle* features = nullptr;
  std::size_t listener = 0;
  double target_norm = 0.0;
  double cbl = 1.0;
};

// Loss of one batch; accumulates scale * gradient into `grads` when given.
// Throws NumericError naming the tensor if a gradient is not finite.
LossValue batch_loss(const ModelParams& params, std::span<const BatchItem> batch,
                     const LossWeights& w, ModelParams* grads, double scale = 1.0);

struct EvalPoint {
  std::size_t optimizer_step = 0;
  std::size_t micro_step = 0;
  double lr = 0.0;
  double train_loss = 0.0;  // mean micro-batch loss since the previous evaluation
  std::optional<double> val_srcc;
};

struct TrainResult {
  ModelConfig config;  // with num_listeners resolved
  ModelParams best;
  std::size_t best_step = 0;
  std::optional<double> best_srcc;
  std::vector<EvalPoint> history;
  std::size_t single_item_batches = 0;  // batches where the contrastive term was skipped
};

// `train` and `validation` are REL datasets. model_cfg.num_listeners may be
// 0 (taken from the training listeners) or must match them.
TrainResult train(const Dataset& train, const Dataset& validation, const FeatureStore& features,
                  ModelConfig model_cfg, const TrainConfig& cfg);

// Average-listener prediction on the normalized scale, clamped to [-1, 1].
double predict(const ModelParams& params, const FeatureBundle& f, std::size_t listener = 0);

std::map<std::string, double> predict_all(const ModelParams& params, const FeatureStore& features,
                                          const std::vector<std::string>& pair_ids);

}  // namespace relkit::predictor
