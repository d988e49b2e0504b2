#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace relkit::predictor {

struct ModelConfig {
  std::size_t audio_dim = 0;      // F
  std::size_t text_dim = 0;       // D
  std::size_t listener_dim = 16;  // C
  std::size_t hidden = 64;        // H, per direction
  std::size_t head_hidden = 64;   // H2
  std::size_t num_listeners = 0;  // excluding the average listener (row 0)
  std::uint64_t seed = 42;

  std::size_t input_dim() const { return audio_dim + listener_dim + text_dim; }
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Keys: F, D, C, H, H2, num_listeners, seed. Unknown keys throw UsageError.
ModelConfig apply_model_config(ModelConfig base, const std::map<std::string, std::string>& kv);

enum Gate : std::size_t { kInputGate = 0, kForgetGate = 1, kCandidate = 2, kOutputGate = 3 };

struct LstmGateParams {
  Eigen::MatrixXd input_weights;      // (F+C+D) x H
  Eigen::MatrixXd recurrent_weights;  // H x H
  Eigen::MatrixXd bias;               // H x 1
};

struct LstmDirectionParams {
  std::array<LstmGateParams, 4> gates;
};

struct ModelParams {
  Eigen::MatrixXd listener_embedding;  // (num_listeners + 1) x C; row 0 = average listener
  LstmDirectionParams forward;
  LstmDirectionParams backward;
  Eigen::MatrixXd head_w1;  // 2H x H2
  Eigen::MatrixXd head_b1;  // H2 x 1
  Eigen::MatrixXd head_w2;  // H2 x 1
  Eigen::MatrixXd head_b2;  // 1 x 1

  static ModelParams zeros(const ModelConfig& cfg);
  // uniform(-k, k), k = 1/sqrt(fan_in), per weight matrix; zero biases and
  // listener embeddings.
  static ModelParams initialize(const ModelConfig& cfg);

  // Every tensor in declaration order, with a stable name.
  std::vector<std::pair<std::string, Eigen::MatrixXd*>> tensors();
  std::vector<std::pair<std::string, const Eigen::MatrixXd*>> tensors() const;

  void set_zero();
  std::size_t parameter_count() const;
};

struct DirectionCache {
  // Gate activations, cell and hidden state; column t is frame t in time order.
  std::array<Eigen::MatrixXd, 4> act;
  Eigen::MatrixXd cell;
  Eigen::MatrixXd cell_tanh;
  Eigen::MatrixXd hidden;
};

struct ForwardCache {
  Eigen::MatrixXd input;  // M: (F+C+D) x T
  DirectionCache fwd;
  DirectionCache bwd;
  Eigen::MatrixXd z;      // 2H x T
  Eigen::MatrixXd pre;    // H2 x T, before ReLU
  Eigen::MatrixXd act;    // H2 x T
  Eigen::RowVectorXd frame_scores;
  Eigen::Index audio_rows = 0;  // F
  std::size_t listener = 0;
  double y_hat = 0.0;
};

// audio: F x T (T >= 1), text: D, listener in [0, num_listeners].
// Throws DataError on shape mismatch and NumericError on non-finite input.
double forward(const ModelParams& params, const Eigen::MatrixXd& audio, const Eigen::VectorXd& text,
               std::size_t listener, ForwardCache* cache = nullptr);

// Accumulates d(loss)/d(params) into `grads` given d(loss)/d(y_hat).
void backward(const ModelParams& params, const ForwardCache& cache, double d_y_hat, ModelParams& grads);

}  // namespace relkit::predictor
