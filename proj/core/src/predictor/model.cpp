#include "relkit/predictor/model.hpp"

#include <cmath>

#include "relkit/error.hpp"
#include "relkit/kv_config.hpp"
#include "relkit/rng.hpp"

namespace relkit::predictor {
namespace {

constexpr std::array<const char*, 4> kGateNames = {"input", "forget", "candidate", "output"};

void fill_uniform(Eigen::MatrixXd& m, double fan_in, rng::Engine& e) {
  const double k = 1.0 / std::sqrt(fan_in);
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng::uniform(e, -k, k);
  }
}

void run_direction(const LstmDirectionParams& p, const Eigen::MatrixXd& x, bool reverse,
                   DirectionCache& c) {
  const Eigen::Index h = p.gates[0].bias.rows();
  const Eigen::Index t_len = x.cols();
  std::array<Eigen::MatrixXd, 4> proj;
  for (std::size_t g = 0; g < 4; ++g) {
    proj[g] = p.gates[g].input_weights.transpose() * x;
    proj[g].colwise() += p.gates[g].bias.col(0);
    c.act[g].resize(h, t_len);
  }
  c.cell.resize(h, t_len);
  c.cell_tanh.resize(h, t_len);
  c.hidden.resize(h, t_len);
  Eigen::VectorXd h_prev = Eigen::VectorXd::Zero(h);
  Eigen::VectorXd c_prev = Eigen::VectorXd::Zero(h);
  Eigen::VectorXd a(h);
  for (Eigen::Index step = 0; step < t_len; ++step) {
    const Eigen::Index t = reverse ? t_len - 1 - step : step;
    for (std::size_t g = 0; g < 4; ++g) {
      a.noalias() = proj[g].col(t);
      a.noalias() += p.gates[g].recurrent_weights.transpose() * h_prev;
      if (g == kCandidate) {
        c.act[g].col(t) = a.array().tanh().matrix();
      } else {
        c.act[g].col(t) = (1.0 / (1.0 + (-a.array()).exp())).matrix();
      }
    }
    c_prev = c.act[kForgetGate].col(t).cwiseProduct(c_prev) +
             c.act[kInputGate].col(t).cwiseProduct(c.act[kCandidate].col(t));
    c.cell.col(t) = c_prev;
    c.cell_tanh.col(t) = c_prev.array().tanh().matrix();
    h_prev = c.act[kOutputGate].col(t).cwiseProduct(c.cell_tanh.col(t));
    c.hidden.col(t) = h_prev;
  }
}

// Backpropagation through time for one direction. d_hidden holds the
// gradient reaching each frame's hidden output from the head.
void backprop_direction(const LstmDirectionParams& p, const Eigen::MatrixXd& x, bool reverse,
                        const DirectionCache& c, const Eigen::MatrixXd& d_hidden,
                        LstmDirectionParams& grad, Eigen::MatrixXd& d_input) {
  const Eigen::Index h = p.gates[0].bias.rows();
  const Eigen::Index t_len = x.cols();
  std::array<Eigen::MatrixXd, 4> d_pre;
  for (auto& m : d_pre) m.resize(h, t_len);
  // Hidden state that fed frame t's recurrence; zero at the sequence start.
  Eigen::MatrixXd h_prev_of(h, t_len);
  Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(h);
  Eigen::VectorXd dc_next = Eigen::VectorXd::Zero(h);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(h);
  for (Eigen::Index step = t_len - 1; step >= 0; --step) {
    const Eigen::Index t = reverse ? t_len - 1 - step : step;
    const bool first = step == 0;
    const Eigen::Index t_prev = reverse ? t + 1 : t - 1;
    const Eigen::VectorXd c_prev = first ? zero : Eigen::VectorXd(c.cell.col(t_prev));
    h_prev_of.col(t) = first ? zero : Eigen::VectorXd(c.hidden.col(t_prev));

    const Eigen::ArrayXd i = c.act[kInputGate].col(t).array();
    const Eigen::ArrayXd f = c.act[kForgetGate].col(t).array();
    const Eigen::ArrayXd g = c.act[kCandidate].col(t).array();
    const Eigen::ArrayXd o = c.act[kOutputGate].col(t).array();
    const Eigen::ArrayXd tc = c.cell_tanh.col(t).array();

    const Eigen::ArrayXd dh = d_hidden.col(t).array() + dh_next.array();
    const Eigen::ArrayXd dc = dc_next.array() + dh * o * (1.0 - tc * tc);
    d_pre[kOutputGate].col(t) = (dh * tc * o * (1.0 - o)).matrix();
    d_pre[kInputGate].col(t) = (dc * g * i * (1.0 - i)).matrix();
    d_pre[kCandidate].col(t) = (dc * i * (1.0 - g * g)).matrix();
    d_pre[kForgetGate].col(t) = (dc * c_prev.array() * f * (1.0 - f)).matrix();
    dc_next = (dc * f).matrix();

    dh_next.setZero();
    for (std::size_t gi = 0; gi < 4; ++gi) dh_next.noalias() += p.gates[gi].recurrent_weights * d_pre[gi].col(t);
  }
  for (std::size_t gi = 0; gi < 4; ++gi) {
    grad.gates[gi].input_weights.noalias() += x * d_pre[gi].transpose();
    grad.gates[gi].recurrent_weights.noalias() += h_prev_of * d_pre[gi].transpose();
    grad.gates[gi].bias += d_pre[gi].rowwise().sum();
    d_input.noalias() += p.gates[gi].input_weights * d_pre[gi];
  }
}

void push_direction(std::vector<std::pair<std::string, Eigen::MatrixXd*>>& out,
                    LstmDirectionParams& d, const std::string& prefix) {
  for (std::size_t g = 0; g < 4; ++g) {
    const std::string base = prefix + "." + kGateNames[g];
    out.emplace_back(base + ".input_weights", &d.gates[g].input_weights);
    out.emplace_back(base + ".recurrent_weights", &d.gates[g].recurrent_weights);
    out.emplace_back(base + ".bias", &d.gates[g].bias);
  }
}

}  // namespace

void ModelConfig::validate() const {
  if (audio_dim == 0 || text_dim == 0 || listener_dim == 0 || hidden == 0 || head_hidden == 0)
    throw UsageError("model dimensions must all be >= 1");
}

ModelConfig apply_model_config(ModelConfig base, const std::map<std::string, std::string>& kv) {
  for (const auto& [k, v] : kv) {
    if (k == "F") base.audio_dim = kv_uint(k, v);
    else if (k == "D") base.text_dim = kv_uint(k, v);
    else if (k == "C") base.listener_dim = kv_uint(k, v);
    else if (k == "H") base.hidden = kv_uint(k, v);
    else if (k == "H2") base.head_hidden = kv_uint(k, v);
    else if (k == "num_listeners") base.num_listeners = kv_uint(k, v);
    else if (k == "seed") base.seed = kv_uint(k, v);
    else throw UsageError("unknown model config key '" + k + "'");
  }
  return base;
}

ModelParams ModelParams::zeros(const ModelConfig& cfg) {
  const auto in = static_cast<Eigen::Index>(cfg.input_dim());
  const auto h = static_cast<Eigen::Index>(cfg.hidden);
  const auto h2 = static_cast<Eigen::Index>(cfg.head_hidden);
  ModelParams p;
  p.listener_embedding = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cfg.num_listeners + 1),
                                               static_cast<Eigen::Index>(cfg.listener_dim));
  for (auto* dir : {&p.forward, &p.backward}) {
    for (auto& g : dir->gates) {
      g.input_weights = Eigen::MatrixXd::Zero(in, h);
      g.recurrent_weights = Eigen::MatrixXd::Zero(h, h);
      g.bias = Eigen::MatrixXd::Zero(h, 1);
    }
  }
  p.head_w1 = Eigen::MatrixXd::Zero(2 * h, h2);
  p.head_b1 = Eigen::MatrixXd::Zero(h2, 1);
  p.head_w2 = Eigen::MatrixXd::Zero(h2, 1);
  p.head_b2 = Eigen::MatrixXd::Zero(1, 1);
  return p;
}

ModelParams ModelParams::initialize(const ModelConfig& cfg) {
  cfg.validate();
  auto p = zeros(cfg);
  rng::Engine e(cfg.seed);
  for (auto* dir : {&p.forward, &p.backward}) {
    for (auto& g : dir->gates) {
      fill_uniform(g.input_weights, static_cast<double>(cfg.input_dim()), e);
      fill_uniform(g.recurrent_weights, static_cast<double>(cfg.hidden), e);
    }
  }
  fill_uniform(p.head_w1, static_cast<double>(2 * cfg.hidden), e);
  fill_uniform(p.head_w2, static_cast<double>(cfg.head_hidden), e);
  return p;
}

std::vector<std::pair<std::string, Eigen::MatrixXd*>> ModelParams::tensors() {
  std::vector<std::pair<std::string, Eigen::MatrixXd*>> out;
  out.emplace_back("listener_embedding", &listener_embedding);
  push_direction(out, forward, "lstm.forward");
  push_direction(out, backward, "lstm.backward");
  out.emplace_back("head.w1", &head_w1);
  out.emplace_back("head.b1", &head_b1);
  out.emplace_back("head.w2", &head_w2);
  out.emplace_back("head.b2", &head_b2);
  return out;
}

std::vector<std::pair<std::string, const Eigen::MatrixXd*>> ModelParams::tensors() const {
  std::vector<std::pair<std::string, const Eigen::MatrixXd*>> out;
  for (auto& [name, t] : const_cast<ModelParams*>(this)->tensors()) out.emplace_back(name, t);
  return out;
}

void ModelParams::set_zero() {
  for (auto& [name, t] : tensors()) t->setZero();
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors()) n += static_cast<std::size_t>(t->size());
  return n;
}

double forward(const ModelParams& params, const Eigen::MatrixXd& audio, const Eigen::VectorXd& text,
               std::size_t listener, ForwardCache* cache) {
  const Eigen::Index c_dim = params.listener_embedding.cols();
  const Eigen::Index in_dim = params.forward.gates[0].input_weights.rows();
  if (audio.cols() < 1) throw DataError("audio features need at least one frame");
  if (audio.rows() + c_dim + text.size() != in_dim)
    throw DataError("feature dimensions do not match the model");
  if (listener >= static_cast<std::size_t>(params.listener_embedding.rows()))
    throw DataError("listener index out of range");
  if (!audio.allFinite() || !text.allFinite()) throw NumericError("non-finite model input");

  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  const Eigen::Index t_len = audio.cols();
  c.listener = listener;
  c.audio_rows = audio.rows();
  c.input.resize(in_dim, t_len);
  c.input.topRows(audio.rows()) = audio;
  c.input.middleRows(audio.rows(), c_dim) =
      params.listener_embedding.row(static_cast<Eigen::Index>(listener)).transpose().replicate(1, t_len);
  c.input.bottomRows(text.size()) = text.replicate(1, t_len);

  run_direction(params.forward, c.input, false, c.fwd);
  run_direction(params.backward, c.input, true, c.bwd);
  const Eigen::Index h = c.fwd.hidden.rows();
  c.z.resize(2 * h, t_len);
  c.z.topRows(h) = c.fwd.hidden;
  c.z.bottomRows(h) = c.bwd.hidden;

  c.pre = params.head_w1.transpose() * c.z;
  c.pre.colwise() += params.head_b1.col(0);
  c.act = c.pre.cwiseMax(0.0);
  c.frame_scores = params.head_w2.transpose() * c.act;
  c.frame_scores.array() += params.head_b2(0, 0);
  c.y_hat = c.frame_scores.mean();
  return c.y_hat;
}

void backward(const ModelParams& params, const ForwardCache& c, double d_y_hat, ModelParams& grads) {
  const Eigen::Index t_len = c.z.cols();
  const Eigen::RowVectorXd d_frames =
      Eigen::RowVectorXd::Constant(t_len, d_y_hat / static_cast<double>(t_len));
  grads.head_w2.noalias() += c.act * d_frames.transpose();
  grads.head_b2(0, 0) += d_frames.sum();
  // ReLU subgradient at 0 is 0.
  const Eigen::MatrixXd d_pre =
      (params.head_w2 * d_frames).cwiseProduct((c.pre.array() > 0.0).cast<double>().matrix());
  grads.head_w1.noalias() += c.z * d_pre.transpose();
  grads.head_b1 += d_pre.rowwise().sum();
  const Eigen::MatrixXd d_z = params.head_w1 * d_pre;

  const Eigen::Index h = c.fwd.hidden.rows();
  Eigen::MatrixXd d_input = Eigen::MatrixXd::Zero(c.input.rows(), t_len);
  backprop_direction(params.forward, c.input, false, c.fwd, d_z.topRows(h), grads.forward, d_input);
  backprop_direction(params.backward, c.input, true, c.bwd, d_z.bottomRows(h), grads.backward, d_input);

  // The listener row is repeated at every frame, so its gradient is the sum.
  const Eigen::Index c_dim = params.listener_embedding.cols();
  grads.listener_embedding.row(static_cast<Eigen::Index>(c.listener)) +=
      d_input.middleRows(c.audio_rows, c_dim).rowwise().sum().transpose();
}

}  // namespace relkit::predictor
