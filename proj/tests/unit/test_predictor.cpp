#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "gradcheck.hpp"
#include "relkit/error.hpp"
#include "relkit/eval_metrics.hpp"
#include "relkit/fixture.hpp"
#include "relkit/pipeline.hpp"
#include "relkit/predictor/checkpoint.hpp"
#include "relkit/predictor/losses.hpp"
#include "relkit/predictor/model.hpp"
#include "relkit/predictor/optimizer.hpp"
#include "relkit/predictor/trainer.hpp"
#include "relkit/rng.hpp"
#include "test_util.hpp"

namespace relkit::predictor {
namespace {

using test_support::TempDir;

// Values from tests/oracles/cbl_weight.py (mpmath, 30 digits).
constexpr double kCbl100 = 0.015773675300856054383;
constexpr double kCbl2 = 0.50251256281407035176;
constexpr double kGoldenForward = 0x1.7315e785799f3p-6;
constexpr double kGoldenPredict = 0x1.aedcb438c457p-9;

ModelConfig small_config() {
  ModelConfig c;
  c.audio_dim = 4;
  c.text_dim = 2;
  c.listener_dim = 3;
  c.hidden = 5;
  c.head_hidden = 4;
  c.num_listeners = 4;
  return c;
}

Eigen::MatrixXd fixed_audio() {
  Eigen::MatrixXd v(4, 3);
  v << 0.5, -1.0, 0.25, 1.5, 0.0, -0.75, -0.5, 2.0, 1.0, 0.1, -0.2, 0.3;
  return v;
}

Eigen::VectorXd fixed_text() {
  Eigen::VectorXd o(2);
  o << 0.8, -0.4;
  return o;
}

bool bitwise_equal(const ModelParams& a, const ModelParams& b) {
  const auto ta = a.tensors();
  const auto tb = b.tensors();
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    const auto& x = *ta[i].second;
    const auto& y = *tb[i].second;
    if (x.rows() != y.rows() || x.cols() != y.cols()) return false;
    if (std::memcmp(x.data(), y.data(), sizeof(double) * static_cast<std::size_t>(x.size())) != 0) return false;
  }
  return true;
}

TEST(Losses, ClippedMse) {
  EXPECT_EQ(clipped_mse(0.6, 0.5, 0.25), 0.0);
  EXPECT_EQ(clipped_mse(1.0, 0.0, 0.25), 1.0);
  EXPECT_DOUBLE_EQ(clipped_mse(0.3, -0.1, 0.0), 0.16000000000000003);
}

TEST(Losses, Contrastive) {
  const std::vector<double> y{0.3, -0.2, 0.9};
  EXPECT_EQ(contrastive_loss(y, y, 0.1), 0.0);
  EXPECT_NEAR(contrastive_loss(std::vector<double>{0.9, 0.1}, std::vector<double>{0.5, 0.5}, 0.1), 0.7, 1e-15);
  const std::vector<double> yh{0.2, 0.7, -0.4};
  std::vector<double> shifted(yh);
  for (auto& v : shifted) v += 0.37;
  EXPECT_NEAR(contrastive_loss(yh, y, 0.1), contrastive_loss(shifted, y, 0.1), 1e-15);
  EXPECT_EQ(contrastive_loss(std::vector<double>{0.5}, std::vector<double>{0.1}, 0.1), 0.0);
}

TEST(Losses, CblWeight) {
  EXPECT_EQ(cbl_weight(1, 0.99), 1.0);
  EXPECT_NEAR(cbl_weight(100, 0.99), kCbl100, 1e-15);
  EXPECT_NEAR(cbl_weight(2, 0.99), kCbl2, 1e-15);
  for (std::size_t n = 1; n < 1000; ++n) EXPECT_GT(cbl_weight(n, 0.99), cbl_weight(n + 1, 0.99));
  EXPECT_THROW(cbl_weight(0, 0.99), DataError);
  EXPECT_THROW(cbl_weight(3, 1.0), UsageError);
}

TEST(Losses, ClassOf) {
  EXPECT_EQ(class_of(7), 7);
  EXPECT_EQ(class_of(4.2), 5);
  EXPECT_EQ(class_of(0), 1);
  EXPECT_EQ(class_of(10), 10);
  EXPECT_THROW(class_of(-0.5), DataError);
  EXPECT_THROW(class_of(10.5), DataError);
  ClassCounts counts;
  counts.add(3);
  counts.add(2.5);
  EXPECT_EQ(counts.count(3), 2u);
  EXPECT_EQ(counts.weight(9, 0.99), 1.0);
}

TEST(Losses, TotalLossLimits) {
  const std::vector<double> yh{0.9, -0.3, 0.2, 0.6};
  const std::vector<double> y{0.1, -0.2, 0.7, 0.55};
  const std::vector<double> ones(4, 1.0);
  const LossWeights w{0.25, 0.1, 1.0, 0.5};
  double mse = 0;
  for (std::size_t i = 0; i < 4; ++i) mse += clipped_mse(yh[i], y[i], 0.25) / 4.0;
  const auto unweighted = total_loss(yh, y, ones, w);
  EXPECT_NEAR(unweighted.total, mse + 0.5 * contrastive_loss(yh, y, 0.1), 1e-15);

  // Equal class frequencies give every example the same weight, which
  // cancels against an unweighted loss scaled by that weight.
  const double e = cbl_weight(50, 0.99);
  const std::vector<double> equal(4, e);
  EXPECT_NEAR(total_loss(yh, y, equal, w).total, e * unweighted.total, 1e-12);

  const auto pure = total_loss(yh, y, ones, {0.25, 0.1, 1.0, 0.0});
  EXPECT_NEAR(pure.total, mse, 1e-15);
  EXPECT_GE(unweighted.total, 0.0);
  EXPECT_EQ(total_loss(y, y, ones, w).total, 0.0);
}

TEST(Schedule, LinearWarmupAndDecay) {
  const TrainConfig c;
  EXPECT_DOUBLE_EQ(lr_at(2000, c), 1e-5);
  EXPECT_DOUBLE_EQ(lr_at(4000, c), 2e-5);
  EXPECT_EQ(lr_at(15000, c), 0.0);
  EXPECT_EQ(lr_at(0, c), 0.0);
  EXPECT_NEAR(lr_at(3999, c), lr_at(4001, c), 2.0 * c.lr0 / 4000.0);
  EXPECT_THROW(lr_at(15001, c), UsageError);
}

// Scalar Adam oracle written out by hand.
TEST(Optimizer, TwoStepScalarOracle) {
  const AdamHyper h;
  double p = 1.0, m = 0.0, v = 0.0;
  const double g = 1.0, lr = 0.1;
  double expected = p;
  double em = 0.0, ev = 0.0;
  for (std::size_t t = 1; t <= 2; ++t) {
    em = 0.9 * em + 0.1 * g;
    ev = 0.999 * ev + 0.001 * g * g;
    const double mhat = em / (1.0 - std::pow(0.9, static_cast<double>(t)));
    const double vhat = ev / (1.0 - std::pow(0.999, static_cast<double>(t)));
    expected -= lr * mhat / (std::sqrt(vhat) + h.eps);
    adam_update(std::span<double>(&p, 1), std::span<const double>(&g, 1), std::span<double>(&m, 1),
                std::span<double>(&v, 1), t, lr, h);
    EXPECT_NEAR(p, expected, 1e-15);
  }
  EXPECT_NEAR(p, 1.0 - 2.0 * 0.1 / (1.0 + 1e-8), 1e-12);
}

TEST(Optimizer, ZeroGradientLeavesParamsAndConstantGradientApproachesLr) {
  const auto cfg = small_config();
  auto params = ModelParams::initialize(cfg);
  const auto before = params;
  Adam adam(params, AdamHyper{});
  const auto zero = ModelParams::zeros(cfg);
  adam.step(params, zero, 0.01);
  EXPECT_TRUE(bitwise_equal(params, before));

  double p = 0.0, m = 0.0, v = 0.0;
  const double g = -3.0;
  double last = 0.0;
  for (std::size_t t = 1; t <= 500; ++t) {
    const double old = p;
    adam_update(std::span<double>(&p, 1), std::span<const double>(&g, 1), std::span<double>(&m, 1),
                std::span<double>(&v, 1), t, 0.01, AdamHyper{});
    last = p - old;
  }
  EXPECT_NEAR(last, 0.01, 1e-6);
}

TEST(Optimizer, NonFiniteGradientNamesTensor) {
  const auto cfg = small_config();
  auto params = ModelParams::initialize(cfg);
  auto grads = ModelParams::zeros(cfg);
  grads.head_w1(0, 0) = std::nan("");
  Adam adam(params, AdamHyper{});
  try {
    adam.step(params, grads, 0.01);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("head.w1"), std::string::npos);
  }
}

TEST(Model, ZeroParamsGiveZero) {
  const auto cfg = small_config();
  const auto params = ModelParams::zeros(cfg);
  EXPECT_EQ(forward(params, fixed_audio(), fixed_text(), 2), 0.0);
}

TEST(Model, SingleFrameIsItsOwnMean) {
  const auto cfg = small_config();
  const auto params = ModelParams::initialize(cfg);
  ForwardCache cache;
  const double y = forward(params, fixed_audio().leftCols(1), fixed_text(), 1, &cache);
  ASSERT_EQ(cache.frame_scores.size(), 1);
  EXPECT_EQ(y, cache.frame_scores[0]);
}

TEST(Model, GoldenSeed42) {
  ModelConfig cfg;
  cfg.audio_dim = 4;
  cfg.text_dim = 2;
  cfg.num_listeners = 3;
  cfg.seed = 42;
  const auto params = ModelParams::initialize(cfg);
  const double y = forward(params, fixed_audio(), fixed_text(), 0);
  EXPECT_EQ(y, kGoldenForward) << std::hexfloat << y;
}

TEST(Model, FrameOrderMatters) {
  const auto cfg = small_config();
  const auto params = ModelParams::initialize(cfg);
  Eigen::MatrixXd v = fixed_audio();
  Eigen::MatrixXd swapped = v;
  swapped.col(0).swap(swapped.col(2));
  EXPECT_NE(forward(params, v, fixed_text(), 0), forward(params, swapped, fixed_text(), 0));
}

TEST(Model, RejectsBadInput) {
  const auto cfg = small_config();
  const auto params = ModelParams::initialize(cfg);
  EXPECT_THROW(forward(params, Eigen::MatrixXd(3, 3), fixed_text(), 0), DataError);
  EXPECT_THROW(forward(params, Eigen::MatrixXd(4, 0), fixed_text(), 0), DataError);
  EXPECT_THROW(forward(params, fixed_audio(), fixed_text(), 5), DataError);
  Eigen::MatrixXd bad = fixed_audio();
  bad(1, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(forward(params, bad, fixed_text(), 0), NumericError);
}

TEST(Model, ConfigKeys) {
  const auto c = apply_model_config(ModelConfig{}, {{"C", "8"}, {"H", "12"}, {"seed", "3"}});
  EXPECT_EQ(c.listener_dim, 8u);
  EXPECT_EQ(c.hidden, 12u);
  EXPECT_EQ(c.seed, 3u);
  EXPECT_THROW(apply_model_config(ModelConfig{}, {{"depth", "2"}}), UsageError);
  EXPECT_THROW(apply_model_config(ModelConfig{}, {{"H", "-1"}}), UsageError);
  const auto t = apply_train_config(TrainConfig{}, {{"lr0", "0.001"}, {"total_steps", "10"}, {"warmup_steps", "5"}});
  EXPECT_EQ(t.lr0, 0.001);
  EXPECT_THROW(apply_train_config(TrainConfig{}, {{"warmup_steps", "20000"}}).validate(), UsageError);
  EXPECT_THROW(apply_train_config(TrainConfig{}, {{"momentum", "0.9"}}), UsageError);
}

TEST(Gradients, MatchFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    auto c = test_support::random_grad_case(seed, 2 + seed % 3);
    const auto r = test_support::check_gradients(c);
    EXPECT_LE(r.worst_relative_error, 1e-4) << "seed " << seed << " tensor " << r.worst_tensor;
  }
}

TEST(Gradients, FlatRegionGivesZero) {
  auto c = test_support::random_grad_case(17, 3);
  for (auto& item : c.batch) {
    item.target_norm = forward(c.params, item.features->audio, item.features->text, item.listener);
  }
  c.weights = {0.25, 0.1, 1.0, 0.0};
  auto grads = ModelParams::zeros(c.cfg);
  batch_loss(c.params, c.batch, c.weights, &grads);
  for (const auto& [name, t] : grads.tensors()) EXPECT_EQ(t->squaredNorm(), 0.0) << name;
}

TEST(Gradients, UnusedListenerRowsStayPut) {
  auto c = test_support::random_grad_case(23, 2);
  c.batch[0].listener = 0;
  c.batch[1].listener = 3;
  const auto before = c.params.listener_embedding;
  auto grads = ModelParams::zeros(c.cfg);
  batch_loss(c.params, c.batch, c.weights, &grads);
  EXPECT_EQ(grads.listener_embedding.row(1).squaredNorm(), 0.0);
  EXPECT_EQ(grads.listener_embedding.row(2).squaredNorm(), 0.0);
  EXPECT_GT(grads.listener_embedding.row(3).squaredNorm(), 0.0);
  Adam adam(c.params, AdamHyper{});
  adam.step(c.params, grads, 0.05);
  for (Eigen::Index r : {1, 2}) {
    for (Eigen::Index k = 0; k < before.cols(); ++k) EXPECT_EQ(c.params.listener_embedding(r, k), before(r, k));
  }
  EXPECT_NE(c.params.listener_embedding(3, 0), before(3, 0));
}

TEST(Checkpoint, RoundTripIsExact) {
  const auto cfg = small_config();
  const auto params = ModelParams::initialize(cfg);
  const auto bytes = encode_checkpoint(cfg, params);
  const auto back = decode_checkpoint(bytes);
  EXPECT_EQ(back.config, cfg);
  EXPECT_TRUE(bitwise_equal(back.params, params));
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "RKPT");

  TempDir tmp;
  save_checkpoint(tmp / "m.rkpt", cfg, params);
  EXPECT_TRUE(bitwise_equal(load_checkpoint(tmp / "m.rkpt").params, params));
}

TEST(Checkpoint, RejectsMalformed) {
  const auto cfg = small_config();
  auto bytes = encode_checkpoint(cfg, ModelParams::initialize(cfg));
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  EXPECT_THROW(decode_checkpoint(truncated), DataError);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(decode_checkpoint(trailing), DataError);
  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(magic), DataError);
  auto version = bytes;
  version[4] = 9;
  EXPECT_THROW(decode_checkpoint(version), DataError);
  TempDir tmp;
  EXPECT_THROW(load_checkpoint(tmp / "absent.rkpt"), DataError);
}

struct SmallRun {
  TempDir dir;
  Fixture fixture;
  TrainingData data;
  FeatureStore features;
  ModelConfig model;
  TrainConfig train;

  explicit SmallRun(std::uint64_t seed, bool noise_targets = false) {
    FixtureSpec spec;
    spec.seed = seed;
    fixture = write_fixture(spec, dir.path());
    if (noise_targets) {
      rng::Engine e(seed + 99);
      for (auto& r : fixture.dataset.records) {
        if (r.metric == MetricKind::kRel && !fixture.dataset.pair(r.pair_id).is_anchor)
          r.score = static_cast<int>(rng::below(e, 11));
      }
    }
    data = prepare_training_data(fixture.dataset, seed);
    std::vector<std::string> ids;
    for (const auto& [id, p] : fixture.dataset.pairs) ids.push_back(id);
    features = load_features(dir / "features", ids);
    model.listener_dim = 4;
    model.hidden = 8;
    model.head_hidden = 8;
    model.seed = seed;
    train.lr0 = 3e-3;
    train.total_steps = 600;
    train.warmup_steps = 150;
    train.eval_every = 50;
  }

  TrainResult run() const { return predictor::train(data.train, data.validation, features, model, train); }
};

TEST(Training, DeterministicGivenSeed) {
  const SmallRun setup(3);
  const auto a = setup.run();
  const auto b = setup.run();
  EXPECT_TRUE(bitwise_equal(a.best, b.best));
  EXPECT_EQ(a.best_step, b.best_step);
  ASSERT_EQ(a.history.size(), b.history.size());
  EXPECT_EQ(a.history.size(), 6u);
  EXPECT_EQ(a.config.audio_dim, 16u);
  EXPECT_EQ(a.config.num_listeners, listener_rows(setup.data.train).size());
}

TEST(Training, LearnsPlantedSignal) {
  const SmallRun setup(4);
  const auto r = setup.run();
  ASSERT_TRUE(r.best_srcc);
  EXPECT_GT(*r.best_srcc, 0.4);
}

// The best of several validation evaluations is biased upward, so a seed
// may stray past 0.2; the bound is asserted for most seeds and on average.
TEST(Training, NoiseTargetsStayNearZero) {
  int within = 0;
  double sum = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const SmallRun setup(seed, true);
    const auto r = setup.run();
    ASSERT_TRUE(r.best_srcc);
    within += std::fabs(*r.best_srcc) <= 0.2;
    sum += *r.best_srcc;
  }
  EXPECT_GE(within, 8);
  EXPECT_LE(std::fabs(sum / 10.0), 0.1);
}

TEST(Training, MissingFeaturesNamed) {
  const SmallRun setup(5);
  FeatureStore partial = setup.features;
  const auto victim = setup.data.train.records.front().pair_id;
  partial.erase(victim);
  try {
    predictor::train(setup.data.train, setup.data.validation, partial, setup.model, setup.train);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(victim), std::string::npos);
  }
  EXPECT_THROW(predictor::train(setup.data.train, Dataset{}, setup.features, setup.model, setup.train), DataError);
}

TEST(Predict, GoldenAndStable) {
  ModelConfig cfg = small_config();
  cfg.seed = 42;
  const auto params = ModelParams::initialize(cfg);
  FeatureBundle f{fixed_audio(), fixed_text()};
  const double a = predict(params, f);
  EXPECT_EQ(a, predict(params, f));
  EXPECT_EQ(a, kGoldenPredict) << std::hexfloat << a;
  const double raw = denormalize_score(a);
  EXPECT_GE(raw, 0.0);
  EXPECT_LE(raw, 10.0);
}

}  // namespace
}  // namespace relkit::predictor
