#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include <nlohmann/json.hpp>

#include "brpuf/crp.hpp"
#include "brpuf/mlp.hpp"

using namespace brpuf;

namespace {

using MatD = Eigen::MatrixXd;
using VecD = Eigen::VectorXd;

MatD random_spins(Eigen::Index m, Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  MatD x(m, n);
  for (Eigen::Index c = 0; c < n; ++c)
    for (Eigen::Index r = 0; r < m; ++r) x(r, c) = (rng() & 1u) ? 1.0 : -1.0;
  return x;
}

VecD random_labels(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  VecD y(n);
  for (auto& v : y) v = static_cast<double>(rng() & 1u);
  return y;
}

MlpConfig small_config(std::size_t m, std::size_t layers, std::size_t hidden) {
  MlpConfig cfg;
  cfg.m = m;
  cfg.layers = layers;
  cfg.hidden = hidden;
  cfg.seed = 17;
  return cfg;
}

CrpDataset puf_dataset(std::size_t m, std::size_t k, std::size_t n, std::uint64_t seed) {
  std::vector<std::uint64_t> seeds;
  for (std::size_t j = 0; j < k; ++j) seeds.push_back(derive_seed(seed, "c", j));
  const XorPuf puf = XorPuf::generate(XorKind::XorBr, m, seeds);
  GaloisLfsr lfsr = GaloisLfsr::default64(seed | 1);
  const auto challenges = lfsr_generate(lfsr, n, m);
  return collect_crps(puf, Obfuscation{}, challenges, {});
}

double max_relative_gradient_error(const MlpConfig& cfg, std::uint64_t data_seed) {
  Mlp<double> model = build_mlp<double>(cfg);
  // Non-zero biases so every parameter has a nontrivial gradient path.
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  for (auto& b : model.biases)
    for (auto& v : b) v = 0.1 * n01(rng);
  const MatD x = random_spins(static_cast<Eigen::Index>(cfg.m), 32, data_seed);
  const VecD y = random_labels(32, data_seed + 1);

  MlpGradients<double> g;
  loss_and_gradients<double>(model, x, y, &g);

  const double h = 1e-4;
  double worst = 0.0;
  const auto check = [&](double& param, double analytic) {
    const double saved = param;
    param = saved + h;
    const double up = mean_loss<double>(model, x, y);
    param = saved - h;
    const double down = mean_loss<double>(model, x, y);
    param = saved;
    const double numeric = (up - down) / (2 * h);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic - numeric) / denom);
  };
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    for (Eigen::Index i = 0; i < model.weights[l].size(); ++i) check(model.weights[l].data()[i], g.weights[l].data()[i]);
    for (Eigen::Index i = 0; i < model.biases[l].size(); ++i) check(model.biases[l][i], g.biases[l][i]);
  }
  return worst;
}

}  // namespace

TEST(CountWeights, KnownSizes) {
  MlpConfig cfg = small_config(64, 8, 1024);
  EXPECT_EQ(count_weights(cfg), 7'407'616u);
  cfg = small_config(64, 12, 2000);
  EXPECT_EQ(count_weights(cfg), 44'132'000u);
  cfg = small_config(64, 1, 100);
  EXPECT_EQ(count_weights(cfg), 64u * 100u + 2u * 100u);
  EXPECT_EQ(count_biases(cfg), 102u);
}

TEST(CountWeights, MatchesConstructedModelAcrossSweepGrid) {
  for (std::size_t n : {1, 4, 8, 12})
    for (std::size_t k : {64, 128, 256}) {
      const MlpConfig cfg = small_config(64, n, k);
      const Mlp<float> model = build_mlp<float>(cfg, InitKind::Zero);
      EXPECT_EQ(model.weight_count(), count_weights(cfg)) << n << "x" << k;
      EXPECT_EQ(model.bias_count(), count_biases(cfg));
      EXPECT_EQ(model.weights.size(), n + 1);
      EXPECT_EQ(model.weights.back().rows(), 2);
    }
}

TEST(BuildMlp, DeterministicPerSeed) {
  const MlpConfig cfg = small_config(16, 3, 8);
  const auto a = build_mlp<double>(cfg), b = build_mlp<double>(cfg);
  for (std::size_t l = 0; l < a.weights.size(); ++l) EXPECT_EQ(a.weights[l], b.weights[l]);
  MlpConfig other = cfg;
  other.seed = 18;
  EXPECT_NE(build_mlp<double>(other).weights[0], a.weights[0]);
  // float and double start from the same draws.
  EXPECT_TRUE(build_mlp<float>(cfg).weights[1].cast<double>().isApprox(a.weights[1].cast<float>().cast<double>()));
}

TEST(BuildMlp, InitScaleFollowsFanIn) {
  const MlpConfig cfg = small_config(64, 2, 512);
  const auto model = build_mlp<double>(cfg);
  const auto& w = model.weights[1];
  const double var = w.array().square().mean();
  EXPECT_NEAR(var, 2.0 / 512.0, 0.05 * 2.0 / 512.0);
}

TEST(BuildMlp, RejectsInvalidConfig) {
  MlpConfig cfg = small_config(16, 0, 8);
  EXPECT_THROW(build_mlp<double>(cfg), InvalidParameter);
  cfg = small_config(16, 1, 0);
  EXPECT_THROW(build_mlp<double>(cfg), InvalidParameter);
  cfg = small_config(16, 1, 8);
  cfg.dropout_rate = 1.0;
  EXPECT_THROW(build_mlp<double>(cfg), InvalidParameter);
}

TEST(Forward, ZeroInitPredictsHalf) {
  const auto model = build_mlp<double>(small_config(16, 2, 8), InitKind::Zero);
  const auto p = forward<double>(model, random_spins(16, 50, 1));
  EXPECT_TRUE((p.array() == 0.5).all());
}

TEST(Forward, DeterministicInEvalModeAndNormalized) {
  const auto model = build_mlp<double>(small_config(16, 3, 32));
  const MatD x = random_spins(16, 200, 2);
  const auto p1 = forward<double>(model, x), p2 = forward<double>(model, x);
  EXPECT_EQ(p1, p2);
  const auto probs = class_probabilities<double>(model, x);
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    EXPECT_GT(probs(1, c), 0.0);
    EXPECT_LT(probs(1, c), 1.0);
    EXPECT_NEAR(probs(0, c) + probs(1, c), 1.0, 1e-15);
    EXPECT_EQ(probs(1, c), p1[c]);
  }
}

TEST(Forward, DropoutOnlyInTrainMode) {
  MlpConfig cfg = small_config(16, 2, 64);
  cfg.dropout_rate = 0.5;
  const auto model = build_mlp<double>(cfg);
  const MatD x = random_spins(16, 100, 3);
  std::mt19937_64 rng(1);
  const auto train = forward<double>(model, x, &rng);
  EXPECT_NE(train, forward<double>(model, x));
  std::mt19937_64 again(1);
  EXPECT_EQ(train, forward<double>(model, x, &again));
}

TEST(Forward, WidthMismatchIsDimensionError) {
  const auto model = build_mlp<double>(small_config(16, 1, 4));
  EXPECT_THROW(forward<double>(model, random_spins(15, 3, 1)), DimensionError);
}

TEST(Gradients, MatchCentralDifferencesRelu) {
  MlpConfig cfg = small_config(10, 3, 8);
  EXPECT_LT(max_relative_gradient_error(cfg, 21), 1e-5);
}

TEST(Gradients, MatchCentralDifferencesTanh) {
  MlpConfig cfg = small_config(10, 3, 8);
  cfg.activation = Activation::Tanh;
  EXPECT_LT(max_relative_gradient_error(cfg, 22), 1e-5);
}

TEST(Gradients, RandomSmallModels) {
  for (std::uint64_t s = 1; s <= 5; ++s) {
    MlpConfig cfg = small_config(4 + s, 1 + s % 3, 3 + s);
    cfg.seed = s;
    cfg.activation = s % 2 ? Activation::Tanh : Activation::Relu;
    EXPECT_LT(max_relative_gradient_error(cfg, 100 + s), 1e-5) << "seed " << s;
  }
}

TEST(Train, SeparableToyReachesPlateauAtOne) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  MatD x(2, 400);
  VecD y(400);
  for (Eigen::Index c = 0; c < 400; ++c) {
    const bool cls = c % 2;
    x(0, c) = n01(rng) * 0.3 + (cls ? 2.0 : -2.0);
    x(1, c) = n01(rng) * 0.3 + (cls ? 1.0 : -1.0);
    y[c] = cls;
  }
  MlpConfig cfg = small_config(2, 1, 8);
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 32;
  cfg.checkpoint_every = 100;
  cfg.max_iterations = 50'000;
  auto model = build_mlp<double>(cfg);
  const TrainTrace trace = train_mlp<double>(model, x, y);
  EXPECT_EQ(trace.stop_reason, StopReason::Plateau);
  EXPECT_EQ(trace.checkpoints.back().accuracy, 1.0);
  EXPECT_EQ(accuracy<double>(model, x, y), 1.0);
  for (std::size_t i = 1; i < trace.checkpoints.size(); ++i)
    EXPECT_GT(trace.checkpoints[i].iteration, trace.checkpoints[i - 1].iteration);
}

TEST(Train, SingleBrPufIsLearned) {
  const CrpDataset ds = puf_dataset(64, 1, 10'000, 41);
  const auto [train, test] = split_dataset(ds, 5000, 5000, 2);
  // One threshold unit: the hypothesis class of the target.
  MlpConfig cfg = small_config(64, 1, 1);
  cfg.dropout_rate = 0.0;
  cfg.learning_rate = 1e-3;
  cfg.max_iterations = 100'000;
  auto model = build_mlp<float>(cfg);
  train_mlp<float>(model, train);
  EXPECT_GE(accuracy<float>(model, test), 0.99);
}

TEST(Train, DeterministicPerSeed) {
  const MatD x = random_spins(8, 300, 9);
  const VecD y = random_labels(300, 10);
  MlpConfig cfg = small_config(8, 2, 16);
  cfg.max_iterations = 300;
  cfg.checkpoint_every = 100;
  auto a = build_mlp<double>(cfg), b = build_mlp<double>(cfg);
  const auto ta = train_mlp<double>(a, x, y), tb = train_mlp<double>(b, x, y);
  EXPECT_EQ(a.weights.back(), b.weights.back());
  EXPECT_EQ(ta.to_csv(), tb.to_csv());
}

TEST(Train, RejectsEmptyOrBadLabels) {
  auto model = build_mlp<double>(small_config(4, 1, 4));
  EXPECT_THROW(train_mlp<double>(model, MatD(4, 0), VecD(0)), InvalidParameter);
  VecD y = VecD::Constant(3, 2.0);
  EXPECT_THROW(train_mlp<double>(model, random_spins(4, 3, 1), y), InvalidParameter);
  EXPECT_THROW(train_mlp<double>(model, CrpDataset{}), InvalidParameter);
}

TEST(Train, NonFiniteLossIsDivergence) {
  MlpConfig cfg = small_config(4, 1, 4);
  cfg.max_iterations = 10;
  auto model = build_mlp<double>(cfg);
  model.weights[0](0, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    train_mlp<double>(model, random_spins(4, 16, 1), random_labels(16, 2));
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.iteration(), 1u);
  }
}

TEST(TraceCsv, HeaderAndRows) {
  TrainTrace t;
  t.checkpoints = {{1000, 0.5, 0.75}, {2000, 0.25, 0.875}};
  const std::string csv = t.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "iteration,loss,accuracy");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST(Accuracy, ComplementAndPermutation) {
  const auto model = build_mlp<double>(small_config(12, 2, 16));
  const MatD x = random_spins(12, 501, 4);
  const VecD y = random_labels(501, 5);
  const double acc = accuracy<double>(model, x, y);
  const VecD flipped = (1.0 - y.array()).matrix();
  EXPECT_DOUBLE_EQ(accuracy<double>(model, x, flipped), 1.0 - acc);

  std::vector<Eigen::Index> perm(501);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(6));
  MatD xp(12, 501);
  VecD yp(501);
  for (Eigen::Index c = 0; c < 501; ++c) {
    xp.col(c) = x.col(perm[static_cast<std::size_t>(c)]);
    yp[c] = y[perm[static_cast<std::size_t>(c)]];
  }
  EXPECT_EQ(accuracy<double>(model, xp, yp), acc);
}

TEST(Accuracy, ConstantPredictorOnBalancedSet) {
  auto model = build_mlp<double>(small_config(4, 1, 4), InitKind::Zero);  // P = 0.5 predicts 1
  const MatD x = random_spins(4, 10, 1);
  VecD y(10);
  for (Eigen::Index i = 0; i < 10; ++i) y[i] = i % 2;
  EXPECT_EQ(accuracy<double>(model, x, y), 0.5);
  EXPECT_THROW(accuracy<double>(model, MatD(4, 0), VecD(0)), InvalidParameter);
  EXPECT_THROW(accuracy<double>(model, CrpDataset{}), InvalidParameter);
}

TEST(Checkpoint, SaveLoadRoundTrip) {
  MlpConfig cfg = small_config(8, 2, 6);
  cfg.activation = Activation::Tanh;
  auto model = build_mlp<double>(cfg);
  model.trained_iterations = 1234;
  const auto path = std::filesystem::temp_directory_path() / "brpuf_test_model.json";
  save_model(model, path);
  const auto back = load_model<double>(path);
  EXPECT_EQ(back.config, model.config);
  EXPECT_EQ(back.trained_iterations, 1234u);
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    EXPECT_EQ(back.weights[l], model.weights[l]);
    EXPECT_EQ(back.biases[l], model.biases[l]);
  }
  std::filesystem::remove(path);
}

TEST(Config, JsonRoundTripAndParsers) {
  MlpConfig cfg = small_config(32, 5, 77);
  cfg.optimizer = OptimizerKind::Sgd;
  EXPECT_EQ(mlp_config_from_json(to_json(cfg)), cfg);
  EXPECT_EQ(parse_activation("tanh"), Activation::Tanh);
  EXPECT_THROW(parse_optimizer("rmsprop"), InvalidParameter);
}

TEST(Optimizer, AdamBeatsPlainGradientDescentOnXorPuf) {
  const CrpDataset ds = puf_dataset(64, 4, 40'000, 77);
  const auto [train, unused] = split_dataset(ds, 20'000, 0, 1);
  const Eigen::MatrixXf x = train.features<float>().transpose();
  const Eigen::VectorXf y = train.labels<float>();
  MlpConfig cfg = small_config(64, 4, 128);
  cfg.learning_rate = 1e-4;
  cfg.max_iterations = 20'000;
  cfg.checkpoint_every = 20'000;
  cfg.stop_window = 2;
  auto adam = build_mlp<float>(cfg);
  cfg.optimizer = OptimizerKind::Sgd;
  auto sgd = build_mlp<float>(cfg);
  const TrainTrace ta = train_mlp<float>(adam, x, y);
  const TrainTrace ts = train_mlp<float>(sgd, x, y);
  EXPECT_LE(ta.checkpoints.back().loss, ts.checkpoints.back().loss);
}
