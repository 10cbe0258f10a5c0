#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "brpuf/common.hpp"

namespace brpuf {

class CrpDataset;

enum class Activation { Relu, Tanh };
enum class OptimizerKind { Adam, Sgd };

std::string to_string(Activation a);
std::string to_string(OptimizerKind o);
Activation parse_activation(const std::string& s);
OptimizerKind parse_optimizer(const std::string& s);

/// Topology and training regimen of a fully connected attack network:
/// `layers` hidden layers of `hidden` units, dropout before a two-logit head.
struct MlpConfig {
  std::size_t m = 64;
  std::size_t layers = 4;
  std::size_t hidden = 256;
  double dropout_rate = 0.2;
  double learning_rate = 1e-4;
  std::size_t batch_size = 256;
  std::uint64_t max_iterations = 1'000'000;
  /// Fresh-seed reruns granted to an experiment cell whose run ends at
  /// max_iterations without a plateau. train_mlp itself never restarts.
  std::size_t restarts = 1;
  std::size_t checkpoint_every = 1000;
  std::size_t stop_window = 5;
  int stop_digits = 4;
  std::uint64_t seed = 0;
  Activation activation = Activation::Relu;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  /// Throws InvalidParameter on an unusable configuration.
  void validate() const;
  friend bool operator==(const MlpConfig&, const MlpConfig&) = default;
};

nlohmann::json to_json(const MlpConfig& cfg);
MlpConfig mlp_config_from_json(const nlohmann::json& j);

/// Weight-matrix elements: m*K + (N-1)*K^2 + 2*K. Biases are not included.
std::uint64_t count_weights(const MlpConfig& cfg);
/// Bias elements: N*K + 2.
std::uint64_t count_biases(const MlpConfig& cfg);

enum class StopReason { Plateau, MaxIterations };
std::string to_string(StopReason r);

struct TrainCheckpoint {
  std::uint64_t iteration = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

struct TrainTrace {
  std::vector<TrainCheckpoint> checkpoints;
  StopReason stop_reason = StopReason::MaxIterations;

  std::uint64_t iterations() const { return checkpoints.empty() ? 0 : checkpoints.back().iteration; }
  std::string to_csv() const;
};

template <typename Scalar>
struct Mlp {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  MlpConfig config;
  /// weights[l] maps layer l's input to its output (rows = outputs). The last
  /// entry is the 2 x K output head.
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  std::uint64_t trained_iterations = 0;

  std::uint64_t weight_count() const {
    std::uint64_t n = 0;
    for (const auto& w : weights) n += static_cast<std::uint64_t>(w.size());
    return n;
  }
  std::uint64_t bias_count() const {
    std::uint64_t n = 0;
    for (const auto& b : biases) n += static_cast<std::uint64_t>(b.size());
    return n;
  }

  template <typename Other>
  Mlp<Other> cast() const {
    Mlp<Other> out;
    out.config = config;
    out.trained_iterations = trained_iterations;
    for (const auto& w : weights) out.weights.push_back(w.template cast<Other>());
    for (const auto& b : biases) out.biases.push_back(b.template cast<Other>());
    return out;
  }
};

enum class InitKind { VarianceScaled, Zero };

/// Variance-scaled normal init (std = sqrt(2 / fan_in)), zero biases;
/// deterministic per config seed and identical for every Scalar.
template <typename Scalar>
Mlp<Scalar> build_mlp(const MlpConfig& cfg, InitKind init = InitKind::VarianceScaled);

/// Gradients laid out like the model parameters.
template <typename Scalar>
struct MlpGradients {
  std::vector<typename Mlp<Scalar>::Matrix> weights;
  std::vector<typename Mlp<Scalar>::Vector> biases;
};

/// Inputs are column-per-sample (m x batch), ±1 encoded. Dropout masks are
/// drawn from `rng` only when `dropout_rng` is non-null (train mode).
template <typename Scalar>
Eigen::Matrix<Scalar, 2, Eigen::Dynamic> logits(const Mlp<Scalar>& model,
                                                const Eigen::Ref<const typename Mlp<Scalar>::Matrix>& x,
                                                std::mt19937_64* dropout_rng = nullptr);

/// P(t=1|x) per column. Eval mode unless `dropout_rng` is given.
template <typename Scalar>
Eigen::Matrix<Scalar, 1, Eigen::Dynamic> forward(const Mlp<Scalar>& model,
                                                 const Eigen::Ref<const typename Mlp<Scalar>::Matrix>& x,
                                                 std::mt19937_64* dropout_rng = nullptr);

/// Row 0: P(t=0|x), row 1: P(t=1|x).
template <typename Scalar>
Eigen::Matrix<Scalar, 2, Eigen::Dynamic> class_probabilities(const Mlp<Scalar>& model,
                                                             const Eigen::Ref<const typename Mlp<Scalar>::Matrix>& x);

/// Mean cross-entropy over the batch and its gradient. `y` holds 0/1 labels.
/// A non-null `dropout_rng` selects train mode.
template <typename Scalar>
Scalar loss_and_gradients(const Mlp<Scalar>& model, const Eigen::Ref<const typename Mlp<Scalar>::Matrix>& x,
                          const Eigen::Ref<const typename Mlp<Scalar>::Vector>& y, MlpGradients<Scalar>* grads,
                          std::mt19937_64* dropout_rng = nullptr);

/// Mean cross-entropy in eval mode.
template <typename Scalar>
Scalar mean_loss(const Mlp<Scalar>& model, const Eigen::Ref<const typename Mlp<Scalar>::Matrix>& x,
                 const Eigen::Ref<const typename Mlp<Scalar>::Vector>& y);

/// Fraction correct with P(t=1|x) >= 0.5 predicting 1.
template <typename Scalar>
double accuracy(const Mlp<Scalar>& model, const Eigen::Ref<const typename Mlp<Scalar>::Matrix>& x,
                const Eigen::Ref<const typename Mlp<Scalar>::Vector>& y);

/// Mini-batch training with the configured optimizer. One iteration is one
/// mini-batch update. Stops when the full-training-set accuracy, rounded to
/// `stop_digits` decimals, is equal at `stop_window` consecutive checkpoints,
/// or at `max_iterations`. Throws DivergenceError on a non-finite loss.
template <typename Scalar>
TrainTrace train_mlp(Mlp<Scalar>& model, const Eigen::Ref<const typename Mlp<Scalar>::Matrix>& x,
                     const Eigen::Ref<const typename Mlp<Scalar>::Vector>& y);

// CRP-dataset conveniences: features are transposed to column-per-sample.
template <typename Scalar>
TrainTrace train_mlp(Mlp<Scalar>& model, const CrpDataset& train);
template <typename Scalar>
double accuracy(const Mlp<Scalar>& model, const CrpDataset& test);

/// JSON checkpoint: format version, config, trained iterations, parameters.
template <typename Scalar>
void save_model(const Mlp<Scalar>& model, const std::filesystem::path& path);
template <typename Scalar>
Mlp<Scalar> load_model(const std::filesystem::path& path);

extern template struct Mlp<float>;
extern template struct Mlp<double>;

}  // namespace brpuf
