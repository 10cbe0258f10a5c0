#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "brpuf/common.hpp"

namespace brpuf {

/// Pull-up/pull-down strength differences of a stage's top (t) and bottom (b) gate.
struct StageStrengths {
  double t = 0.0;
  double b = 0.0;
  friend bool operator==(const StageStrengths&, const StageStrengths&) = default;
};

/// Bistable ring PUF under the additive strength model:
///   alpha_i = (-1)^i (t_i + b_i) / 2,  beta_i = (-1)^i (t_i - b_i) / 2,
///   S(c) = sum_i (alpha_i + C_i beta_i),  C_i in {-1, +1}.
class BrPuf {
 public:
  /// Draws t_i, b_i i.i.d. standard normal. `m` must be even and >= 2.
  static BrPuf generate(std::size_t m, std::uint64_t seed);
  static BrPuf from_stages(std::vector<StageStrengths> stages, std::uint64_t seed = 0);

  std::size_t stages_count() const noexcept { return stages_.size(); }
  const std::vector<StageStrengths>& stages() const noexcept { return stages_; }
  const Eigen::VectorXd& alpha() const noexcept { return alpha_; }
  const Eigen::VectorXd& beta() const noexcept { return beta_; }
  std::uint64_t seed() const noexcept { return seed_; }

  /// Raw strength sum S(c) before noise and thresholding.
  double strength_sum(const Challenge& c) const;
  /// Sum with the alpha term dropped; differs from strength_sum by a constant.
  double beta_only_sum(const Challenge& c) const;

  friend bool operator==(const BrPuf& a, const BrPuf& b) {
    return a.seed_ == b.seed_ && a.stages_ == b.stages_;
  }

 private:
  BrPuf(std::vector<StageStrengths> stages, std::uint64_t seed);

  std::vector<StageStrengths> stages_;
  Eigen::VectorXd alpha_;
  Eigen::VectorXd beta_;
  double alpha_sum_ = 0.0;
  std::uint64_t seed_ = 0;
};

/// Twisted BR PUF: every gate stays in the ring and the challenge bit swaps the
/// odd/even position of the stage's two gates, giving S(c) = sum_i C_i w_i with
/// w_i = (-1)^i (t_i - b_i). There is no constant term.
class TbrPuf {
 public:
  static TbrPuf generate(std::size_t m, std::uint64_t seed);
  static TbrPuf from_stages(std::vector<StageStrengths> stages, std::uint64_t seed = 0);

  std::size_t stages_count() const noexcept { return stages_.size(); }
  const std::vector<StageStrengths>& stages() const noexcept { return stages_; }
  const Eigen::VectorXd& weights() const noexcept { return weights_; }
  std::uint64_t seed() const noexcept { return seed_; }

  double strength_sum(const Challenge& c) const;

  friend bool operator==(const TbrPuf& a, const TbrPuf& b) {
    return a.seed_ == b.seed_ && a.stages_ == b.stages_;
  }

 private:
  TbrPuf(std::vector<StageStrengths> stages, std::uint64_t seed);

  std::vector<StageStrengths> stages_;
  Eigen::VectorXd weights_;
  std::uint64_t seed_ = 0;
};

enum class XorKind { XorBr, XorTbr };

std::string to_string(XorKind kind);
XorKind parse_xor_kind(const std::string& s);

/// k constituents fed the same challenge, responses XORed.
class XorPuf {
 public:
  using Constituent = std::variant<BrPuf, TbrPuf>;

  XorPuf(XorKind kind, std::vector<Constituent> constituents);

  /// One constituent per seed.
  static XorPuf generate(XorKind kind, std::size_t m, std::span<const std::uint64_t> seeds);

  XorKind kind() const noexcept { return kind_; }
  std::size_t k() const noexcept { return constituents_.size(); }
  std::size_t stages_count() const noexcept { return m_; }
  const std::vector<Constituent>& constituents() const noexcept { return constituents_; }

  /// "br"/"tbr" for k = 1, "xor-br"/"xor-tbr" otherwise.
  std::string kind_label() const;

  /// Raw sum of constituent j.
  double strength_sum(std::size_t j, const Challenge& c) const;
  /// min_j |S_j(c)|: the quantity the convergence threshold is compared against.
  double min_abs_sum(const Challenge& c) const;

  friend bool operator==(const XorPuf&, const XorPuf&) = default;

 private:
  XorKind kind_;
  std::vector<Constituent> constituents_;
  std::size_t m_ = 0;
};

/// Converged(bit) or NonConverged.
class EvalOutcome {
 public:
  static EvalOutcome converged(int bit) { return EvalOutcome(static_cast<std::uint8_t>(bit & 1)); }
  static EvalOutcome non_converged() { return EvalOutcome(); }

  bool is_converged() const noexcept { return bit_.has_value(); }
  /// Response bit; only valid when converged.
  int bit() const { return bit_.value(); }

  friend bool operator==(const EvalOutcome&, const EvalOutcome&) = default;

 private:
  EvalOutcome() = default;
  explicit EvalOutcome(std::uint8_t bit) : bit_(bit) {}
  std::optional<std::uint8_t> bit_;
};

struct NoiseModel {
  double sigma = 0.0;
  std::uint64_t rng_seed = 0;
};

/// Gaussian perturbation stream. Bulk evaluation opens one substream per
/// challenge index so results do not depend on evaluation order.
class NoiseStream {
 public:
  explicit NoiseStream(const NoiseModel& model, std::uint64_t substream = 0);

  double sigma() const noexcept { return sigma_; }
  /// Next perturbation; always 0 when sigma is 0 (no state consumed).
  double draw();

 private:
  double sigma_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_;
};

/// Converts a perturbed sum into an outcome: |S| < theta or S == 0 is
/// NonConverged, otherwise the sign gives the response bit.
EvalOutcome classify_sum(double s, double theta);

EvalOutcome evaluate(const BrPuf& puf, const Challenge& c, double theta);
EvalOutcome evaluate(const BrPuf& puf, const Challenge& c, double theta, NoiseStream& noise);
EvalOutcome evaluate(const TbrPuf& puf, const Challenge& c, double theta);
EvalOutcome evaluate(const TbrPuf& puf, const Challenge& c, double theta, NoiseStream& noise);
EvalOutcome evaluate(const XorPuf& puf, const Challenge& c, double theta);
EvalOutcome evaluate(const XorPuf& puf, const Challenge& c, double theta, NoiseStream& noise);

/// Largest threshold at which at least `target_rate` of the sample still has
/// every constituent |S| >= theta. A target of 1 is the threshold-free case and
/// yields 0. Noise is not applied.
double calibrate_threshold(const XorPuf& puf, double target_rate, std::span<const Challenge> sample);

/// Fraction of the sample with min_j |S_j| >= theta (noise-free).
double noiseless_convergence_rate(const XorPuf& puf, double theta, std::span<const Challenge> sample);

nlohmann::json to_json(const XorPuf& puf);
XorPuf xor_puf_from_json(const nlohmann::json& j);

}  // namespace brpuf
