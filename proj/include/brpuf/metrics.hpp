#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "brpuf/common.hpp"
#include "brpuf/obfuscation.hpp"
#include "brpuf/puf.hpp"

namespace brpuf {

/// Wrong responses relative to the per-challenge majority, over
/// iterations x challenges. Every challenge needs the same odd number of votes.
double noise_rate(std::span<const std::vector<std::uint8_t>> raw_evals);

/// Fraction of ones.
double bias(std::span<const std::uint8_t> responses);

/// Fraction of positions where two chips answered differently.
double inter_chip_nhd(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

struct InfluenceProfile {
  /// Row i: (Infl(i,0), Infl(i,1)).
  Eigen::MatrixX2d table;
  double max_value = 0.5;
  std::size_t max_bit = 0;
  int max_bit_value = 0;
};

/// Infl(i,v) = fraction of '1' responses among challenges whose bit i equals v.
/// The reported maximum is the entry farthest from 0.5.
InfluenceProfile influence_profile(std::span<const Challenge> challenges, std::span<const std::uint8_t> responses);

double convergence_rate(std::span<const EvalOutcome> outcomes);

struct MetricsReport {
  std::string puf_kind;
  std::size_t m = 0;
  std::size_t k = 0;
  std::size_t challenges = 0;
  double noise = 0.0;
  double bias = 0.0;  ///< mean over chips
  std::vector<double> chip_bias;
  double convergence_rate = 0.0;  ///< mean over chips
  double convergence_target = 0.0;
  double theta = 0.0;
  double sigma = 0.0;
  std::map<std::string, double> nhd;  ///< "i-j" -> NHD of chips i and j
  Eigen::MatrixX2d influence;         ///< chip 0
  double max_influence = 0.5;
  std::size_t max_influence_bit = 0;
};

nlohmann::json to_json(const MetricsReport& r);
/// Plain-text table with the characterization rows (convergence, noise, bias
/// per chip, NHD, max influence).
std::string render_table(const MetricsReport& r);

/// Smallest noise sigma whose measured single-evaluation error rate reaches
/// `target_noise` (majority-referenced, converged challenges only).
double calibrate_sigma(const XorPuf& puf, const Obfuscation& obf, double theta, double target_noise,
                       std::span<const Challenge> sample, unsigned iterations, std::uint64_t seed);

/// Noise rate measured over the converged challenges of a repeated evaluation.
double measured_noise(const std::vector<std::vector<EvalOutcome>>& evals);

}  // namespace brpuf
