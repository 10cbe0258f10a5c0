#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "brpuf/crp.hpp"
#include "brpuf/mlp.hpp"
#include "brpuf/puf.hpp"

namespace brpuf {

struct PufSpec {
  XorKind kind = XorKind::XorBr;
  std::size_t m = 64;
  std::size_t k = 4;
  std::size_t chips = 3;
  /// Explicit chip seeds; empty means derived from the master seed.
  std::vector<std::uint64_t> chip_seeds;
  std::string obfuscation = "none";  ///< none | mask | shuffle
};

struct DatasetSpec {
  std::vector<std::size_t> train_sizes{20'000};
  std::size_t test_size = 20'000;
  std::size_t validation_size = 2'000;  ///< only used by an SVM grid search
  unsigned lfsr_width = 64;
  std::uint64_t lfsr_taps = GaloisLfsr::kDefaultTaps;
  unsigned iterations = 3;
  std::optional<double> sigma;  ///< nullopt = calibrate to noise_target
  double noise_target = 0.02;
  double convergence_target = 0.8;
  std::size_t calibration_size = 10'000;
  std::size_t characterize_size = 100'000;
};

struct MlpAttacker {
  std::string name;
  MlpConfig config;
};

struct SvmSpec {
  bool enabled = false;
  std::vector<int> degrees{4};
  std::vector<double> Cs{1.0};
  std::size_t cap = 10'000;
  double tolerance = 1e-3;
};

struct LdaSpec {
  bool enabled = false;
  std::size_t samples = 100'000;
  int bins = 64;
  double ridge = 1e-6;
};

struct SweepSpec {
  std::vector<std::size_t> layers{1, 4, 8};
  std::vector<std::size_t> neurons{64, 128, 256, 512};
  std::vector<std::size_t> full_layers{1, 4, 8, 12};
  std::vector<std::size_t> full_neurons{64, 128, 256, 512, 1024, 2048};
  std::size_t train_size = 20'000;
  bool full_grid = false;
};

/// Everything one experiment needs. The master seed determines every derived
/// seed (chips, LFSR states, noise, splits, weight init, dropout).
struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::filesystem::path out = "results";
  PufSpec puf;
  DatasetSpec dataset;
  MlpConfig mlp;  ///< base network: the sweep template and the default attacker
  std::vector<MlpAttacker> attackers;
  SvmSpec svm;
  LdaSpec lda;
  SweepSpec sweep;

  /// Throws InvalidParameter when a size or option violates a module precondition.
  void validate() const;
  std::uint64_t chip_seed(std::size_t chip) const;
};

/// INI text: `key = value` lines under `[section]` headers; whole-line
/// comments start with ';' or '#'. Syntax errors raise ParseError, bad or
/// unknown keys InvalidParameter.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical, fully resolved form; equal configs serialize identically.
nlohmann::json to_json(const ExperimentConfig& cfg);
std::string hash_hex(const nlohmann::json& j);

}  // namespace brpuf
