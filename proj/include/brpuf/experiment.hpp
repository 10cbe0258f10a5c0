#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "brpuf/config.hpp"
#include "brpuf/crp.hpp"
#include "brpuf/metrics.hpp"
#include "brpuf/obfuscation.hpp"
#include "brpuf/puf.hpp"

namespace brpuf {

/// One simulated chip: instance, obfuscation, calibrated threshold and noise,
/// and the converged CRPs collected from it.
struct Chip {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  XorPuf puf;
  Obfuscation obfuscation;
  double theta = 0.0;
  double sigma = 0.0;
  std::size_t challenges = 0;  ///< LFSR challenges applied to collect `data`
  CrpDataset data;
};

/// Builds chip `index` and collects at least `crps` converged records.
Chip prepare_chip(const ExperimentConfig& cfg, std::size_t index, std::size_t crps);

struct ReportCell {
  std::size_t train_size = 0;
  std::string attacker;
  std::size_t chip = 0;
  std::size_t layers = 0;  ///< network cells only
  std::size_t hidden = 0;
  std::optional<double> accuracy;
  double training_time = 0.0;  ///< wall-clock seconds
  std::uint64_t iterations_to_stop = 0;
  std::string stop_reason;
  std::string config_hash;
  std::string status = "ok";  ///< ok | error
  std::string error;
};

struct ChipSummary {
  std::size_t chip = 0;
  std::uint64_t seed = 0;
  double theta = 0.0;
  double sigma = 0.0;
  double convergence_rate = 0.0;
  std::size_t crps = 0;
};

struct LdaSummary {
  std::size_t chip = 0;
  std::size_t samples = 0;
  double overlap_coefficient = 0.0;
  double dprime = 0.0;
};

struct ExperimentReport {
  static constexpr int kSchemaVersion = 1;
  std::string kind;  ///< attack | sweep | lda
  std::uint64_t master_seed = 0;
  nlohmann::json config;
  std::string config_hash;
  std::vector<ChipSummary> chips;
  std::vector<ReportCell> cells;
  std::vector<LdaSummary> lda;
  std::optional<std::size_t> winner;  ///< index into cells (sweep only)
  nlohmann::json environment;
};

nlohmann::json to_json(const ExperimentReport& r);
ExperimentReport report_from_json(const nlohmann::json& j);
/// The report minus wall-clock timings and the environment stamp; equal for
/// two runs of one config and seed.
nlohmann::json report_body(const ExperimentReport& r);

enum class ReportFormat { Json, Table, Csv };
ReportFormat parse_report_format(const std::string& s);
std::string emit_report(const ExperimentReport& r, ReportFormat format);
/// Writes through a temporary file and a rename.
void write_report(const ExperimentReport& r, const std::filesystem::path& path);
ExperimentReport read_report(const std::filesystem::path& path);

/// Best accuracy; ties go to the shorter training time, then the lower index.
std::optional<std::size_t> select_winner(const std::vector<ReportCell>& cells);

struct RunOptions {
  std::ostream* log = nullptr;
  /// Report path rewritten after every cell; empty disables writing.
  std::filesystem::path report_path;
};

/// Every (chip, train size, attacker) cell. Cell failures are recorded with
/// status "error" and never abort the run.
ExperimentReport run_attack_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});
/// Every (layers, neurons) network on chip 0 at the sweep train size.
ExperimentReport run_scalability_sweep(const ExperimentConfig& cfg, const RunOptions& opts = {});
/// LDA separability of every chip's CRPs.
ExperimentReport run_lda_analysis(const ExperimentConfig& cfg, const RunOptions& opts = {});
/// Metrics over one shared LFSR challenge list applied to every chip.
MetricsReport run_characterization(const ExperimentConfig& cfg, std::ostream* log = nullptr);

/// Writes puf.json, obfuscation.json, crps.csv and crps.bin per chip under `dir`.
void run_generate(const ExperimentConfig& cfg, std::size_t crps, const std::filesystem::path& dir,
                  std::ostream* log = nullptr);

}  // namespace brpuf
