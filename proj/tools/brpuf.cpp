// Command-line front end: instance generation, characterization, attacks,
// the scalability sweep, LDA analysis and report re-rendering.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "brpuf/config.hpp"
#include "brpuf/experiment.hpp"
#include "brpuf/metrics.hpp"

namespace fs = std::filesystem;
using namespace brpuf;

namespace {

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "table";
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_config = true) {
  auto* opt = cmd->add_option("--config", args.config, "experiment config (INI)");
  if (needs_config) opt->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", args.seed, "master seed (overrides [run] seed)");
  cmd->add_option("--out", args.out, "output directory (overrides [run] out)");
  cmd->add_option("--format", args.format, "stdout format")->check(CLI::IsMember({"json", "table", "csv"}));
  cmd->add_flag("-q,--quiet", args.quiet, "suppress progress on stderr");
}

ExperimentConfig resolve(const CommonArgs& args) {
  ExperimentConfig cfg = load_config(args.config);
  if (args.seed) cfg.seed = *args.seed;
  if (!args.out.empty()) cfg.out = args.out;
  return cfg;
}

std::string metrics_csv(const MetricsReport& r) {
  std::string out = "metric,value\n";
  const auto row = [&](const std::string& k, double v) { out += k + "," + format_double(v) + "\n"; };
  row("convergence_rate", r.convergence_rate);
  row("noise", r.noise);
  row("bias", r.bias);
  for (std::size_t c = 0; c < r.chip_bias.size(); ++c) row("bias_chip" + std::to_string(c), r.chip_bias[c]);
  for (const auto& [pair, v] : r.nhd) row("nhd_" + pair, v);
  row("max_influence", r.max_influence);
  row("max_influence_bit", static_cast<double>(r.max_influence_bit));
  row("theta", r.theta);
  row("sigma", r.sigma);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bistable-ring PUF simulator and modeling-attack workbench"};
  app.require_subcommand(1);

  CommonArgs gen_args, char_args, attack_args, sweep_args, lda_args;
  std::size_t gen_crps = 0;
  bool full_grid = false;
  std::string report_input, report_format = "table";

  auto* gen = app.add_subcommand("generate", "create chip instances and collect CRP files");
  add_common(gen, gen_args);
  gen->add_option("--crps", gen_crps, "CRPs per chip (default: largest train size + test size)");

  auto* characterize = app.add_subcommand("characterize", "quality metrics over a shared challenge list");
  add_common(characterize, char_args);

  auto* attack = app.add_subcommand("attack", "train and evaluate every configured attacker");
  add_common(attack, attack_args);

  auto* sweep = app.add_subcommand("sweep", "layers x neurons scalability grid");
  add_common(sweep, sweep_args);
  sweep->add_flag("--full-grid", full_grid, "use the full layers/neurons grid");

  auto* lda = app.add_subcommand("lda", "LDA separability of collected CRPs");
  add_common(lda, lda_args);

  auto* report = app.add_subcommand("report", "re-render a saved report");
  report->add_option("report", report_input, "report JSON file")->required()->check(CLI::ExistingFile);
  report->add_option("--format", report_format, "output format")->check(CLI::IsMember({"json", "table", "csv"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen) {
      const ExperimentConfig cfg = resolve(gen_args);
      std::size_t crps = gen_crps;
      if (crps == 0) {
        for (auto t : cfg.dataset.train_sizes) crps = std::max(crps, t);
        crps += cfg.dataset.test_size;
      }
      run_generate(cfg, crps, cfg.out, gen_args.quiet ? nullptr : &std::cerr);
      return 0;
    }
    if (*characterize) {
      const ExperimentConfig cfg = resolve(char_args);
      const MetricsReport m = run_characterization(cfg, char_args.quiet ? nullptr : &std::cerr);
      fs::create_directories(cfg.out);
      nlohmann::json j = to_json(m);
      j["config"] = to_json(cfg);
      std::ofstream(cfg.out / "metrics.json") << j.dump(2) << '\n';
      if (char_args.format == "json")
        std::cout << j.dump(2) << '\n';
      else if (char_args.format == "csv")
        std::cout << metrics_csv(m);
      else
        std::cout << render_table(m);
      return 0;
    }
    if (*report) {
      std::cout << emit_report(read_report(report_input), parse_report_format(report_format));
      return 0;
    }

    const CommonArgs& args = *attack ? attack_args : *sweep ? sweep_args : lda_args;
    ExperimentConfig cfg = resolve(args);
    RunOptions opts;
    opts.log = args.quiet ? nullptr : &std::cerr;
    ExperimentReport rep;
    if (*attack) {
      opts.report_path = cfg.out / "attack_report.json";
      rep = run_attack_experiment(cfg, opts);
    } else if (*sweep) {
      if (full_grid) cfg.sweep.full_grid = true;
      opts.report_path = cfg.out / "sweep_report.json";
      rep = run_scalability_sweep(cfg, opts);
    } else {
      opts.report_path = cfg.out / "lda_report.json";
      rep = run_lda_analysis(cfg, opts);
    }
    std::cout << emit_report(rep, parse_report_format(args.format));
    if (opts.log) *opts.log << "report written to " << opts.report_path.string() << '\n';
    bool failed = false;
    for (const auto& c : rep.cells) failed |= c.status != "ok";
    return failed ? 3 : 0;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
