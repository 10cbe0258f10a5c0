#include "brpuf/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include <Eigen/Core>

#include "brpuf/lda.hpp"
#include "brpuf/mlp.hpp"
#include "brpuf/svm.hpp"

namespace brpuf {

namespace {

using Clock = std::chrono::steady_clock;

std::uint64_t lfsr_state(std::uint64_t seed, std::string_view label, unsigned width) {
  const std::uint64_t mask = width >= 64 ? ~0ull : (1ull << width) - 1;
  const std::uint64_t s = derive_seed(seed, label) & mask;
  return s ? s : 1;
}

struct ChipModel {
  std::uint64_t seed;
  XorPuf puf;
  Obfuscation obf;
  double theta;
  double sigma;
};

ChipModel build_chip(const ExperimentConfig& cfg, std::size_t index) {
  const std::uint64_t seed = cfg.chip_seed(index);
  std::vector<std::uint64_t> seeds(cfg.puf.k);
  for (std::size_t j = 0; j < seeds.size(); ++j) seeds[j] = derive_seed(seed, "constituent", j);
  XorPuf puf = XorPuf::generate(cfg.puf.kind, cfg.puf.m, seeds);
  Obfuscation obf = make_obfuscation(cfg.puf.obfuscation, cfg.puf.m, derive_seed(seed, "obfuscation"));

  const auto& ds = cfg.dataset;
  GaloisLfsr cal(ds.lfsr_width, ds.lfsr_taps, lfsr_state(seed, "calibration", ds.lfsr_width));
  const std::vector<Challenge> raw = lfsr_generate(cal, ds.calibration_size, cfg.puf.m);
  std::vector<Challenge> applied;
  applied.reserve(raw.size());
  for (const auto& c : raw) applied.push_back(brpuf::apply(obf, c));
  const double theta = calibrate_threshold(puf, ds.convergence_target, applied);

  double sigma = 0.0;
  if (ds.sigma)
    sigma = *ds.sigma;
  else
    sigma = calibrate_sigma(puf, obf, theta, ds.noise_target, raw, ds.iterations, derive_seed(seed, "sigma"));
  return {seed, std::move(puf), std::move(obf), theta, sigma};
}

std::string error_text(const std::exception& e) {
  const char* tag = "error";
  if (dynamic_cast<const SizeError*>(&e))
    tag = "size error";
  else if (dynamic_cast<const InvalidParameter*>(&e))
    tag = "invalid parameter";
  else if (dynamic_cast<const DimensionError*>(&e))
    tag = "dimension error";
  else if (dynamic_cast<const DivergenceError*>(&e))
    tag = "divergence";
  else if (dynamic_cast<const OptimizerError*>(&e))
    tag = "optimizer error";
  else if (dynamic_cast<const NumericalError*>(&e))
    tag = "numerical error";
  else if (dynamic_cast<const GenerationError*>(&e))
    tag = "generation error";
  return std::string(tag) + ": " + e.what();
}

nlohmann::json environment_stamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream ts;
  ts << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  std::ostringstream eigen;
  eigen << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION;
  return {{"generated_at", ts.str()},
          {"compiler", __VERSION__},
          {"eigen", eigen.str()},
          {"simd", Eigen::SimdInstructionSetsInUse()}};
}

ExperimentReport new_report(const ExperimentConfig& cfg, std::string kind) {
  ExperimentReport r;
  r.kind = std::move(kind);
  r.master_seed = cfg.seed;
  r.config = to_json(cfg);
  r.config_hash = hash_hex(r.config);
  r.environment = environment_stamp();
  return r;
}

ChipSummary summarize(const Chip& chip) {
  return {chip.index, chip.seed, chip.theta, chip.sigma,
          static_cast<double>(chip.data.size()) / static_cast<double>(chip.challenges), chip.data.size()};
}

void flush(const ExperimentReport& r, const RunOptions& opts) {
  if (!opts.report_path.empty()) write_report(r, opts.report_path);
}

std::string cell_hash(const ExperimentReport& r, const ReportCell& c, const nlohmann::json& attacker) {
  return hash_hex({{"config", r.config_hash},
                   {"chip", c.chip},
                   {"train_size", c.train_size},
                   {"attacker", c.attacker},
                   {"attacker_config", attacker}});
}

// Nested training subsets: the first `size` records of one fixed shuffle.
CrpDataset training_slice(const CrpDataset& pool, std::size_t size, std::uint64_t seed) {
  if (size == 0) throw SizeError("training split of 0 records");
  return split_dataset(pool, size, 0, seed).first;
}

// A run that exhausts max_iterations without a plateau is retrained from a
// fresh initialization, up to mc.restarts times. Time and iterations cover
// every attempt; the last attempt's model is evaluated.
void run_mlp_cell(ReportCell& cell, MlpConfig mc, const CrpDataset& train, const CrpDataset& test) {
  const std::uint64_t base_seed = mc.seed;
  const auto t0 = Clock::now();
  std::uint64_t iterations = 0;
  for (std::size_t attempt = 0;; ++attempt) {
    mc.seed = attempt == 0 ? base_seed : derive_seed(base_seed, "restart", attempt);
    Mlp<float> model = build_mlp<float>(mc);
    const TrainTrace trace = train_mlp<float>(model, train);
    iterations += trace.iterations();
    if (trace.stop_reason == StopReason::Plateau || attempt == mc.restarts) {
      cell.training_time = std::chrono::duration<double>(Clock::now() - t0).count();
      cell.iterations_to_stop = iterations;
      cell.stop_reason = to_string(trace.stop_reason);
      if (attempt > 0) cell.stop_reason += " after " + std::to_string(attempt) + " restart" + (attempt > 1 ? "s" : "");
      cell.accuracy = accuracy<float>(model, test);
      return;
    }
  }
}

void log_cell(const RunOptions& opts, const ReportCell& c) {
  if (!opts.log) return;
  *opts.log << "chip " << c.chip << "  train " << c.train_size << "  " << c.attacker << ": ";
  if (c.status == "ok")
    *opts.log << std::fixed << std::setprecision(4) << *c.accuracy << std::defaultfloat << "  (" << c.iterations_to_stop
              << " it, " << std::setprecision(3) << c.training_time << std::defaultfloat << " s)\n";
  else
    *opts.log << c.error << '\n';
  opts.log->flush();
}

std::string pct(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(1) << 100.0 * v;
  return s.str();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

std::string render_grid(const std::vector<std::string>& row_labels, const std::vector<std::string>& col_labels,
                        const std::string& corner, const std::map<std::pair<std::size_t, std::size_t>, std::string>& v) {
  std::size_t w0 = corner.size();
  for (const auto& r : row_labels) w0 = std::max(w0, r.size());
  std::vector<std::size_t> w;
  for (std::size_t c = 0; c < col_labels.size(); ++c) {
    std::size_t width = std::max<std::size_t>(col_labels[c].size(), 5);
    for (std::size_t r = 0; r < row_labels.size(); ++r)
      if (auto it = v.find({r, c}); it != v.end()) width = std::max(width, it->second.size());
    w.push_back(width);
  }
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(w0)) << corner;
  for (std::size_t c = 0; c < col_labels.size(); ++c)
    out << " | " << std::right << std::setw(static_cast<int>(w[c])) << col_labels[c];
  out << '\n' << std::string(w0, '-');
  for (std::size_t c = 0; c < col_labels.size(); ++c) out << "-+-" << std::string(w[c], '-');
  out << '\n';
  for (std::size_t r = 0; r < row_labels.size(); ++r) {
    out << std::left << std::setw(static_cast<int>(w0)) << row_labels[r];
    for (std::size_t c = 0; c < col_labels.size(); ++c) {
      const auto it = v.find({r, c});
      out << " | " << std::right << std::setw(static_cast<int>(w[c])) << (it == v.end() ? "-" : it->second);
    }
    out << '\n';
  }
  return out.str();
}

// Mean accuracy of the ok cells in a group, or "error" when none succeeded.
std::string mean_text(const std::vector<const ReportCell*>& group) {
  double sum = 0.0;
  std::size_t ok = 0;
  for (const auto* c : group)
    if (c->accuracy) {
      sum += *c->accuracy;
      ++ok;
    }
  if (ok == 0) return "error";
  std::string s = pct(sum / static_cast<double>(ok));
  if (ok < group.size()) s += "*";
  return s;
}

template <typename Key>
std::size_t index_of(std::vector<Key>& keys, const Key& k) {
  const auto it = std::find(keys.begin(), keys.end(), k);
  if (it != keys.end()) return static_cast<std::size_t>(it - keys.begin());
  keys.push_back(k);
  return keys.size() - 1;
}

std::string render_table(const ExperimentReport& r) {
  std::ostringstream out;
  out << r.kind << " report  seed " << r.master_seed << "  config " << r.config_hash << '\n';
  if (!r.chips.empty()) {
    for (const auto& c : r.chips)
      out << "chip " << c.chip << ": theta " << format_double(c.theta) << "  sigma " << format_double(c.sigma)
          << "  convergence " << pct(c.convergence_rate) << "%  crps " << c.crps << '\n';
  }

  if (r.kind == "lda") {
    std::vector<std::string> rows, cols{"samples", "overlap", "d'"};
    std::map<std::pair<std::size_t, std::size_t>, std::string> v;
    for (std::size_t i = 0; i < r.lda.size(); ++i) {
      rows.push_back("chip " + std::to_string(r.lda[i].chip));
      v[{i, 0}] = std::to_string(r.lda[i].samples);
      std::ostringstream a, b;
      a << std::fixed << std::setprecision(3) << r.lda[i].overlap_coefficient;
      b << std::fixed << std::setprecision(3) << r.lda[i].dprime;
      v[{i, 1}] = a.str();
      v[{i, 2}] = b.str();
    }
    out << render_grid(rows, cols, "", v);
    return out.str();
  }

  if (r.kind == "sweep") {
    std::vector<std::size_t> layers, neurons;
    std::map<std::pair<std::size_t, std::size_t>, std::vector<const ReportCell*>> groups;
    for (const auto& c : r.cells) groups[{index_of(layers, c.layers), index_of(neurons, c.hidden)}].push_back(&c);
    std::vector<std::string> rows, cols;
    for (auto l : layers) rows.push_back("N=" + std::to_string(l));
    for (auto k : neurons) cols.push_back("K=" + std::to_string(k));
    std::map<std::pair<std::size_t, std::size_t>, std::string> v;
    for (const auto& [key, group] : groups) v[key] = mean_text(group);
    out << "accuracy (%), train size " << (r.cells.empty() ? 0 : r.cells.front().train_size) << '\n';
    out << render_grid(rows, cols, "layers", v);
    if (r.winner) {
      const auto& w = r.cells[*r.winner];
      out << "best: N=" << w.layers << " K=" << w.hidden << "  accuracy " << pct(w.accuracy.value_or(0.0))
          << "%  time " << std::fixed << std::setprecision(1) << w.training_time << " s\n";
    }
    return out.str();
  }

  std::vector<std::size_t> sizes;
  std::vector<std::string> attackers;
  std::map<std::pair<std::size_t, std::size_t>, std::vector<const ReportCell*>> groups;
  for (const auto& c : r.cells) groups[{index_of(sizes, c.train_size), index_of(attackers, c.attacker)}].push_back(&c);
  std::vector<std::string> rows;
  for (auto s : sizes) rows.push_back(std::to_string(s));
  std::map<std::pair<std::size_t, std::size_t>, std::string> v;
  for (const auto& [key, group] : groups) v[key] = mean_text(group);
  out << "accuracy (%), mean over chips; * = some cells failed\n";
  out << render_grid(rows, attackers, "train size", v);
  return out.str();
}

std::string render_csv(const ExperimentReport& r) {
  std::ostringstream out;
  if (r.kind == "lda") {
    out << "chip,samples,overlap_coefficient,dprime\n";
    for (const auto& l : r.lda)
      out << l.chip << ',' << l.samples << ',' << format_double(l.overlap_coefficient) << ','
          << format_double(l.dprime) << '\n';
    return out.str();
  }
  out << "train_size,attacker,chip,layers,hidden,accuracy,training_time,iterations_to_stop,stop_reason,config_hash,"
         "status,error\n";
  for (const auto& c : r.cells) {
    out << c.train_size << ',' << csv_field(c.attacker) << ',' << c.chip << ',' << c.layers << ',' << c.hidden << ','
        << (c.accuracy ? format_double(*c.accuracy) : "") << ',' << format_double(c.training_time) << ','
        << c.iterations_to_stop << ',' << c.stop_reason << ',' << c.config_hash << ',' << c.status << ','
        << csv_field(c.error) << '\n';
  }
  return out.str();
}

nlohmann::json cell_json(const ReportCell& c) {
  return {{"train_size", c.train_size},
          {"attacker", c.attacker},
          {"chip", c.chip},
          {"layers", c.layers},
          {"hidden", c.hidden},
          {"accuracy", c.accuracy ? nlohmann::json(*c.accuracy) : nlohmann::json(nullptr)},
          {"training_time", c.training_time},
          {"iterations_to_stop", c.iterations_to_stop},
          {"stop_reason", c.stop_reason},
          {"config_hash", c.config_hash},
          {"status", c.status},
          {"error", c.error}};
}

}  // namespace

Chip prepare_chip(const ExperimentConfig& cfg, std::size_t index, std::size_t crps) {
  ChipModel cm = build_chip(cfg, index);
  const auto& ds = cfg.dataset;
  CollectOptions opts;
  opts.iterations = ds.iterations;
  opts.noise = NoiseModel{cm.sigma, derive_seed(cm.seed, "noise")};
  opts.theta = cm.theta;
  opts.chip_seed = cm.seed;
  opts.lfsr_taps = ds.lfsr_taps;
  opts.lfsr_seed = lfsr_state(cm.seed, "challenges", ds.lfsr_width);

  // Regenerate from the same LFSR state with a larger budget until enough
  // challenges converge; the result depends only on the final budget.
  std::size_t budget =
      static_cast<std::size_t>(std::ceil(static_cast<double>(std::max<std::size_t>(crps, 1)) / ds.convergence_target * 1.05)) + 64;
  for (int attempt = 0;; ++attempt) {
    GaloisLfsr lfsr(ds.lfsr_width, ds.lfsr_taps, opts.lfsr_seed);
    const auto challenges = lfsr_generate(lfsr, budget, cfg.puf.m);
    CrpDataset data = collect_crps(cm.puf, cm.obf, challenges, opts);
    if (data.size() >= crps)
      return Chip{index, cm.seed, std::move(cm.puf), std::move(cm.obf), cm.theta, cm.sigma, budget, std::move(data)};
    if (attempt >= 20 || data.empty())
      throw GenerationError("chip " + std::to_string(index) + " yielded only " + std::to_string(data.size()) +
                            " converged CRPs from " + std::to_string(budget) + " challenges");
    budget = static_cast<std::size_t>(std::ceil(static_cast<double>(budget) * static_cast<double>(crps) /
                                                static_cast<double>(data.size()) * 1.05)) + 64;
  }
}

ExperimentReport run_attack_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  ExperimentReport report = new_report(cfg, "attack");
  const auto& ds = cfg.dataset;
  const std::size_t max_train = *std::max_element(ds.train_sizes.begin(), ds.train_sizes.end());
  const bool svm_grid = cfg.svm.enabled && cfg.svm.degrees.size() * cfg.svm.Cs.size() > 1;
  const std::size_t pool_size = max_train + (svm_grid ? ds.validation_size : 0);

  std::vector<std::pair<std::string, nlohmann::json>> attacker_ids;
  for (const auto& a : cfg.attackers) attacker_ids.emplace_back(a.name, to_json(a.config));
  if (cfg.svm.enabled) {
    std::string name = "svm";
    if (!svm_grid) name += "-d" + std::to_string(cfg.svm.degrees.front());
    attacker_ids.emplace_back(name, nlohmann::json{{"degrees", cfg.svm.degrees},
                                                   {"c_values", cfg.svm.Cs},
                                                   {"cap", cfg.svm.cap},
                                                   {"tolerance", cfg.svm.tolerance}});
  }

  for (std::size_t c = 0; c < cfg.puf.chips; ++c) {
    const std::size_t first_cell = report.cells.size();
    for (std::size_t t : ds.train_sizes)
      for (const auto& [name, acfg] : attacker_ids) {
        ReportCell cell;
        cell.train_size = t;
        cell.attacker = name;
        cell.chip = c;
        const MlpConfig* mc = nullptr;
        for (const auto& a : cfg.attackers)
          if (a.name == name) mc = &a.config;
        if (mc) {
          cell.layers = mc->layers;
          cell.hidden = mc->hidden;
        }
        cell.config_hash = cell_hash(report, cell, acfg);
        report.cells.push_back(std::move(cell));
      }

    std::optional<Chip> chip;
    CrpDataset pool, test;
    try {
      chip = prepare_chip(cfg, c, pool_size + ds.test_size);
      std::tie(pool, test) = split_dataset(chip->data, pool_size, ds.test_size, derive_seed(chip->seed, "test-split"));
      report.chips.push_back(summarize(*chip));
      if (opts.log)
        *opts.log << "chip " << c << ": theta " << chip->theta << "  sigma " << chip->sigma << "  crps "
                  << chip->data.size() << '\n';
    } catch (const std::exception& e) {
      for (std::size_t i = first_cell; i < report.cells.size(); ++i) {
        report.cells[i].status = "error";
        report.cells[i].error = error_text(e);
        log_cell(opts, report.cells[i]);
      }
      flush(report, opts);
      continue;
    }

    for (std::size_t i = first_cell; i < report.cells.size(); ++i) {
      ReportCell& cell = report.cells[i];
      try {
        const MlpConfig* mc = nullptr;
        for (const auto& a : cfg.attackers)
          if (a.name == cell.attacker) mc = &a.config;
        if (mc) {
          const CrpDataset train = training_slice(pool, cell.train_size, derive_seed(chip->seed, "train-split"));
          MlpConfig run = *mc;
          run.seed = derive_seed(chip->seed, "mlp:" + cell.attacker, cell.train_size);
          run_mlp_cell(cell, run, train, test);
        } else {
          SvmOptions so;
          so.cap = cfg.svm.cap;
          so.tolerance = cfg.svm.tolerance;
          const auto t0 = Clock::now();
          SvmModel model;
          if (svm_grid) {
            if (cell.train_size == 0) throw SizeError("training split of 0 records");
            const auto [train, val] =
                split_dataset(pool, cell.train_size, ds.validation_size, derive_seed(chip->seed, "train-split"));
            model = grid_search_svm(train, val, cfg.svm.degrees, cfg.svm.Cs, so).model;
          } else {
            const CrpDataset train = training_slice(pool, cell.train_size, derive_seed(chip->seed, "train-split"));
            model = train_svm_poly(train, cfg.svm.degrees.front(), cfg.svm.Cs.front(), so);
          }
          cell.training_time = std::chrono::duration<double>(Clock::now() - t0).count();
          cell.iterations_to_stop = model.iterations;
          cell.stop_reason = "Converged";
          cell.accuracy = accuracy(model, test);
        }
      } catch (const std::exception& e) {
        cell.status = "error";
        cell.error = error_text(e);
        cell.accuracy.reset();
      }
      log_cell(opts, cell);
      flush(report, opts);
    }
  }
  flush(report, opts);
  return report;
}

ExperimentReport run_scalability_sweep(const ExperimentConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  ExperimentReport report = new_report(cfg, "sweep");
  const auto& layers = cfg.sweep.full_grid ? cfg.sweep.full_layers : cfg.sweep.layers;
  const auto& neurons = cfg.sweep.full_grid ? cfg.sweep.full_neurons : cfg.sweep.neurons;

  for (auto n : layers)
    for (auto k : neurons) {
      ReportCell cell;
      cell.train_size = cfg.sweep.train_size;
      cell.attacker = "N" + std::to_string(n) + "-K" + std::to_string(k);
      cell.layers = n;
      cell.hidden = k;
      MlpConfig mc = cfg.mlp;
      mc.layers = n;
      mc.hidden = k;
      cell.config_hash = cell_hash(report, cell, to_json(mc));
      report.cells.push_back(std::move(cell));
    }

  std::optional<Chip> chip;
  CrpDataset pool, test;
  try {
    chip = prepare_chip(cfg, 0, cfg.sweep.train_size + cfg.dataset.test_size);
    std::tie(pool, test) =
        split_dataset(chip->data, cfg.sweep.train_size, cfg.dataset.test_size, derive_seed(chip->seed, "test-split"));
    report.chips.push_back(summarize(*chip));
  } catch (const std::exception& e) {
    for (auto& cell : report.cells) {
      cell.status = "error";
      cell.error = error_text(e);
    }
    flush(report, opts);
    return report;
  }

  for (auto& cell : report.cells) {
    try {
      MlpConfig mc = cfg.mlp;
      mc.layers = cell.layers;
      mc.hidden = cell.hidden;
      mc.seed = derive_seed(chip->seed, "sweep:" + cell.attacker, cell.train_size);
      run_mlp_cell(cell, mc, training_slice(pool, cell.train_size, derive_seed(chip->seed, "train-split")), test);
    } catch (const std::exception& e) {
      cell.status = "error";
      cell.error = error_text(e);
      cell.accuracy.reset();
    }
    log_cell(opts, cell);
    report.winner = select_winner(report.cells);
    flush(report, opts);
  }
  report.winner = select_winner(report.cells);
  flush(report, opts);
  return report;
}

ExperimentReport run_lda_analysis(const ExperimentConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  ExperimentReport report = new_report(cfg, "lda");
  const LdaOptions lo{cfg.lda.ridge, cfg.lda.bins};
  for (std::size_t c = 0; c < cfg.puf.chips; ++c) {
    const Chip chip = prepare_chip(cfg, c, cfg.lda.samples);
    const CrpDataset sample = split_dataset(chip.data, cfg.lda.samples, 0, derive_seed(chip.seed, "lda-split")).first;
    const LdaResult res = fit_lda(sample, lo);
    report.chips.push_back(summarize(chip));
    report.lda.push_back({c, sample.size(), res.overlap_coefficient, res.dprime});
    if (opts.log)
      *opts.log << "chip " << c << ": overlap " << res.overlap_coefficient << "  d' " << res.dprime << '\n';
    flush(report, opts);
  }
  flush(report, opts);
  return report;
}

MetricsReport run_characterization(const ExperimentConfig& cfg, std::ostream* log) {
  cfg.validate();
  const auto& ds = cfg.dataset;
  GaloisLfsr lfsr(ds.lfsr_width, ds.lfsr_taps, lfsr_state(cfg.seed, "characterize", ds.lfsr_width));
  const std::vector<Challenge> challenges = lfsr_generate(lfsr, ds.characterize_size, cfg.puf.m);
  const std::size_t n = challenges.size();

  MetricsReport rep;
  rep.m = cfg.puf.m;
  rep.k = cfg.puf.k;
  rep.challenges = n;
  rep.convergence_target = ds.convergence_target;

  std::vector<std::vector<std::uint8_t>> converged(cfg.puf.chips), bits(cfg.puf.chips);
  double noise_sum = 0.0, conv_sum = 0.0;
  for (std::size_t c = 0; c < cfg.puf.chips; ++c) {
    const ChipModel cm = build_chip(cfg, c);
    if (c == 0) {
      rep.puf_kind = cm.puf.kind_label();
      rep.theta = cm.theta;
      rep.sigma = cm.sigma;
    }
    const auto evals =
        evaluate_repeated(cm.puf, cm.obf, challenges, ds.iterations, NoiseModel{cm.sigma, derive_seed(cm.seed, "noise")},
                          cm.theta);
    std::vector<EvalOutcome> flat;
    flat.reserve(n * ds.iterations);
    converged[c].assign(n, 0);
    bits[c].assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      bool ok = true;
      unsigned ones = 0;
      for (const auto& e : evals[i]) {
        flat.push_back(e);
        if (!e.is_converged())
          ok = false;
        else
          ones += static_cast<unsigned>(e.bit());
      }
      converged[c][i] = ok;
      bits[c][i] = 2 * ones > ds.iterations;
    }
    const double conv = convergence_rate(flat);
    const double noise = measured_noise(evals);
    conv_sum += conv;
    noise_sum += noise;

    std::vector<std::uint8_t> resp;
    std::vector<Challenge> chal;
    for (std::size_t i = 0; i < n; ++i)
      if (converged[c][i]) {
        resp.push_back(bits[c][i]);
        chal.push_back(challenges[i]);
      }
    rep.chip_bias.push_back(bias(resp));
    if (c == 0) {
      const InfluenceProfile infl = influence_profile(chal, resp);
      rep.influence = infl.table;
      rep.max_influence = infl.max_value;
      rep.max_influence_bit = infl.max_bit;
    }
    if (log)
      *log << "chip " << c << ": theta " << cm.theta << "  sigma " << cm.sigma << "  convergence " << conv
           << "  noise " << noise << "  bias " << rep.chip_bias.back() << '\n';
  }
  const double chips = static_cast<double>(cfg.puf.chips);
  rep.noise = noise_sum / chips;
  rep.convergence_rate = conv_sum / chips;
  double bsum = 0.0;
  for (double b : rep.chip_bias) bsum += b;
  rep.bias = bsum / chips;

  for (std::size_t a = 0; a < cfg.puf.chips; ++a)
    for (std::size_t b = a + 1; b < cfg.puf.chips; ++b) {
      std::vector<std::uint8_t> ra, rb;
      for (std::size_t i = 0; i < n; ++i)
        if (converged[a][i] && converged[b][i]) {
          ra.push_back(bits[a][i]);
          rb.push_back(bits[b][i]);
        }
      rep.nhd[std::to_string(a) + "-" + std::to_string(b)] = inter_chip_nhd(ra, rb);
    }
  return rep;
}

void run_generate(const ExperimentConfig& cfg, std::size_t crps, const std::filesystem::path& dir, std::ostream* log) {
  cfg.validate();
  for (std::size_t c = 0; c < cfg.puf.chips; ++c) {
    const Chip chip = prepare_chip(cfg, c, crps);
    const CrpDataset data = split_dataset(chip.data, crps, 0, derive_seed(chip.seed, "generate-split")).first;
    const auto sub = dir / ("chip" + std::to_string(c));
    std::filesystem::create_directories(sub);
    nlohmann::json inst = to_json(chip.puf);
    inst["chip"] = c;
    inst["chip_seed"] = chip.seed;
    inst["theta"] = chip.theta;
    inst["sigma"] = chip.sigma;
    std::ofstream(sub / "puf.json") << inst.dump(2) << '\n';
    std::ofstream(sub / "obfuscation.json") << to_json(chip.obfuscation).dump(2) << '\n';
    write_dataset(data, sub / "crps.csv");
    write_dataset_binary(data, sub / "crps.bin");
    if (log) *log << "chip " << c << ": " << data.size() << " CRPs -> " << sub.string() << '\n';
  }
}

std::optional<std::size_t> select_winner(const std::vector<ReportCell>& cells) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    if (!c.accuracy) continue;
    if (!best) {
      best = i;
      continue;
    }
    const auto& b = cells[*best];
    if (*c.accuracy > *b.accuracy || (*c.accuracy == *b.accuracy && c.training_time < b.training_time)) best = i;
  }
  return best;
}

nlohmann::json to_json(const ExperimentReport& r) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : r.cells) cells.push_back(cell_json(c));
  nlohmann::json chips = nlohmann::json::array();
  for (const auto& c : r.chips)
    chips.push_back({{"chip", c.chip},
                     {"seed", c.seed},
                     {"theta", c.theta},
                     {"sigma", c.sigma},
                     {"convergence_rate", c.convergence_rate},
                     {"crps", c.crps}});
  nlohmann::json lda = nlohmann::json::array();
  for (const auto& l : r.lda)
    lda.push_back({{"chip", l.chip},
                   {"samples", l.samples},
                   {"overlap_coefficient", l.overlap_coefficient},
                   {"dprime", l.dprime}});
  return {{"schema_version", ExperimentReport::kSchemaVersion},
          {"kind", r.kind},
          {"master_seed", r.master_seed},
          {"config", r.config},
          {"config_hash", r.config_hash},
          {"chips", chips},
          {"cells", cells},
          {"lda", lda},
          {"winner", r.winner ? nlohmann::json(*r.winner) : nlohmann::json(nullptr)},
          {"environment", r.environment}};
}

ExperimentReport report_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema_version").get<int>() != ExperimentReport::kSchemaVersion)
      throw InvalidParameter("unsupported report schema version");
    ExperimentReport r;
    r.kind = j.at("kind");
    r.master_seed = j.at("master_seed");
    r.config = j.at("config");
    r.config_hash = j.at("config_hash");
    for (const auto& c : j.at("chips"))
      r.chips.push_back({c.at("chip"), c.at("seed"), c.at("theta"), c.at("sigma"), c.at("convergence_rate"),
                         c.at("crps")});
    for (const auto& c : j.at("cells")) {
      ReportCell cell;
      cell.train_size = c.at("train_size");
      cell.attacker = c.at("attacker");
      cell.chip = c.at("chip");
      cell.layers = c.at("layers");
      cell.hidden = c.at("hidden");
      if (!c.at("accuracy").is_null()) cell.accuracy = c.at("accuracy").get<double>();
      cell.training_time = c.at("training_time");
      cell.iterations_to_stop = c.at("iterations_to_stop");
      cell.stop_reason = c.at("stop_reason");
      cell.config_hash = c.at("config_hash");
      cell.status = c.at("status");
      cell.error = c.at("error");
      r.cells.push_back(std::move(cell));
    }
    for (const auto& l : j.at("lda"))
      r.lda.push_back({l.at("chip"), l.at("samples"), l.at("overlap_coefficient"), l.at("dprime")});
    if (!j.at("winner").is_null()) r.winner = j.at("winner").get<std::size_t>();
    r.environment = j.at("environment");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidParameter(std::string("malformed report: ") + e.what());
  }
}

nlohmann::json report_body(const ExperimentReport& r) {
  nlohmann::json j = to_json(r);
  j.erase("environment");
  for (auto& c : j["cells"]) c.erase("training_time");
  return j;
}

ReportFormat parse_report_format(const std::string& s) {
  if (s == "json") return ReportFormat::Json;
  if (s == "table") return ReportFormat::Table;
  if (s == "csv") return ReportFormat::Csv;
  throw UsageError("unknown report format '" + s + "' (expected json, table or csv)");
}

std::string emit_report(const ExperimentReport& r, ReportFormat format) {
  switch (format) {
    case ReportFormat::Json:
      return to_json(r).dump(2) + '\n';
    case ReportFormat::Table:
      return render_table(r);
    case ReportFormat::Csv:
      return render_csv(r);
  }
  throw UsageError("unknown report format");
}

void write_report(const ExperimentReport& r, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidParameter("cannot write " + tmp.string());
    out << emit_report(r, ReportFormat::Json);
    if (!out.flush()) throw InvalidParameter("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

ExperimentReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidParameter("cannot open report " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(0, std::string("report is not valid JSON: ") + e.what());
  }
  return report_from_json(j);
}

}  // namespace brpuf
