#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <set>
#include <sstream>

#include "brpuf/config.hpp"
#include "brpuf/experiment.hpp"

using namespace brpuf;

namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

const char* kTiny = R"(
[run]
seed = 5

[puf]
kind = xor-br
m = 16
k = 1
chips = 2

[dataset]
train_sizes = 0, 400
test_size = 400
sigma = 0
calibration_size = 1000

[mlp:a]
layers = 1
hidden = 8
restarts = 0
learning_rate = 1e-3
max_iterations = 300
checkpoint_every = 100

[mlp:b]
layers = 2
hidden = 8
learning_rate = 1e-3
max_iterations = 300
checkpoint_every = 100

[sweep]
layers = 1, 2
neurons = 4, 8, 16
train_size = 400
)";

ReportCell cell(std::size_t train, const std::string& attacker, double acc, double time) {
  ReportCell c;
  c.train_size = train;
  c.attacker = attacker;
  c.accuracy = acc;
  c.training_time = time;
  c.config_hash = "0123456789abcdef";
  return c;
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(Config, DefaultsWithoutSections) {
  const ExperimentConfig cfg = parse("");
  EXPECT_EQ(cfg.puf.m, 64u);
  EXPECT_EQ(cfg.puf.k, 4u);
  EXPECT_EQ(cfg.puf.chips, 3u);
  ASSERT_EQ(cfg.attackers.size(), 1u);
  EXPECT_EQ(cfg.attackers[0].name, "dl");
  EXPECT_FALSE(cfg.dataset.sigma.has_value());
  EXPECT_EQ(cfg.dataset.convergence_target, 0.8);
}

TEST(Config, ParsesValuesAndSuffixes) {
  const ExperimentConfig cfg = parse(
      "; comment\n[run]\nseed = 0x10\n[puf]\nkind = XOR-TBR\nchip_seeds = 1, 2\nobfuscation = shuffle\n"
      "[dataset]\ntrain_sizes = 5K, 1M\nsigma = auto\n[svm]\nenabled = yes\nc_values = 0.5, 2\n"
      "[mlp]\nhidden = 64\n[mlp:wide]\nhidden = 512\n");
  EXPECT_EQ(cfg.seed, 16u);
  EXPECT_EQ(cfg.puf.kind, XorKind::XorTbr);
  EXPECT_EQ(cfg.puf.chips, 2u);
  EXPECT_EQ(cfg.chip_seed(1), 2u);
  EXPECT_EQ(cfg.puf.obfuscation, "shuffle");
  EXPECT_EQ(cfg.dataset.train_sizes, (std::vector<std::size_t>{5000, 1'000'000}));
  EXPECT_EQ(cfg.dataset.convergence_target, 0.72);
  EXPECT_TRUE(cfg.svm.enabled);
  EXPECT_EQ(cfg.svm.Cs, (std::vector<double>{0.5, 2.0}));
  ASSERT_EQ(cfg.attackers.size(), 1u);
  EXPECT_EQ(cfg.attackers[0].name, "wide");
  EXPECT_EQ(cfg.attackers[0].config.hidden, 512u);
  EXPECT_EQ(cfg.mlp.hidden, 64u);
}

TEST(Config, DerivedChipSeedsDiffer) {
  const ExperimentConfig cfg = parse("");
  EXPECT_NE(cfg.chip_seed(0), cfg.chip_seed(1));
  EXPECT_EQ(cfg.chip_seed(2), derive_seed(cfg.seed, "chip", 2));
}

TEST(Config, Errors) {
  EXPECT_THROW(parse("[puf]\ncolour = red\n"), InvalidParameter);
  EXPECT_THROW(parse("[nonsense]\nx = 1\n"), InvalidParameter);
  EXPECT_THROW(parse("[puf]\nm = 63\n"), InvalidParameter);
  EXPECT_THROW(parse("[puf]\nm = many\n"), InvalidParameter);
  EXPECT_THROW(parse("[dataset]\niterations = 4\n"), InvalidParameter);
  EXPECT_THROW(parse("[puf]\nobfuscation = rotate\n"), InvalidParameter);
  EXPECT_THROW(parse("[puf\nm = 8\n"), ParseError);
}

TEST(Config, HashTracksContent) {
  const ExperimentConfig a = parse(kTiny), b = parse(kTiny);
  EXPECT_EQ(hash_hex(to_json(a)), hash_hex(to_json(b)));
  EXPECT_EQ(hash_hex(to_json(a)).size(), 16u);
  ExperimentConfig c = a;
  c.seed += 1;
  EXPECT_NE(hash_hex(to_json(a)), hash_hex(to_json(c)));
  c = a;
  c.out = "elsewhere";
  EXPECT_EQ(hash_hex(to_json(a)), hash_hex(to_json(c)));
}

TEST(Report, JsonRoundTripIsIdentity) {
  ExperimentReport r;
  r.kind = "attack";
  r.master_seed = 9;
  r.config = {{"seed", 9}};
  r.config_hash = "0123456789abcdef";
  r.chips.push_back({0, 11, 0.25, 0.0, 0.8, 1000});
  r.cells = {cell(1000, "dl", 0.9, 1.5), cell(1000, "svm-d4", 0.6, 3.0)};
  r.cells[1].accuracy.reset();
  r.cells[1].status = "error";
  r.cells[1].error = "SizeError: too big";
  r.lda.push_back({0, 1000, 0.95, 0.01});
  r.environment = {{"compiler", "x"}};
  const std::string text = emit_report(r, ReportFormat::Json);
  const ExperimentReport back = report_from_json(nlohmann::json::parse(text));
  EXPECT_EQ(emit_report(back, ReportFormat::Json), text);
  EXPECT_EQ(to_json(back), to_json(r));
}

TEST(Report, TableHasRowPerSizeAndColumnPerAttacker) {
  ExperimentReport r;
  r.kind = "attack";
  for (std::size_t n : {5000, 10000, 20000})
    for (const char* a : {"dl", "single", "svm-d4"}) r.cells.push_back(cell(n, a, 0.75, 1.0));
  const std::string table = emit_report(r, ReportFormat::Table);
  const auto header = table.find("train size");
  ASSERT_NE(header, std::string::npos);
  const std::string header_line = table.substr(header, table.find('\n', header) - header);
  for (const char* a : {"dl", "single", "svm-d4"}) EXPECT_NE(header_line.find(a), std::string::npos);
  for (const char* n : {"\n5000 ", "\n10000", "\n20000"}) EXPECT_NE(table.find(n), std::string::npos);
  // Header plus three rows, each with one separator per attacker column.
  EXPECT_EQ(std::count(table.begin(), table.end(), '|'), 4 * 3);
}

TEST(Report, CsvHasHeaderPlusOneLinePerCell) {
  ExperimentReport r;
  r.kind = "attack";
  for (int i = 0; i < 7; ++i) r.cells.push_back(cell(100 * (i + 1), "dl", 0.5, 0.1));
  r.cells[3].error = "message, with comma";
  const std::string csv = emit_report(r, ReportFormat::Csv);
  EXPECT_EQ(count_lines(csv), r.cells.size() + 1);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "train_size,attacker,chip,layers,hidden,accuracy,training_time,iterations_to_stop,stop_reason,"
            "config_hash,status,error");
}

TEST(Report, UnknownFormatIsUsageError) {
  EXPECT_THROW(parse_report_format("xml"), UsageError);
  EXPECT_EQ(parse_report_format("csv"), ReportFormat::Csv);
}

TEST(Report, WriteAndReadBack) {
  ExperimentReport r;
  r.kind = "sweep";
  r.cells = {cell(10, "N1-K4", 0.5, 0.2)};
  r.winner = 0;
  const auto path = std::filesystem::temp_directory_path() / "brpuf_test_report.json";
  write_report(r, path);
  EXPECT_EQ(to_json(read_report(path)), to_json(r));
  std::filesystem::remove(path);
}

TEST(Winner, EqualAccuracyPrefersShorterTime) {
  std::vector<ReportCell> cells{cell(1, "a", 0.8, 5.0), cell(1, "b", 0.9, 7.0), cell(1, "c", 0.9, 3.0),
                                cell(1, "d", 0.9, 3.0)};
  EXPECT_EQ(select_winner(cells), 2u);
  cells[1].training_time = 1.0;
  EXPECT_EQ(select_winner(cells), 1u);
  cells = {cell(1, "a", 0.5, 1.0)};
  cells[0].accuracy.reset();
  EXPECT_FALSE(select_winner(cells).has_value());
}

TEST(Experiment, ZeroTrainSizeBecomesErrorCell) {
  const ExperimentConfig cfg = parse(kTiny);
  const ExperimentReport r = run_attack_experiment(cfg);
  // 2 chips x 2 sizes x 2 attackers.
  ASSERT_EQ(r.cells.size(), 8u);
  std::set<std::string> hashes;
  for (const auto& c : r.cells) {
    EXPECT_EQ(c.config_hash.size(), 16u);
    hashes.insert(c.config_hash);
    if (c.train_size == 0) {
      EXPECT_EQ(c.status, "error");
      EXPECT_FALSE(c.accuracy.has_value());
      EXPECT_EQ(c.error.rfind("size error", 0), 0u) << c.error;
    } else {
      EXPECT_EQ(c.status, "ok") << c.error;
      ASSERT_TRUE(c.accuracy.has_value());
      EXPECT_GE(*c.accuracy, 0.0);
      EXPECT_LE(*c.accuracy, 1.0);
    }
  }
  EXPECT_EQ(hashes.size(), r.cells.size());
}

TEST(Experiment, CellsWithoutPlateauAreRetrained) {
  ExperimentConfig cfg = parse(kTiny);
  cfg.puf.chips = 1;
  cfg.dataset.train_sizes = {400};
  ASSERT_EQ(cfg.attackers.size(), 2u);
  EXPECT_EQ(cfg.attackers[0].config.restarts, 0u);
  EXPECT_EQ(cfg.attackers[1].config.restarts, 1u);
  for (auto& a : cfg.attackers) {
    a.config.max_iterations = 50;  // below the checkpoint cadence: never plateaus
    a.config.restarts = a.name == "a" ? 0 : 2;
  }
  const ExperimentReport r = run_attack_experiment(cfg);
  ASSERT_EQ(r.cells.size(), 2u);
  EXPECT_EQ(r.cells[0].stop_reason, "max_iterations");
  EXPECT_EQ(r.cells[0].iterations_to_stop, 50u);
  EXPECT_EQ(r.cells[1].stop_reason, "max_iterations after 2 restarts");
  EXPECT_EQ(r.cells[1].iterations_to_stop, 150u);
}

TEST(Experiment, ReportBodyIsReproducible) {
  ExperimentConfig cfg = parse(kTiny);
  cfg.dataset.train_sizes = {400};
  const auto a = run_attack_experiment(cfg), b = run_attack_experiment(cfg);
  EXPECT_EQ(report_body(a).dump(), report_body(b).dump());
  cfg.seed += 1;
  EXPECT_NE(report_body(run_attack_experiment(cfg)).dump(), report_body(a).dump());
}

TEST(Experiment, SweepCoversTheGrid) {
  const ExperimentConfig cfg = parse(kTiny);
  const ExperimentReport r = run_scalability_sweep(cfg);
  EXPECT_EQ(r.kind, "sweep");
  EXPECT_EQ(r.cells.size(), 2u * 3u);
  ASSERT_TRUE(r.winner.has_value());
  for (const auto& c : r.cells) EXPECT_LE(c.accuracy.value_or(0.0), r.cells[*r.winner].accuracy.value_or(0.0));
  const std::string table = emit_report(r, ReportFormat::Table);
  EXPECT_NE(table.find("best:"), std::string::npos);
}

TEST(Experiment, ChipPreparationMeetsCalibrationTarget) {
  ExperimentConfig cfg = parse(kTiny);
  cfg.puf.m = 32;
  cfg.puf.k = 2;
  const Chip chip = prepare_chip(cfg, 0, 2000);
  EXPECT_GE(chip.data.size(), 2000u);
  const double rate = static_cast<double>(chip.data.size()) / static_cast<double>(chip.challenges);
  EXPECT_NEAR(rate, 0.8, 0.03);
  EXPECT_EQ(chip.seed, cfg.chip_seed(0));
  const Chip again = prepare_chip(cfg, 0, 2000);
  EXPECT_EQ(again.data, chip.data);
}

TEST(Experiment, LdaReportHasOneRowPerChip) {
  ExperimentConfig cfg = parse(kTiny);
  cfg.lda.enabled = true;
  cfg.lda.samples = 2000;
  const ExperimentReport r = run_lda_analysis(cfg);
  ASSERT_EQ(r.lda.size(), 2u);
  EXPECT_EQ(count_lines(emit_report(r, ReportFormat::Csv)), 3u);
}
