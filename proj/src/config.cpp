#include "brpuf/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>

namespace brpuf {

namespace pt = boost::property_tree;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

[[noreturn]] void bad_value(const std::string& where, const std::string& value, const std::string& want) {
  throw InvalidParameter(where + ": '" + value + "' is not " + want);
}

std::uint64_t parse_u64(const std::string& where, const std::string& raw) {
  std::string v = trim(raw);
  int base = 10;
  if (v.size() > 2 && v[0] == '0' && (v[1] == 'x' || v[1] == 'X')) {
    base = 16;
    v = v.substr(2);
  }
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out, base);
  if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty()) bad_value(where, raw, "an unsigned integer");
  return out;
}

// Counts accept a K (10^3) or M (10^6) suffix.
std::size_t parse_count(const std::string& where, const std::string& raw) {
  std::string v = trim(raw);
  std::uint64_t scale = 1;
  if (!v.empty() && (v.back() == 'K' || v.back() == 'k')) scale = 1'000;
  if (!v.empty() && (v.back() == 'M' || v.back() == 'm')) scale = 1'000'000;
  if (scale != 1) v.pop_back();
  return static_cast<std::size_t>(parse_u64(where, v) * scale);
}

double parse_real(const std::string& where, const std::string& raw) {
  const std::string v = trim(raw);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty()) bad_value(where, raw, "a number");
  return out;
}

bool parse_bool(const std::string& where, const std::string& raw) {
  const std::string v = lower(trim(raw));
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  bad_value(where, raw, "a boolean");
}

template <typename F>
auto parse_list(const std::string& where, const std::string& raw, F item) {
  std::vector<decltype(item(where, raw))> out;
  std::stringstream ss(raw);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (trim(tok).empty()) bad_value(where, raw, "a comma-separated list");
    out.push_back(item(where, tok));
  }
  if (out.empty()) bad_value(where, raw, "a nonempty list");
  return out;
}

// One section with a record of which keys were consumed.
class Section {
 public:
  Section(std::string name, const pt::ptree* tree) : name_(std::move(name)), tree_(tree) {}

  std::optional<std::string> get(const std::string& key) {
    if (!tree_) return std::nullopt;
    const auto it = tree_->find(key);
    if (it == tree_->not_found()) return std::nullopt;
    used_.insert(key);
    return trim(it->second.data());
  }
  std::string where(const std::string& key) const { return "[" + name_ + "] " + key; }

  template <typename T, typename F>
  void read(const std::string& key, T& dst, F parse) {
    if (auto v = get(key)) dst = parse(where(key), *v);
  }

  void reject_unknown() const {
    if (!tree_) return;
    for (const auto& [key, child] : *tree_) {
      if (!child.empty()) throw InvalidParameter("[" + name_ + "] unexpected nested entry " + key);
      if (!used_.count(key)) throw InvalidParameter("unknown key " + where(key));
    }
  }

 private:
  std::string name_;
  const pt::ptree* tree_;
  std::set<std::string> used_;
};

const pt::ptree* child(const pt::ptree& root, const std::string& name) {
  const auto it = root.find(name);
  return it == root.not_found() ? nullptr : &it->second;
}

void read_mlp(Section& s, MlpConfig& c) {
  s.read("layers", c.layers, parse_count);
  s.read("hidden", c.hidden, parse_count);
  s.read("dropout", c.dropout_rate, parse_real);
  s.read("learning_rate", c.learning_rate, parse_real);
  s.read("batch_size", c.batch_size, parse_count);
  s.read("max_iterations", c.max_iterations, parse_count);
  s.read("restarts", c.restarts, parse_count);
  s.read("checkpoint_every", c.checkpoint_every, parse_count);
  s.read("stop_window", c.stop_window, parse_count);
  if (auto v = s.get("stop_digits")) c.stop_digits = static_cast<int>(parse_u64(s.where("stop_digits"), *v));
  if (auto v = s.get("activation")) c.activation = parse_activation(lower(*v));
  if (auto v = s.get("optimizer")) c.optimizer = parse_optimizer(lower(*v));
  s.read("adam_beta1", c.adam_beta1, parse_real);
  s.read("adam_beta2", c.adam_beta2, parse_real);
  s.read("adam_epsilon", c.adam_epsilon, parse_real);
}

}  // namespace

void ExperimentConfig::validate() const {
  if (puf.m < 4 || puf.m % 2 != 0) throw InvalidParameter("puf.m must be even and >= 4");
  if (puf.k == 0) throw InvalidParameter("puf.k must be >= 1");
  if (puf.chips == 0) throw InvalidParameter("puf.chips must be >= 1");
  if (!puf.chip_seeds.empty() && puf.chip_seeds.size() != puf.chips)
    throw InvalidParameter("puf.chip_seeds must list one seed per chip");
  if (puf.obfuscation != "none" && puf.obfuscation != "mask" && puf.obfuscation != "shuffle")
    throw InvalidParameter("puf.obfuscation must be none, mask or shuffle");
  if (dataset.train_sizes.empty()) throw InvalidParameter("dataset.train_sizes is empty");
  if (dataset.test_size == 0) throw InvalidParameter("dataset.test_size must be >= 1");
  if (dataset.iterations == 0 || dataset.iterations % 2 == 0)
    throw InvalidParameter("dataset.iterations must be odd");
  if (dataset.lfsr_width < 8 || dataset.lfsr_width > 64) throw InvalidParameter("dataset.lfsr_width must lie in [8, 64]");
  if (dataset.sigma && !(*dataset.sigma >= 0.0)) throw InvalidParameter("dataset.sigma must be >= 0");
  if (!(dataset.noise_target > 0.0 && dataset.noise_target < 0.5))
    throw InvalidParameter("dataset.noise_target must lie in (0, 0.5)");
  if (!(dataset.convergence_target > 0.0 && dataset.convergence_target <= 1.0))
    throw InvalidParameter("dataset.convergence_target must lie in (0, 1]");
  if (dataset.calibration_size == 0) throw InvalidParameter("dataset.calibration_size must be >= 1");
  mlp.validate();
  for (const auto& a : attackers) a.config.validate();
  if (svm.degrees.empty() || svm.Cs.empty()) throw InvalidParameter("svm grid is empty");
  for (int d : svm.degrees)
    if (d < 1) throw InvalidParameter("svm degrees must be >= 1");
  for (double c : svm.Cs)
    if (!(c > 0.0)) throw InvalidParameter("svm C values must be > 0");
  if (lda.bins < 1) throw InvalidParameter("lda.bins must be >= 1");
  const auto& ls = sweep.full_grid ? sweep.full_layers : sweep.layers;
  const auto& ns = sweep.full_grid ? sweep.full_neurons : sweep.neurons;
  if (ls.empty() || ns.empty()) throw InvalidParameter("sweep grid is empty");
}

std::uint64_t ExperimentConfig::chip_seed(std::size_t chip) const {
  if (chip < puf.chip_seeds.size()) return puf.chip_seeds[chip];
  return derive_seed(seed, "chip", chip);
}

ExperimentConfig parse_config(std::istream& in) {
  pt::ptree root;
  try {
    pt::ini_parser::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(e.line(), e.message());
  }

  ExperimentConfig cfg;
  for (const auto& [name, tree] : root) {
    if (tree.empty() && !tree.data().empty()) throw InvalidParameter("key '" + name + "' outside any section");
    const bool known = name == "run" || name == "puf" || name == "dataset" || name == "mlp" || name == "svm" ||
                       name == "lda" || name == "sweep" || name.rfind("mlp:", 0) == 0;
    if (!known) throw InvalidParameter("unknown section [" + name + "]");
  }

  Section run("run", child(root, "run"));
  run.read("seed", cfg.seed, parse_u64);
  if (auto v = run.get("out")) cfg.out = *v;
  run.reject_unknown();

  Section puf("puf", child(root, "puf"));
  if (auto v = puf.get("kind")) cfg.puf.kind = parse_xor_kind(lower(*v));
  puf.read("m", cfg.puf.m, parse_count);
  puf.read("k", cfg.puf.k, parse_count);
  puf.read("chips", cfg.puf.chips, parse_count);
  if (auto v = puf.get("chip_seeds")) {
    cfg.puf.chip_seeds = parse_list(puf.where("chip_seeds"), *v, parse_u64);
    if (!puf.get("chips")) cfg.puf.chips = cfg.puf.chip_seeds.size();
  }
  if (auto v = puf.get("obfuscation")) cfg.puf.obfuscation = lower(*v);
  puf.reject_unknown();

  Section ds("dataset", child(root, "dataset"));
  if (auto v = ds.get("train_sizes")) cfg.dataset.train_sizes = parse_list(ds.where("train_sizes"), *v, parse_count);
  ds.read("test_size", cfg.dataset.test_size, parse_count);
  ds.read("validation_size", cfg.dataset.validation_size, parse_count);
  if (auto v = ds.get("lfsr_width")) cfg.dataset.lfsr_width = static_cast<unsigned>(parse_u64(ds.where("lfsr_width"), *v));
  ds.read("lfsr_taps", cfg.dataset.lfsr_taps, parse_u64);
  if (auto v = ds.get("iterations")) cfg.dataset.iterations = static_cast<unsigned>(parse_u64(ds.where("iterations"), *v));
  if (auto v = ds.get("sigma")) {
    if (lower(*v) == "auto")
      cfg.dataset.sigma.reset();
    else
      cfg.dataset.sigma = parse_real(ds.where("sigma"), *v);
  }
  ds.read("noise_target", cfg.dataset.noise_target, parse_real);
  if (auto v = ds.get("convergence_target"))
    cfg.dataset.convergence_target = parse_real(ds.where("convergence_target"), *v);
  else
    cfg.dataset.convergence_target = cfg.puf.kind == XorKind::XorTbr ? 0.72 : 0.80;
  ds.read("calibration_size", cfg.dataset.calibration_size, parse_count);
  ds.read("characterize_size", cfg.dataset.characterize_size, parse_count);
  ds.reject_unknown();

  cfg.mlp.m = cfg.puf.m;
  Section base("mlp", child(root, "mlp"));
  read_mlp(base, cfg.mlp);
  base.reject_unknown();
  for (const auto& [name, tree] : root) {
    if (name.rfind("mlp:", 0) != 0) continue;
    MlpAttacker a{trim(name.substr(4)), cfg.mlp};
    if (a.name.empty()) throw InvalidParameter("[mlp:] needs an attacker name");
    Section s(name, &tree);
    read_mlp(s, a.config);
    s.reject_unknown();
    cfg.attackers.push_back(std::move(a));
  }
  if (cfg.attackers.empty()) cfg.attackers.push_back({"dl", cfg.mlp});

  Section svm("svm", child(root, "svm"));
  svm.read("enabled", cfg.svm.enabled, parse_bool);
  if (auto v = svm.get("degrees"))
    cfg.svm.degrees = parse_list(svm.where("degrees"), *v, [](const std::string& w, const std::string& t) {
      return static_cast<int>(parse_u64(w, t));
    });
  if (auto v = svm.get("c_values")) cfg.svm.Cs = parse_list(svm.where("c_values"), *v, parse_real);
  svm.read("cap", cfg.svm.cap, parse_count);
  svm.read("tolerance", cfg.svm.tolerance, parse_real);
  svm.reject_unknown();

  Section lda("lda", child(root, "lda"));
  lda.read("enabled", cfg.lda.enabled, parse_bool);
  lda.read("samples", cfg.lda.samples, parse_count);
  if (auto v = lda.get("bins")) cfg.lda.bins = static_cast<int>(parse_u64(lda.where("bins"), *v));
  lda.read("ridge", cfg.lda.ridge, parse_real);
  lda.reject_unknown();

  Section sw("sweep", child(root, "sweep"));
  if (auto v = sw.get("layers")) cfg.sweep.layers = parse_list(sw.where("layers"), *v, parse_count);
  if (auto v = sw.get("neurons")) cfg.sweep.neurons = parse_list(sw.where("neurons"), *v, parse_count);
  if (auto v = sw.get("full_layers")) cfg.sweep.full_layers = parse_list(sw.where("full_layers"), *v, parse_count);
  if (auto v = sw.get("full_neurons")) cfg.sweep.full_neurons = parse_list(sw.where("full_neurons"), *v, parse_count);
  sw.read("train_size", cfg.sweep.train_size, parse_count);
  sw.read("full_grid", cfg.sweep.full_grid, parse_bool);
  sw.reject_unknown();

  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidParameter("cannot open config " + path.string());
  return parse_config(in);
}

nlohmann::json to_json(const ExperimentConfig& cfg) {
  nlohmann::json attackers = nlohmann::json::array();
  for (const auto& a : cfg.attackers) attackers.push_back({{"name", a.name}, {"mlp", to_json(a.config)}});
  std::vector<std::uint64_t> seeds;
  for (std::size_t c = 0; c < cfg.puf.chips; ++c) seeds.push_back(cfg.chip_seed(c));
  return {
      {"seed", cfg.seed},
      {"puf",
       {{"kind", to_string(cfg.puf.kind)},
        {"m", cfg.puf.m},
        {"k", cfg.puf.k},
        {"chips", cfg.puf.chips},
        {"chip_seeds", seeds},
        {"obfuscation", cfg.puf.obfuscation}}},
      {"dataset",
       {{"train_sizes", cfg.dataset.train_sizes},
        {"test_size", cfg.dataset.test_size},
        {"validation_size", cfg.dataset.validation_size},
        {"lfsr_width", cfg.dataset.lfsr_width},
        {"lfsr_taps", cfg.dataset.lfsr_taps},
        {"iterations", cfg.dataset.iterations},
        {"sigma", cfg.dataset.sigma ? nlohmann::json(*cfg.dataset.sigma) : nlohmann::json("auto")},
        {"noise_target", cfg.dataset.noise_target},
        {"convergence_target", cfg.dataset.convergence_target},
        {"calibration_size", cfg.dataset.calibration_size},
        {"characterize_size", cfg.dataset.characterize_size}}},
      {"mlp", to_json(cfg.mlp)},
      {"attackers", attackers},
      {"svm",
       {{"enabled", cfg.svm.enabled},
        {"degrees", cfg.svm.degrees},
        {"c_values", cfg.svm.Cs},
        {"cap", cfg.svm.cap},
        {"tolerance", cfg.svm.tolerance}}},
      {"lda", {{"enabled", cfg.lda.enabled}, {"samples", cfg.lda.samples}, {"bins", cfg.lda.bins}, {"ridge", cfg.lda.ridge}}},
      {"sweep",
       {{"layers", cfg.sweep.layers},
        {"neurons", cfg.sweep.neurons},
        {"full_layers", cfg.sweep.full_layers},
        {"full_neurons", cfg.sweep.full_neurons},
        {"train_size", cfg.sweep.train_size},
        {"full_grid", cfg.sweep.full_grid}}},
  };
}

std::string hash_hex(const nlohmann::json& j) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

}  // namespace brpuf
