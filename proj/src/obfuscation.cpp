#include "brpuf/obfuscation.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

namespace brpuf {

namespace {

constexpr int kMaxPairingAttempts = 10000;

// The six 4-entry mux constant vectors holding exactly two ones.
constexpr std::array<std::array<std::uint8_t, 4>, 6> kTwoOnes{{
    {0, 0, 1, 1},
    {0, 1, 0, 1},
    {0, 1, 1, 0},
    {1, 0, 0, 1},
    {1, 0, 1, 0},
    {1, 1, 0, 0},
}};

// Selector index = 2*c[a] + c[b].
bool reads_high(const std::array<std::uint8_t, 4>& t) { return t[0] != t[2] || t[1] != t[3]; }
bool reads_low(const std::array<std::uint8_t, 4>& t) { return t[0] != t[1] || t[2] != t[3]; }

// Bits that no mux output depends on.
std::vector<std::size_t> dead_bits(const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                                   const std::vector<std::array<std::uint8_t, 4>>& constants) {
  std::vector<bool> live(pairs.size(), false);
  for (std::size_t j = 0; j < pairs.size(); ++j) {
    if (reads_high(constants[j])) live[pairs[j].first] = true;
    if (reads_low(constants[j])) live[pairs[j].second] = true;
  }
  std::vector<std::size_t> dead;
  for (std::size_t i = 0; i < live.size(); ++i)
    if (!live[i]) dead.push_back(i);
  return dead;
}

std::string nibble_string(const std::array<std::uint8_t, 4>& v) {
  std::string s(4, '0');
  for (int i = 0; i < 4; ++i)
    if (v[static_cast<std::size_t>(i)]) s[static_cast<std::size_t>(i)] = '1';
  return s;
}

}  // namespace

MaskConfig new_mask_config(std::size_t m, std::uint64_t seed) {
  if (m == 0 || m % 2 != 0) throw InvalidParameter("mask width must be even and positive");
  std::mt19937_64 rng(derive_seed(seed, "mask"));
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  Challenge mask(m);
  for (std::size_t i = 0; i < m / 2; ++i) mask.set(idx[i], true);
  return {std::move(mask), seed};
}

void validate(const MaskConfig& cfg) {
  std::size_t ones = 0;
  for (auto b : cfg.mask.bits()) ones += b;
  if (cfg.mask.size() % 2 != 0 || ones * 2 != cfg.mask.size())
    throw InvalidParameter("mask must have exactly m/2 ones");
}

Challenge apply_mask(const MaskConfig& cfg, const Challenge& c) {
  if (c.size() != cfg.mask.size()) throw DimensionError("challenge and mask widths differ");
  Challenge out(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) out.set(i, (c[i] ^ cfg.mask[i]) != 0);
  return out;
}

ShuffleConfig new_shuffle_config(std::size_t m, std::uint64_t seed) {
  if (m < 4 || m % 2 != 0) throw InvalidParameter("shuffle width must be even and >= 4");
  std::mt19937_64 rng(derive_seed(seed, "shuffle"));

  // Configuration model: two stubs per original bit, randomly matched; reject
  // matchings with self-loops or repeated pairs.
  std::vector<std::size_t> stubs(2 * m);
  for (std::size_t i = 0; i < 2 * m; ++i) stubs[i] = i / 2;

  ShuffleConfig cfg;
  cfg.seed = seed;
  bool found = false;
  for (int attempt = 0; attempt < kMaxPairingAttempts && !found; ++attempt) {
    std::shuffle(stubs.begin(), stubs.end(), rng);
    std::set<std::pair<std::size_t, std::size_t>> seen;
    found = true;
    for (std::size_t j = 0; j < m; ++j) {
      const auto a = stubs[2 * j], b = stubs[2 * j + 1];
      if (a == b || !seen.insert(std::minmax(a, b)).second) {
        found = false;
        break;
      }
    }
  }
  if (!found)
    throw GenerationError("no valid selector pairing after " + std::to_string(kMaxPairingAttempts) +
                          " attempts (seed " + std::to_string(seed) + ")");

  cfg.pairs.resize(m);
  for (std::size_t j = 0; j < m; ++j) cfg.pairs[j] = {stubs[2 * j], stubs[2 * j + 1]};

  std::uniform_int_distribution<std::size_t> pick(0, kTwoOnes.size() - 1);
  cfg.constants.resize(m);
  for (auto& c : cfg.constants) c = kTwoOnes[pick(rng)];
  // A bit whose two muxes both ignore it is redrawn: redraw those muxes.
  for (auto dead = dead_bits(cfg.pairs, cfg.constants); !dead.empty(); dead = dead_bits(cfg.pairs, cfg.constants))
    for (std::size_t i : dead)
      for (std::size_t j = 0; j < m; ++j)
        if (cfg.pairs[j].first == i || cfg.pairs[j].second == i) cfg.constants[j] = kTwoOnes[pick(rng)];

  cfg.position_perm.resize(m);
  std::iota(cfg.position_perm.begin(), cfg.position_perm.end(), 0);
  std::shuffle(cfg.position_perm.begin(), cfg.position_perm.end(), rng);
  return cfg;
}

void validate(const ShuffleConfig& cfg) {
  const std::size_t m = cfg.pairs.size();
  if (cfg.constants.size() != m || cfg.position_perm.size() != m)
    throw InvalidParameter("shuffle config tables differ in length");
  std::vector<int> degree(m, 0);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& [a, b] : cfg.pairs) {
    if (a >= m || b >= m) throw InvalidParameter("selector index out of range");
    if (a == b) throw InvalidParameter("selector pair uses the same bit twice");
    if (!seen.insert(std::minmax(a, b)).second) throw InvalidParameter("selector pair repeated");
    ++degree[a];
    ++degree[b];
  }
  for (std::size_t i = 0; i < m; ++i)
    if (degree[i] != 2) throw InvalidParameter("bit " + std::to_string(i) + " does not feed exactly two muxes");
  for (const auto& c : cfg.constants) {
    if (std::count(c.begin(), c.end(), std::uint8_t{1}) != 2 ||
        std::count(c.begin(), c.end(), std::uint8_t{0}) != 2)
      throw InvalidParameter("mux constants must hold exactly two ones");
  }
  if (const auto dead = dead_bits(cfg.pairs, cfg.constants); !dead.empty())
    throw InvalidParameter("bit " + std::to_string(dead.front()) + " does not influence any output");
  std::vector<std::size_t> sorted = cfg.position_perm;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < m; ++i)
    if (sorted[i] != i) throw InvalidParameter("position_perm is not a permutation");
}

Challenge apply_shuffle(const ShuffleConfig& cfg, const Challenge& c) {
  const std::size_t m = cfg.size();
  if (c.size() != m) throw DimensionError("challenge width differs from shuffle config");
  Challenge out(m);
  for (std::size_t j = 0; j < m; ++j) {
    const auto [a, b] = cfg.pairs[j];
    const unsigned sel = 2u * c[a] + c[b];
    out.set(cfg.position_perm[j], cfg.constants[j][sel] != 0);
  }
  return out;
}

Challenge apply(const Obfuscation& obf, const Challenge& c) {
  if (const auto* mask = std::get_if<MaskConfig>(&obf)) return apply_mask(*mask, c);
  if (const auto* shuffle = std::get_if<ShuffleConfig>(&obf)) return apply_shuffle(*shuffle, c);
  return c;
}

std::string obfuscation_kind(const Obfuscation& obf) {
  if (std::holds_alternative<MaskConfig>(obf)) return "mask";
  if (std::holds_alternative<ShuffleConfig>(obf)) return "shuffle";
  return "none";
}

std::string obfuscation_label(const Obfuscation& obf) {
  if (const auto* mask = std::get_if<MaskConfig>(&obf)) return "mask:" + std::to_string(mask->seed);
  if (const auto* shuffle = std::get_if<ShuffleConfig>(&obf)) return "shuffle:" + std::to_string(shuffle->seed);
  return "none";
}

Obfuscation make_obfuscation(const std::string& kind, std::size_t m, std::uint64_t seed) {
  if (kind == "none" || kind.empty()) return std::monostate{};
  if (kind == "mask") return new_mask_config(m, seed);
  if (kind == "shuffle") return new_shuffle_config(m, seed);
  throw InvalidParameter("unknown obfuscation kind '" + kind + "'");
}

nlohmann::json to_json(const Obfuscation& obf) {
  nlohmann::json j;
  j["kind"] = obfuscation_kind(obf);
  if (const auto* mask = std::get_if<MaskConfig>(&obf)) {
    j["m"] = mask->mask.size();
    j["seed"] = mask->seed;
    j["mask"] = mask->mask.to_string();
  } else if (const auto* sh = std::get_if<ShuffleConfig>(&obf)) {
    j["m"] = sh->size();
    j["seed"] = sh->seed;
    j["n"] = ShuffleConfig::kBitsPerOutput;
    j["selector"] = "2*c[a]+c[b]";
    nlohmann::json pairs = nlohmann::json::array(), consts = nlohmann::json::array();
    for (const auto& [a, b] : sh->pairs) pairs.push_back({a, b});
    for (const auto& c : sh->constants) consts.push_back(nibble_string(c));
    j["pairs"] = pairs;
    j["constants"] = consts;
    j["perm"] = sh->position_perm;
  }
  return j;
}

Obfuscation obfuscation_from_json(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "none") return std::monostate{};
  if (kind == "mask") {
    MaskConfig cfg{Challenge::from_string(j.at("mask").get<std::string>()), j.at("seed").get<std::uint64_t>()};
    if (cfg.mask.size() != j.at("m").get<std::size_t>()) throw InvalidParameter("mask length differs from m");
    validate(cfg);
    return cfg;
  }
  if (kind == "shuffle") {
    if (j.value("n", ShuffleConfig::kBitsPerOutput) != ShuffleConfig::kBitsPerOutput)
      throw InvalidParameter("only 2-to-1 shuffle configs are supported");
    ShuffleConfig cfg;
    cfg.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& p : j.at("pairs")) cfg.pairs.emplace_back(p.at(0).get<std::size_t>(), p.at(1).get<std::size_t>());
    for (const auto& c : j.at("constants")) {
      const auto s = c.get<std::string>();
      const auto bits = Challenge::from_string(s);
      if (bits.size() != 4) throw InvalidParameter("mux constants must have 4 bits");
      cfg.constants.push_back({bits[0], bits[1], bits[2], bits[3]});
    }
    cfg.position_perm = j.at("perm").get<std::vector<std::size_t>>();
    if (cfg.size() != j.at("m").get<std::size_t>()) throw InvalidParameter("pair count differs from m");
    validate(cfg);
    return cfg;
  }
  throw InvalidParameter("unknown obfuscation kind '" + kind + "'");
}

}  // namespace brpuf
