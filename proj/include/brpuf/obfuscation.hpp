#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "brpuf/common.hpp"

namespace brpuf {

/// Architecture 1: the original challenge is XORed with a fixed mask standing in
/// for a pool of memory-PUF responses. Exactly m/2 mask bits are set.
struct MaskConfig {
  Challenge mask;
  std::uint64_t seed = 0;

  friend bool operator==(const MaskConfig&, const MaskConfig&) = default;
};

/// Architecture 2 (2-to-1 shuffle): final bit position_perm[j] is the output of
/// a 4-input mux whose data inputs are constants[j] and whose selector is the
/// original bit pair (a_j, b_j), selector value 2*c[a_j] + c[b_j].
struct ShuffleConfig {
  static constexpr int kBitsPerOutput = 2;  // N of the N-to-1 family; only 2 is implemented

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<std::array<std::uint8_t, 4>> constants;
  std::vector<std::size_t> position_perm;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return pairs.size(); }
  friend bool operator==(const ShuffleConfig&, const ShuffleConfig&) = default;
};

MaskConfig new_mask_config(std::size_t m, std::uint64_t seed);
Challenge apply_mask(const MaskConfig& cfg, const Challenge& c);

/// Throws GenerationError if no valid pairing is found within the retry budget.
ShuffleConfig new_shuffle_config(std::size_t m, std::uint64_t seed);
Challenge apply_shuffle(const ShuffleConfig& cfg, const Challenge& c);

/// Throws InvalidParameter naming the first violated constraint.
void validate(const ShuffleConfig& cfg);
void validate(const MaskConfig& cfg);

/// Either obfuscation front-end, or none.
using Obfuscation = std::variant<std::monostate, MaskConfig, ShuffleConfig>;

Challenge apply(const Obfuscation& obf, const Challenge& c);
/// "none", "mask" or "shuffle".
std::string obfuscation_kind(const Obfuscation& obf);
/// Short provenance label, e.g. "mask:17".
std::string obfuscation_label(const Obfuscation& obf);

Obfuscation make_obfuscation(const std::string& kind, std::size_t m, std::uint64_t seed);

/// {kind, m, seed, mask | pairs + constants + perm}; bit vectors as '0'/'1'
/// strings, index 0 first.
nlohmann::json to_json(const Obfuscation& obf);
Obfuscation obfuscation_from_json(const nlohmann::json& j);

}  // namespace brpuf
