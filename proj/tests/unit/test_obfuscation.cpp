#include <gtest/gtest.h>

#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "brpuf/obfuscation.hpp"

using namespace brpuf;

namespace {

Challenge random_challenge(std::size_t m, std::mt19937_64& rng) {
  Challenge c(m);
  for (std::size_t i = 0; i < m; ++i) c.set(i, rng() & 1u);
  return c;
}

ShuffleConfig hand_config() {
  ShuffleConfig cfg;
  cfg.pairs = {{0, 1}, {1, 2}, {2, 3}, {3, 0}};
  cfg.constants.assign(4, {0, 1, 1, 0});
  cfg.position_perm = {0, 1, 2, 3};
  return cfg;
}

std::size_t popcount(const Challenge& c) {
  std::size_t n = 0;
  for (auto b : c.bits()) n += b;
  return n;
}

}  // namespace

TEST(Mask, HalfTheBitsAreSet) {
  const MaskConfig cfg = new_mask_config(64, 7);
  EXPECT_EQ(popcount(cfg.mask), 32u);
  EXPECT_EQ(new_mask_config(64, 7), cfg);
  EXPECT_THROW(new_mask_config(63, 7), InvalidParameter);
}

TEST(Mask, AllSixFourBitMasksAppear) {
  std::set<std::string> seen;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) seen.insert(new_mask_config(4, seed).mask.to_string());
  EXPECT_EQ(seen.size(), 6u);
  for (const auto& s : seen) EXPECT_EQ(popcount(Challenge::from_string(s)), 2u);
}

TEST(Mask, XorArithmetic) {
  const MaskConfig cfg{Challenge::from_string("1010"), 0};
  EXPECT_EQ(apply_mask(cfg, Challenge::from_string("1100")).to_string(), "0110");
  EXPECT_THROW(apply_mask(cfg, Challenge(5)), DimensionError);
}

TEST(Mask, InvolutionAndConstantDistance) {
  const MaskConfig cfg = new_mask_config(64, 19);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const Challenge c = random_challenge(64, rng);
    const Challenge out = apply_mask(cfg, c);
    EXPECT_EQ(hamming_distance(c, out), 32u);
    EXPECT_EQ(apply_mask(cfg, out), c);
  }
}

TEST(Shuffle, HandExample) {
  const ShuffleConfig cfg = hand_config();
  EXPECT_NO_THROW(validate(cfg));
  EXPECT_EQ(apply_shuffle(cfg, Challenge::from_string("1010")).to_string(), "1111");
  EXPECT_EQ(apply_shuffle(cfg, Challenge::from_string("0000")).to_string(), "0000");
}

TEST(Shuffle, SelectorHighBitIsFirstIndex) {
  ShuffleConfig cfg = hand_config();
  cfg.constants[0] = {0, 0, 1, 1};  // output 1 exactly when c[a] = 1
  EXPECT_EQ(apply_shuffle(cfg, Challenge::from_string("1000"))[0], 1);
  EXPECT_EQ(apply_shuffle(cfg, Challenge::from_string("0100"))[0], 0);
}

TEST(Shuffle, PermutationPlacesOutputs) {
  ShuffleConfig cfg = hand_config();
  cfg.constants[0] = {1, 1, 0, 0};
  cfg.position_perm = {2, 0, 3, 1};
  // Intermediate for c=0000 is (1,0,0,0); position_perm(0)=2.
  EXPECT_EQ(apply_shuffle(cfg, Challenge::from_string("0000")).to_string(), "0010");
}

TEST(Shuffle, GeneratedConfigInvariants) {
  const ShuffleConfig cfg = new_shuffle_config(64, 3);
  ASSERT_EQ(cfg.size(), 64u);
  std::vector<int> degree(64, 0);
  std::set<std::pair<std::size_t, std::size_t>> unordered;
  for (auto [a, b] : cfg.pairs) {
    EXPECT_NE(a, b);
    ++degree[a];
    ++degree[b];
    unordered.insert(std::minmax(a, b));
  }
  for (int d : degree) EXPECT_EQ(d, 2);
  EXPECT_EQ(unordered.size(), 64u);
  EXPECT_EQ(new_shuffle_config(64, 3), cfg);
}

TEST(Shuffle, FourBitPairingIsTwoRegular) {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const ShuffleConfig cfg = new_shuffle_config(4, seed);
    std::vector<int> degree(4, 0);
    for (auto [a, b] : cfg.pairs) {
      ++degree[a];
      ++degree[b];
    }
    for (int d : degree) EXPECT_EQ(d, 2);
    EXPECT_NO_THROW(validate(cfg));
  }
}

TEST(Shuffle, RejectsSmallOrOddWidths) {
  EXPECT_THROW(new_shuffle_config(2, 1), InvalidParameter);
  EXPECT_THROW(new_shuffle_config(7, 1), InvalidParameter);
}

TEST(Shuffle, ValidateCatchesBrokenTables) {
  ShuffleConfig cfg = hand_config();
  cfg.pairs[1] = {1, 0};
  EXPECT_THROW(validate(cfg), InvalidParameter);
  cfg = hand_config();
  cfg.constants[2] = {1, 1, 1, 0};
  EXPECT_THROW(validate(cfg), InvalidParameter);
  cfg = hand_config();
  cfg.position_perm = {0, 0, 2, 3};
  EXPECT_THROW(validate(cfg), InvalidParameter);
  // Bit 1 is the low selector of mux 0 and the high selector of mux 1.
  cfg = hand_config();
  cfg.constants[0] = {0, 0, 1, 1};
  cfg.constants[1] = {0, 1, 0, 1};
  EXPECT_THROW(validate(cfg), InvalidParameter);
}

TEST(Shuffle, GeneratedConfigsValidateAcrossSeeds) {
  for (std::uint64_t seed = 1; seed <= 100; ++seed)
    for (std::size_t m : {4, 16, 64, 256}) EXPECT_NO_THROW(validate(new_shuffle_config(m, seed))) << m << " " << seed;
}

TEST(Shuffle, SingleFlipChangesAtMostTwoOutputs) {
  const ShuffleConfig cfg = new_shuffle_config(8, 5);
  for (unsigned v = 0; v < 256; ++v) {
    Challenge c(8);
    for (std::size_t i = 0; i < 8; ++i) c.set(i, (v >> i) & 1u);
    const Challenge base = apply_shuffle(cfg, c);
    for (std::size_t i = 0; i < 8; ++i) {
      Challenge f = c;
      f.flip(i);
      EXPECT_LE(hamming_distance(base, apply_shuffle(cfg, f)), 2u);
    }
  }
}

TEST(Shuffle, EveryBitCanMoveTheOutput) {
  const ShuffleConfig cfg = new_shuffle_config(32, 9);
  std::mt19937_64 rng(4);
  std::vector<bool> moved(32, false);
  for (int t = 0; t < 200; ++t) {
    const Challenge c = random_challenge(32, rng);
    const Challenge base = apply_shuffle(cfg, c);
    for (std::size_t i = 0; i < 32; ++i) {
      Challenge f = c;
      f.flip(i);
      if (hamming_distance(base, apply_shuffle(cfg, f)) > 0) moved[i] = true;
    }
  }
  for (std::size_t i = 0; i < 32; ++i) EXPECT_TRUE(moved[i]) << "bit " << i;
}

TEST(Obfuscation, JsonRoundTrip) {
  for (const char* kind : {"none", "mask", "shuffle"}) {
    const Obfuscation obf = make_obfuscation(kind, 16, 21);
    const Obfuscation back = obfuscation_from_json(nlohmann::json::parse(to_json(obf).dump()));
    EXPECT_EQ(back, obf) << kind;
    EXPECT_EQ(obfuscation_kind(back), kind);
  }
  EXPECT_THROW(make_obfuscation("rotate", 16, 1), InvalidParameter);
}

TEST(Obfuscation, JsonUsesBitStrings) {
  const auto j = to_json(make_obfuscation("mask", 8, 2));
  EXPECT_EQ(j.at("mask").get<std::string>().size(), 8u);
  EXPECT_EQ(j.at("kind"), "mask");
}

TEST(Obfuscation, NoneIsIdentity) {
  const Challenge c = Challenge::from_string("01101");
  EXPECT_EQ(brpuf::apply(Obfuscation{}, c), c);
}
