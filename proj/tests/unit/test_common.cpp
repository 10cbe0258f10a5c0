#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include "brpuf/common.hpp"

using namespace brpuf;

TEST(Challenge, StringRoundTrip) {
  const Challenge c = Challenge::from_string("0110100");
  EXPECT_EQ(c.size(), 7u);
  EXPECT_EQ(c[1], 1);
  EXPECT_EQ(c[4], 1);
  EXPECT_EQ(c.to_string(), "0110100");
}

TEST(Challenge, RejectsNonBinaryCharacters) {
  EXPECT_THROW(Challenge::from_string("0120"), InvalidParameter);
  EXPECT_THROW(Challenge(std::vector<std::uint8_t>{0, 2}), InvalidParameter);
}

TEST(Challenge, SpinsMapZeroToMinusOne) {
  const auto s = Challenge::from_string("1001").spins();
  ASSERT_EQ(s.size(), 4);
  EXPECT_EQ(s[0], 1.0);
  EXPECT_EQ(s[1], -1.0);
  EXPECT_EQ(s[2], -1.0);
  EXPECT_EQ(s[3], 1.0);
}

TEST(Challenge, HammingDistance) {
  EXPECT_EQ(hamming_distance(Challenge::from_string("0110"), Challenge::from_string("0011")), 2u);
  EXPECT_THROW(hamming_distance(Challenge(3), Challenge(4)), DimensionError);
}

TEST(Seeds, DeriveSeedSeparatesLabelsAndIndices) {
  std::set<std::uint64_t> seen;
  for (const char* label : {"chip", "noise", "lfsr"})
    for (std::uint64_t i = 0; i < 100; ++i) seen.insert(derive_seed(42, label, i));
  EXPECT_EQ(seen.size(), 300u);
  EXPECT_EQ(derive_seed(42, "chip", 3), derive_seed(42, "chip", 3));
  EXPECT_NE(derive_seed(42, "chip", 3), derive_seed(43, "chip", 3));
}

TEST(Seeds, Fnv1aKnownVectors) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ull);
}

TEST(FormatDouble, ShortestRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 1e22, 0.0, 123456.789}) {
    const std::string s = format_double(v);
    EXPECT_EQ(std::stod(s), v) << s;
  }
  EXPECT_EQ(format_double(0.5), "0.5");
}
