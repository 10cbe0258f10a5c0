#include "brpuf/common.hpp"

#include <array>
#include <charconv>

namespace brpuf {

Challenge::Challenge(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
  for (auto& b : bits_) {
    if (b > 1) throw InvalidParameter("challenge bits must be 0 or 1");
  }
}

Challenge Challenge::from_string(std::string_view s) {
  std::vector<std::uint8_t> bits(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '0' && s[i] != '1')
      throw InvalidParameter("challenge string has non-binary character at " + std::to_string(i));
    bits[i] = s[i] == '1' ? 1 : 0;
  }
  return Challenge(std::move(bits));
}

std::string Challenge::to_string() const {
  std::string s(bits_.size(), '0');
  for (std::size_t i = 0; i < bits_.size(); ++i)
    if (bits_[i]) s[i] = '1';
  return s;
}

std::size_t hamming_distance(const Challenge& a, const Challenge& b) {
  if (a.size() != b.size()) throw DimensionError("hamming distance of challenges with different lengths");
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return d;
}

std::size_t ChallengeHash::operator()(const Challenge& c) const noexcept {
  std::uint64_t h = 14695981039346656037ull;
  for (auto b : c.bits()) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return static_cast<std::size_t>(splitmix64(h ^ c.size()));
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view data) noexcept {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t parent, std::string_view label, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(parent ^ fnv1a(label)) + index);
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) throw NumericalError("cannot format double");
  return std::string(buf.data(), end);
}

}  // namespace brpuf
