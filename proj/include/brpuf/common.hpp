#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace brpuf {

// Error hierarchy. Every module reports failures by throwing one of these.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvalidParameter : Error {
  using Error::Error;
};
struct DimensionError : Error {
  using Error::Error;
};
struct SizeError : Error {
  using Error::Error;
};
struct GenerationError : Error {
  using Error::Error;
};
struct NumericalError : Error {
  using Error::Error;
};
struct OptimizerError : Error {
  using Error::Error;
};
struct UsageError : Error {
  using Error::Error;
};

struct ParseError : Error {
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct DivergenceError : Error {
  DivergenceError(std::uint64_t iteration, const std::string& what)
      : Error("diverged at iteration " + std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}
  std::uint64_t iteration() const noexcept { return iteration_; }

 private:
  std::uint64_t iteration_;
};

struct UndefinedInfluence : Error {
  explicit UndefinedInfluence(std::size_t bit)
      : Error("challenge bit " + std::to_string(bit) + " is constant across the dataset"),
        bit_(bit) {}
  std::size_t bit() const noexcept { return bit_; }

 private:
  std::size_t bit_;
};

/// A challenge bit vector; index i addresses stage i.
class Challenge {
 public:
  Challenge() = default;
  explicit Challenge(std::size_t m) : bits_(m, 0) {}
  explicit Challenge(std::vector<std::uint8_t> bits);

  /// Parses a '0'/'1' string, character index = stage index.
  static Challenge from_string(std::string_view s);

  std::size_t size() const noexcept { return bits_.size(); }
  std::uint8_t operator[](std::size_t i) const { return bits_[i]; }
  void set(std::size_t i, bool v) { bits_[i] = v ? 1 : 0; }
  void flip(std::size_t i) { bits_[i] ^= 1u; }
  const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }

  std::string to_string() const;

  /// ±1 encoding used by every model (0 ↦ −1, 1 ↦ +1).
  template <typename Scalar = double>
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> spins() const {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> v(static_cast<Eigen::Index>(bits_.size()));
    for (std::size_t i = 0; i < bits_.size(); ++i)
      v[static_cast<Eigen::Index>(i)] = bits_[i] ? Scalar(1) : Scalar(-1);
    return v;
  }

  friend bool operator==(const Challenge&, const Challenge&) = default;
  friend auto operator<=>(const Challenge&, const Challenge&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

std::size_t hamming_distance(const Challenge& a, const Challenge& b);

struct ChallengeHash {
  std::size_t operator()(const Challenge& c) const noexcept;
};

// Deterministic seed derivation: every component seed in an experiment is a
// function of the master seed and a label, so runs are reproducible.
std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t derive_seed(std::uint64_t parent, std::string_view label, std::uint64_t index = 0) noexcept;

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view data) noexcept;

/// Shortest text form of a double that parses back to the same value.
std::string format_double(double v);

}  // namespace brpuf
