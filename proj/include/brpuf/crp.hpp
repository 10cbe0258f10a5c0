#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "brpuf/common.hpp"
#include "brpuf/obfuscation.hpp"
#include "brpuf/puf.hpp"

namespace brpuf {

/// Right-shifting Galois LFSR: each step emits the low bit, shifts right and,
/// if the emitted bit was 1, XORs `taps` into the state.
class GaloisLfsr {
 public:
  static constexpr std::uint64_t kDefaultTaps = 0xD800000000000000ull;  // x^64+x^63+x^61+x^60+1

  GaloisLfsr(unsigned width, std::uint64_t taps, std::uint64_t state);
  static GaloisLfsr default64(std::uint64_t state) { return GaloisLfsr(64, kDefaultTaps, state); }

  unsigned width() const noexcept { return width_; }
  std::uint64_t taps() const noexcept { return taps_; }
  std::uint64_t state() const noexcept { return state_; }

  int step() noexcept {
    const int out = static_cast<int>(state_ & 1u);
    state_ >>= 1;
    if (out) state_ ^= taps_;
    return out;
  }

 private:
  unsigned width_;
  std::uint64_t taps_;
  std::uint64_t state_;
};

/// `count` distinct m-bit challenges built from consecutive LFSR output bits.
/// Repeated challenges are skipped; the generator is advanced in place.
std::vector<Challenge> lfsr_generate(GaloisLfsr& lfsr, std::size_t count, std::size_t m);

struct CrpRecord {
  Challenge challenge;
  std::uint8_t response = 0;
  friend bool operator==(const CrpRecord&, const CrpRecord&) = default;
};

struct CrpMeta {
  std::string puf_kind = "xor-br";
  std::size_t m = 0;
  std::size_t k = 1;
  std::uint64_t chip_seed = 0;
  std::string obfuscation = "none";
  std::uint64_t lfsr_taps = GaloisLfsr::kDefaultTaps;
  std::uint64_t lfsr_seed = 1;
  unsigned iterations = 3;
  double theta = 0.0;
  double sigma = 0.0;
  friend bool operator==(const CrpMeta&, const CrpMeta&) = default;
};

/// Converged, majority-voted CRPs plus provenance. Challenges are unique and
/// all have width meta.m.
class CrpDataset {
 public:
  CrpDataset() = default;
  explicit CrpDataset(CrpMeta meta) : meta_(std::move(meta)) {}

  const CrpMeta& meta() const noexcept { return meta_; }
  CrpMeta& meta() noexcept { return meta_; }
  const std::vector<CrpRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }

  /// Throws DimensionError on width mismatch, InvalidParameter on a duplicate
  /// challenge or non-binary response.
  void add(CrpRecord record);

  /// Challenges as an n x m matrix of ±1 entries.
  template <typename Scalar = double>
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> features() const {
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> x(static_cast<Eigen::Index>(size()),
                                                            static_cast<Eigen::Index>(meta_.m));
    for (std::size_t r = 0; r < size(); ++r) {
      const auto& bits = records_[r].challenge.bits();
      for (std::size_t i = 0; i < bits.size(); ++i)
        x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = bits[i] ? Scalar(1) : Scalar(-1);
    }
    return x;
  }

  /// Responses as a 0/1 vector.
  template <typename Scalar = double>
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> labels() const {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> y(static_cast<Eigen::Index>(size()));
    for (std::size_t r = 0; r < size(); ++r) y[static_cast<Eigen::Index>(r)] = Scalar(records_[r].response);
    return y;
  }

  std::vector<std::uint8_t> responses() const;
  std::vector<Challenge> challenges() const;

  friend bool operator==(const CrpDataset& a, const CrpDataset& b) {
    return a.meta_ == b.meta_ && a.records_ == b.records_;
  }

 private:
  CrpMeta meta_;
  std::vector<CrpRecord> records_;
  std::unordered_set<Challenge, ChallengeHash> seen_;
};

/// Per-challenge outcomes of `iterations` repeated (optionally obfuscated)
/// evaluations. Noise for challenge i comes from substream i.
std::vector<std::vector<EvalOutcome>> evaluate_repeated(const XorPuf& puf, const Obfuscation& obf,
                                                        std::span<const Challenge> challenges,
                                                        unsigned iterations, const NoiseModel& noise,
                                                        double theta);

struct CollectOptions {
  unsigned iterations = 3;
  NoiseModel noise{};
  double theta = 0.0;
  std::uint64_t chip_seed = 0;
  std::uint64_t lfsr_taps = GaloisLfsr::kDefaultTaps;
  std::uint64_t lfsr_seed = 1;
};

/// Keeps a challenge only if all `iterations` evaluations converge; stores the
/// majority bit against the original (pre-obfuscation) challenge.
CrpDataset collect_crps(const XorPuf& puf, const Obfuscation& obf, std::span<const Challenge> challenges,
                        const CollectOptions& opts);

void write_dataset(const CrpDataset& ds, const std::filesystem::path& path);
CrpDataset read_dataset(const std::filesystem::path& path);
void write_dataset(const CrpDataset& ds, std::ostream& out);
CrpDataset read_dataset(std::istream& in);

/// Packed binary form: "CRPD", version byte, little-endian header, bit-packed
/// challenges and responses.
void write_dataset_binary(const CrpDataset& ds, const std::filesystem::path& path);
CrpDataset read_dataset_binary(const std::filesystem::path& path);

/// Disjoint uniform random subsets of the requested sizes.
std::pair<CrpDataset, CrpDataset> split_dataset(const CrpDataset& ds, std::size_t train_size,
                                                std::size_t test_size, std::uint64_t seed);

}  // namespace brpuf
