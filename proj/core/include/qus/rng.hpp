#pragma once

#include <cstdint>
#include <utility>

namespace qus {

/// Position of a generator: a (seed, draws-consumed) pair. Two generators
/// with equal states produce identical subsequent draws on every platform.
struct RngState {
  std::uint64_t seed = 0;
  std::uint64_t position = 0;

  friend bool operator==(const RngState&, const RngState&) = default;
};

/// SplitMix64 finalizer (Steele, Lea & Flood). Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

/// Seed of image `index` in a dataset rooted at `base_seed`: the index-th
/// output of a SplitMix64 sequence seeded with base_seed.
constexpr std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t index) noexcept {
  return mix64(base_seed + kGoldenGamma * (index + 1));
}

/// Counter-based SplitMix64 generator.
///
/// The n-th 64-bit output is mix64(seed + (n + 1) * kGoldenGamma), so the
/// state is exactly (seed, n) and any position can be reached in O(1).
/// Only integer arithmetic is involved, which makes the raw stream identical
/// across compilers and platforms. Streams are split by hashing the parent
/// seed with a stream id; parallel workers must each own a split stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t position = 0) noexcept
      : seed_(seed), position_(position) {}
  explicit Rng(RngState state) noexcept : Rng(state.seed, state.position) {}

  RngState state() const noexcept { return {seed_, position_}; }

  std::uint64_t next_u64() noexcept {
    ++position_;
    return mix64(seed_ + position_ * kGoldenGamma);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform on the open interval (0, 1); safe to pass to log().
  double uniform_open() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform integer in [lo, hi] (inclusive). Uses rejection, so unbiased.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) noexcept;

  /// Independent child stream. Does not advance this generator.
  Rng split(std::uint64_t stream_id) const noexcept {
    return Rng(mix64(seed_ ^ mix64(stream_id + kGoldenGamma)));
  }

 private:
  std::uint64_t seed_;
  std::uint64_t position_;
};

/// Two independent standard normal variates (Marsaglia polar method).
std::pair<double, double> standard_normal_pair(Rng& rng) noexcept;

/// Gamma(shape, scale = 1) variate for any shape > 0.
///
/// Marsaglia–Tsang squeeze/rejection for shape >= 1; for shape < 1 the
/// standard boost Gamma(shape) = Gamma(shape + 1) * U^(1/shape) is applied.
double standard_gamma(Rng& rng, double shape);

}  // namespace qus
