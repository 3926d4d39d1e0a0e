#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace rsk {

inline constexpr std::uint64_t kSeedStride = 0x9e3779b97f4a7c15ULL;

/// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Sub-seed for a named stream under one master seed. Streams are stable:
/// stream k always yields the same sub-seed no matter how many other
/// streams exist, so an ensemble can grow without reshuffling the
/// functions already drawn.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept {
  return mix64(master + (stream + 1) * kSeedStride);
}

/// Counter-based SplitMix64 engine. Fully specified here (no
/// std::*_distribution) so that draws are bit-identical across platforms
/// and standard libraries.
class SplitMix64 {
public:
  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t next() noexcept {
    state_ += kSeedStride;
    return mix64(state_);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * next_double(); }

  /// Uniform integer in [0, bound) without modulo bias.
  std::uint64_t below(std::uint64_t bound) noexcept {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % bound;
    }
  }

private:
  std::uint64_t state_;
};

/// Box-Muller standard normal sampler over SplitMix64.
class NormalSampler {
public:
  double operator()(SplitMix64& rng) {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - rng.next_double();  // (0, 1]
    const double u2 = rng.next_double();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * std::numbers::pi * u2;
    spare_ = mag * std::sin(ang);
    has_spare_ = true;
    return mag * std::cos(ang);
  }

private:
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// One sparse projection entry: +1 w.p. 1/6, -1 w.p. 1/6, 0 w.p. 2/3.
inline std::int8_t sparse_sign_entry(SplitMix64& rng) noexcept {
  const double u = rng.next_double();
  if (u < 1.0 / 6.0) return 1;
  if (u < 1.0 / 3.0) return -1;
  return 0;
}

/// Fisher-Yates shuffle driven by SplitMix64 (std::shuffle is
/// implementation-defined).
template <typename T>
void deterministic_shuffle(std::vector<T>& values, SplitMix64& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    std::swap(values[i - 1], values[rng.below(i)]);
  }
}

/// First `count` entries of a shuffled [0, n) index range.
inline std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count, SplitMix64& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  deterministic_shuffle(idx, rng);
  idx.resize(count < n ? count : n);
  return idx;
}

}  // namespace rsk
