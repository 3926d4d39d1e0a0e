#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rsketch/error.hpp"
#include "rsketch/rng.hpp"

namespace rsk {

enum class LshFamily : std::uint8_t {
  L2PStable = 0,       ///< h(v) = floor((a.v + b) / r), a ~ N(0, I)
  SignProjection = 1,  ///< h(v) = [a.v > 0]
  SparseSign = 2,      ///< like L2PStable with entries in {-1, 0, +1}, two thirds zero
};

const char* family_name(LshFamily family);

/// Parameters shared by every hash function drawn from one family.
struct LshFamilyConfig {
  LshFamily family = LshFamily::L2PStable;
  double bandwidth_r = 1.0;      ///< quantization width r; unused by SignProjection
  std::uint32_t input_dim = 0;   ///< dimension of hashed vectors
  std::uint64_t seed = 0;        ///< base seed for standalone single-function draws

  friend bool operator==(const LshFamilyConfig&, const LshFamilyConfig&) = default;
};

/// An L x K hash ensemble reduced into [0, R). Every underlying function is
/// a pure function of (master_seed, row, slot), so rows or slots can be
/// appended without disturbing those already drawn.
struct LshEnsembleSpec {
  LshFamilyConfig family_config;
  std::uint32_t rows = 1;      ///< L
  std::uint32_t concat = 1;    ///< K hash functions concatenated per row
  std::uint32_t range = 100;   ///< R buckets per row
  std::uint64_t master_seed = 0;

  friend bool operator==(const LshEnsembleSpec&, const LshEnsembleSpec&) = default;
};

/// The kernel induced by one concatenated row hash: its collision
/// probability as a function of distance.
struct KernelConfig {
  LshFamilyConfig family_config;
  std::uint32_t concat = 1;

  friend bool operator==(const KernelConfig&, const KernelConfig&) = default;
};

void validate(const LshFamilyConfig& config);
void validate(const LshEnsembleSpec& spec);

// ---- raw hash functions ---------------------------------------------------

std::int64_t hash_l2(std::span<const double> v, std::span<const double> a, double b, double r);

/// Same quantization as hash_l2 but with a {-1,0,+1} projection row, so the
/// inner product needs only additions and subtractions.
std::int64_t hash_sparse(std::span<const double> v, std::span<const std::int8_t> sparse_row,
                         double b, double r);

int hash_sign(std::span<const double> v, std::span<const double> a);

/// sum_i row[i] * v[i] evaluated with additions and subtractions only.
/// Generic over the scalar so tests can instantiate it with an
/// operation-counting type and confirm the no-multiply contract.
template <typename T>
T sparse_accumulate(std::span<const std::int8_t> row, std::span<const T> v) {
  T acc{};
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (row[i] > 0) {
      acc += v[i];
    } else if (row[i] < 0) {
      acc -= v[i];
    }
  }
  return acc;
}

// ---- collision-probability kernel ------------------------------------------

/// Collision probability of the p-stable L2 hash at distance c, width r:
///   p(c) = erf(r / (c sqrt(2))) - sqrt(2/pi) (c/r) (1 - exp(-r^2 / (2 c^2)))
/// with p(0) = 1. Strictly decreasing in c, p -> 0 as c -> inf.
double collision_probability(double c, double r);

/// dp/dc of the closed form: -sqrt(2/pi) (1 - exp(-r^2 / (2 c^2))) / r.
/// Taken as 0 at c == 0, the radial maximum.
double collision_probability_derivative(double c, double r);

/// Quantization width the ensemble actually divides by: r for L2PStable,
/// r / sqrt(3) for SparseSign. Sparse entries have variance 1/3, so the
/// narrower width matches the projected-difference scale of the Gaussian
/// family and both families share collision_probability(c, r) as kernel.
double quantization_width(const LshFamilyConfig& config);

/// Collision probability of a K-wise concatenated row hash at distance c.
/// SignProjection assumes unit-norm inputs (angle recovered from chord length).
double kernel_value(double c, const KernelConfig& kernel);
double kernel_distance_derivative(double c, const KernelConfig& kernel);
double effective_row_kernel(double c, const LshEnsembleSpec& spec);

// ---- tuple reduction --------------------------------------------------------

/// Incremental seeded mixer folding a tuple of raw hashes into [0, range).
class TupleHasher {
public:
  explicit TupleHasher(std::uint64_t seed) noexcept : acc_(mix64(seed ^ 0x5bf03635b1a9e1a3ULL)) {}

  void absorb(std::int64_t raw) noexcept {
    acc_ = mix64(acc_ + static_cast<std::uint64_t>(raw) * kSeedStride + 1);
  }

  std::uint32_t finish(std::uint32_t range) const noexcept {
    return static_cast<std::uint32_t>(acc_ % range);
  }

private:
  std::uint64_t acc_;
};

/// Seeded near-uniform map of a K-tuple of raw hashes into [0, range).
std::uint32_t tuple_to_index(std::span<const std::int64_t> raw, std::uint64_t seed,
                             std::uint32_t range);

// ---- ensemble ----------------------------------------------------------------

/// Materialized parameter tables for an LshEnsembleSpec. Immutable after
/// construction and safe to share across any number of threads.
class LshEnsemble {
public:
  explicit LshEnsemble(const LshEnsembleSpec& spec);

  const LshEnsembleSpec& spec() const noexcept { return spec_; }
  std::size_t dim() const noexcept { return dim_; }

  /// Bucket of v in the given row; in [0, range).
  std::uint32_t index(std::span<const double> v, std::uint32_t row) const;

  /// Unreduced hash of one (row, slot) function; exposed for calibration tests.
  std::int64_t raw_hash(std::span<const double> v, std::uint32_t row, std::uint32_t slot) const;

private:
  std::size_t slot_offset(std::uint32_t row, std::uint32_t slot) const noexcept {
    return (static_cast<std::size_t>(row) * spec_.concat + slot);
  }

  LshEnsembleSpec spec_;
  std::size_t dim_ = 0;
  double width_ = 0.0;                    // quantization width (see quantization_width)
  std::vector<double> dense_rows_;        // L*K*p, L2PStable / SignProjection
  std::vector<std::int8_t> sparse_rows_;  // L*K*p, SparseSign
  std::vector<double> offsets_;           // L*K, quantizing families only
  std::vector<std::uint64_t> row_seeds_;  // L tuple-mixer seeds
};

}  // namespace rsk
