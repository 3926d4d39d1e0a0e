#include "rsketch/lsh.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace rsk {

namespace {

constexpr double kSqrt2OverPi = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kSqrt3 = 1.7320508075688772;

// Stream tags keep parameter draws and tuple-mixer seeds on disjoint
// sub-seed streams of the same master seed.
constexpr std::uint64_t kStreamHash = 1;
constexpr std::uint64_t kStreamRowMixer = 2;

std::uint64_t hash_stream(std::uint32_t row, std::uint32_t slot) {
  return (kStreamHash << 56) | (static_cast<std::uint64_t>(row) << 24) | slot;
}

std::uint64_t mixer_stream(std::uint32_t row) {
  return (kStreamRowMixer << 56) | row;
}

void check_dims(std::size_t got, std::size_t want, const char* op) {
  if (got != want) {
    throw InputError(std::string(op) + ": dimension mismatch, vector has " + std::to_string(got) +
                     " entries but projection has " + std::to_string(want));
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

std::int64_t quantize(double projection, double offset, double width) {
  return static_cast<std::int64_t>(std::floor((projection + offset) / width));
}

}  // namespace

const char* family_name(LshFamily family) {
  switch (family) {
    case LshFamily::L2PStable: return "l2";
    case LshFamily::SignProjection: return "sign";
    case LshFamily::SparseSign: return "sparse";
  }
  return "unknown";
}

void validate(const LshFamilyConfig& config) {
  if (config.input_dim < 1) {
    throw InputError("hash family: input_dim must be at least 1");
  }
  if (config.family != LshFamily::SignProjection &&
      !(config.bandwidth_r > 0.0 && std::isfinite(config.bandwidth_r))) {
    throw InputError("hash family: bandwidth_r must be positive and finite");
  }
  if (config.family != LshFamily::L2PStable && config.family != LshFamily::SignProjection &&
      config.family != LshFamily::SparseSign) {
    throw InputError("hash family: unknown family tag");
  }
}

void validate(const LshEnsembleSpec& spec) {
  validate(spec.family_config);
  if (spec.rows < 1) throw InputError("hash ensemble: rows_L must be at least 1");
  if (spec.concat < 1) throw InputError("hash ensemble: concat_K must be at least 1");
  if (spec.range < 2) throw InputError("hash ensemble: range_R must be at least 2");
}

std::int64_t hash_l2(std::span<const double> v, std::span<const double> a, double b, double r) {
  check_dims(v.size(), a.size(), "hash_l2");
  if (!(r > 0.0)) throw InputError("hash_l2: width r must be positive");
  return quantize(dot(a, v), b, r);
}

std::int64_t hash_sparse(std::span<const double> v, std::span<const std::int8_t> sparse_row,
                         double b, double r) {
  check_dims(v.size(), sparse_row.size(), "hash_sparse");
  if (!(r > 0.0)) throw InputError("hash_sparse: width r must be positive");
  for (const std::int8_t e : sparse_row) {
    if (e < -1 || e > 1) throw InputError("hash_sparse: projection entries must be in {-1,0,+1}");
  }
  return quantize(sparse_accumulate<double>(sparse_row, v), b, r);
}

int hash_sign(std::span<const double> v, std::span<const double> a) {
  check_dims(v.size(), a.size(), "hash_sign");
  return dot(a, v) > 0.0 ? 1 : 0;
}

double collision_probability(double c, double r) {
  if (!(r > 0.0)) throw InputError("collision_probability: width r must be positive");
  if (!(c >= 0.0)) throw InputError("collision_probability: distance must be nonnegative");
  if (c == 0.0) return 1.0;
  if (std::isinf(c)) return 0.0;
  const double ratio = r / c;
  const double p = std::erf(ratio / std::numbers::sqrt2) -
                   kSqrt2OverPi / ratio * (1.0 - std::exp(-0.5 * ratio * ratio));
  // Clamp the far tail where the two terms cancel to rounding noise.
  return p < 0.0 ? 0.0 : (p > 1.0 ? 1.0 : p);
}

double collision_probability_derivative(double c, double r) {
  if (!(r > 0.0)) throw InputError("collision_probability_derivative: width r must be positive");
  if (!(c >= 0.0)) throw InputError("collision_probability_derivative: distance must be nonnegative");
  if (c == 0.0 || std::isinf(c)) return 0.0;
  const double ratio = r / c;
  return -kSqrt2OverPi * (1.0 - std::exp(-0.5 * ratio * ratio)) / r;
}

double quantization_width(const LshFamilyConfig& config) {
  return config.family == LshFamily::SparseSign ? config.bandwidth_r / kSqrt3
                                                : config.bandwidth_r;
}

namespace {

double sign_kernel_base(double c) {
  // Chord length c between unit vectors: cos(theta) = 1 - c^2 / 2.
  double u = 1.0 - 0.5 * c * c;
  if (u > 1.0) u = 1.0;
  if (u < -1.0) u = -1.0;
  return 1.0 - std::acos(u) / std::numbers::pi;
}

}  // namespace

double kernel_value(double c, const KernelConfig& kernel) {
  if (kernel.concat < 1) throw InputError("kernel_value: concat_K must be at least 1");
  double base;
  switch (kernel.family_config.family) {
    case LshFamily::L2PStable:
    case LshFamily::SparseSign:
      base = collision_probability(c, kernel.family_config.bandwidth_r);
      break;
    case LshFamily::SignProjection:
      if (c < 0.0) throw InputError("kernel_value: distance must be nonnegative");
      base = sign_kernel_base(c);
      break;
    default:
      throw InputError("kernel_value: unknown family tag");
  }
  if (kernel.concat == 1) return base;
  return std::pow(base, static_cast<double>(kernel.concat));
}

double kernel_distance_derivative(double c, const KernelConfig& kernel) {
  if (kernel.concat < 1) throw InputError("kernel_distance_derivative: concat_K must be at least 1");
  const double k = static_cast<double>(kernel.concat);
  switch (kernel.family_config.family) {
    case LshFamily::L2PStable:
    case LshFamily::SparseSign: {
      const double r = kernel.family_config.bandwidth_r;
      const double dp = collision_probability_derivative(c, r);
      if (kernel.concat == 1) return dp;
      const double base = collision_probability(c, r);
      return k * std::pow(base, k - 1.0) * dp;
    }
    case LshFamily::SignProjection: {
      if (c < 0.0) throw InputError("kernel_distance_derivative: distance must be nonnegative");
      if (c == 0.0 || c >= 2.0) return 0.0;
      const double u = 1.0 - 0.5 * c * c;
      const double dtheta_dc = c / std::sqrt(1.0 - u * u);
      const double base = sign_kernel_base(c);
      return -k * std::pow(base, k - 1.0) * dtheta_dc / std::numbers::pi;
    }
    default:
      throw InputError("kernel_distance_derivative: unknown family tag");
  }
}

double effective_row_kernel(double c, const LshEnsembleSpec& spec) {
  return kernel_value(c, KernelConfig{spec.family_config, spec.concat});
}

std::uint32_t tuple_to_index(std::span<const std::int64_t> raw, std::uint64_t seed,
                             std::uint32_t range) {
  if (range < 1) throw InputError("tuple_to_index: range must be at least 1");
  TupleHasher hasher(seed);
  for (const std::int64_t h : raw) hasher.absorb(h);
  return hasher.finish(range);
}

LshEnsemble::LshEnsemble(const LshEnsembleSpec& spec) : spec_(spec) {
  validate(spec_);
  dim_ = spec_.family_config.input_dim;
  const std::size_t functions = static_cast<std::size_t>(spec_.rows) * spec_.concat;
  const bool quantizing = spec_.family_config.family != LshFamily::SignProjection;

  if (quantizing) {
    width_ = quantization_width(spec_.family_config);
    offsets_.resize(functions);
  }
  if (spec_.family_config.family == LshFamily::SparseSign) {
    sparse_rows_.resize(functions * dim_);
  } else {
    dense_rows_.resize(functions * dim_);
  }

  for (std::uint32_t row = 0; row < spec_.rows; ++row) {
    for (std::uint32_t slot = 0; slot < spec_.concat; ++slot) {
      SplitMix64 rng(derive_seed(spec_.master_seed, hash_stream(row, slot)));
      const std::size_t at = slot_offset(row, slot) * dim_;
      if (spec_.family_config.family == LshFamily::SparseSign) {
        for (std::size_t i = 0; i < dim_; ++i) sparse_rows_[at + i] = sparse_sign_entry(rng);
      } else {
        NormalSampler normal;
        for (std::size_t i = 0; i < dim_; ++i) dense_rows_[at + i] = normal(rng);
      }
      if (quantizing) {
        offsets_[slot_offset(row, slot)] = rng.uniform(0.0, width_);
      }
    }
  }

  row_seeds_.resize(spec_.rows);
  for (std::uint32_t row = 0; row < spec_.rows; ++row) {
    row_seeds_[row] = derive_seed(spec_.master_seed, mixer_stream(row));
  }
}

std::int64_t LshEnsemble::raw_hash(std::span<const double> v, std::uint32_t row,
                                   std::uint32_t slot) const {
  if (row >= spec_.rows) throw InputError("ensemble hash: row out of range");
  if (slot >= spec_.concat) throw InputError("ensemble hash: slot out of range");
  check_dims(v.size(), dim_, "ensemble hash");
  const std::size_t fn = slot_offset(row, slot);
  switch (spec_.family_config.family) {
    case LshFamily::L2PStable:
      return quantize(dot({dense_rows_.data() + fn * dim_, dim_}, v), offsets_[fn], width_);
    case LshFamily::SparseSign:
      return quantize(
          sparse_accumulate<double>({sparse_rows_.data() + fn * dim_, dim_}, v),
          offsets_[fn], width_);
    case LshFamily::SignProjection:
      return dot({dense_rows_.data() + fn * dim_, dim_}, v) > 0.0 ? 1 : 0;
  }
  throw InputError("ensemble hash: unknown family tag");
}

std::uint32_t LshEnsemble::index(std::span<const double> v, std::uint32_t row) const {
  if (row >= spec_.rows) throw InputError("ensemble index: row out of range");
  check_dims(v.size(), dim_, "ensemble index");
  TupleHasher hasher(row_seeds_[row]);
  for (std::uint32_t slot = 0; slot < spec_.concat; ++slot) {
    hasher.absorb(raw_hash(v, row, slot));
  }
  return hasher.finish(spec_.range);
}

}  // namespace rsk
