#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "rsketch/error.hpp"
#include "rsketch/types.hpp"

namespace rsk {

struct Dataset {
  std::vector<double> features;  ///< rows x dim, row-major dense
  std::vector<double> labels;
  std::uint32_t dim = 0;
  Task task = Task::BinaryClassification;

  std::size_t rows() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * dim, dim};
  }
};

/// Parse sparse text rows "label idx:val idx:val ..." with strictly
/// increasing 1-based indices into a dense matrix; absent indices are 0 and
/// the width is the largest index seen (at least min_dim). Classification
/// labels are normalized to {0,1} with the larger raw label positive; the
/// common {-1,+1}, {0,1} and {1,2} conventions all land there.
Dataset parse_libsvm(std::istream& in, Task task, std::uint32_t min_dim = 0);

/// Same parser over a file that may be plain or gzip-compressed.
Dataset load_libsvm_file(const std::filesystem::path& path, Task task, std::uint32_t min_dim = 0);

void write_libsvm(std::ostream& out, const Dataset& dataset);

struct SplitResult {
  Dataset train;
  Dataset test;
};

/// Seeded disjoint exhaustive split; stratified by label for
/// classification so the test set keeps the class balance within one row.
SplitResult split(const Dataset& dataset, double test_fraction, std::uint64_t seed);

enum class ScalingMode : std::uint8_t { MinMax = 0, ZScore = 1 };

/// Per-feature affine map x' = (x - offset) * scale. Constant features get
/// scale 0 and so map to 0 everywhere.
struct Scaler {
  ScalingMode mode = ScalingMode::MinMax;
  std::vector<double> offset;
  std::vector<double> scale;
};

Scaler scale_fit(const Dataset& dataset, ScalingMode mode);
Dataset scale_apply(const Scaler& scaler, const Dataset& dataset);

}  // namespace rsk
