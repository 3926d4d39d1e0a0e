#pragma once

#include <cstdint>
#include <vector>

namespace rsk {

enum class Task : std::uint8_t { BinaryClassification = 0, Regression = 1 };

/// A point in the hashed space together with its signed real weight.
struct WeightedPoint {
  std::vector<double> x;
  double alpha = 0.0;

  friend bool operator==(const WeightedPoint&, const WeightedPoint&) = default;
};

}  // namespace rsk
