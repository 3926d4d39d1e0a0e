#include "rsketch/kde.hpp"

#include <cmath>
#include <string>

namespace rsk {

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw InputError("euclidean_distance: dimension mismatch (" + std::to_string(a.size()) +
                     " vs " + std::to_string(b.size()) + ")");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

namespace {

template <bool Root>
double kernel_sum(std::span<const double> q, std::span<const WeightedPoint> points,
                  const KernelConfig& kernel) {
  double acc = 0.0;
  for (const WeightedPoint& p : points) {
    const double k = kernel_value(euclidean_distance(q, p.x), kernel);
    acc += p.alpha * (Root ? std::sqrt(k) : k);
  }
  return acc;
}

}  // namespace

double exact_weighted_kde(std::span<const double> q, std::span<const WeightedPoint> points,
                          const KernelConfig& kernel) {
  return kernel_sum<false>(q, points, kernel);
}

double exact_root_kde(std::span<const double> q, std::span<const WeightedPoint> points,
                      const KernelConfig& kernel) {
  return kernel_sum<true>(q, points, kernel);
}

}  // namespace rsk
