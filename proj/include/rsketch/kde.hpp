#pragma once

#include <span>

#include "rsketch/lsh.hpp"
#include "rsketch/types.hpp"

namespace rsk {

double euclidean_distance(std::span<const double> a, std::span<const double> b);

/// Exact weighted kernel sum  sum_j alpha_j k(||q - x_j||)  in O(M d).
/// Deliberately the slow trusted reference for every sketch estimate.
double exact_weighted_kde(std::span<const double> q, std::span<const WeightedPoint> points,
                          const KernelConfig& kernel);

/// Same sum with sqrt(k); this is the quantity that scales the
/// median-of-means deviation bound.
double exact_root_kde(std::span<const double> q, std::span<const WeightedPoint> points,
                      const KernelConfig& kernel);

}  // namespace rsk
