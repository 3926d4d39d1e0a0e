#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rsketch/lsh.hpp"

namespace rsk::verify {

struct SuiteOptions {
  bool quick = false;  ///< fewer trials, loosened tolerances, < 30 s total
  std::uint64_t seed = 0x5eed5eedULL;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Empirical raw-hash collision frequency against the analytic collision
/// probability, at 5 distances spanning [0.1 r, 5 r], within +-0.01
/// absolute (full mode).
CheckResult check_calibration(LshFamily family, const SuiteOptions& options = {});

/// Sample mean of single-row lookups against the exact weighted kernel sum,
/// within 3 standard errors, on a fixed 50-point set and 5 queries.
CheckResult check_unbiasedness(const SuiteOptions& options = {});

/// Sample variance of the single-row estimator against the square of the
/// root-kernel sum, plus 3 sigma of Monte Carlo slack.
CheckResult check_variance_bound(const SuiteOptions& options = {});

/// Median-of-means deviation |Z - f| within 6 f_root sqrt(log(1/0.05)/L)
/// in at least 95% of independent trials at L = 1000.
CheckResult check_mom_coverage(const SuiteOptions& options = {});

std::vector<CheckResult> run_all(const SuiteOptions& options = {});

}  // namespace rsk::verify
