#include "rsketch/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rsketch/kde.hpp"
#include "rsketch/rng.hpp"
#include "rsketch/sketch.hpp"

namespace rsk::verify {

namespace {

constexpr std::uint64_t kStreamFixture = 11;
constexpr std::uint64_t kStreamTrials = 12;
constexpr std::uint64_t kStreamDraws = 13;

/// Fixed weighted point set (50 points, d = 5, weights in [0, 2]) and five
/// queries at staggered typical distances; all the estimator suites run
/// against this one fixture.
struct Fixture {
  std::vector<WeightedPoint> points;
  std::vector<std::vector<double>> queries;
  LshEnsembleSpec base_spec;
  KernelConfig kernel;
};

Fixture make_fixture(std::uint64_t seed) {
  constexpr std::size_t kPoints = 50;
  constexpr std::uint32_t kDim = 5;

  Fixture f;
  SplitMix64 rng(derive_seed(seed, kStreamFixture));
  NormalSampler normal;
  f.points.reserve(kPoints);
  for (std::size_t i = 0; i < kPoints; ++i) {
    WeightedPoint p;
    p.x.resize(kDim);
    for (double& v : p.x) v = normal(rng);
    p.alpha = rng.uniform(0.0, 2.0);
    f.points.push_back(std::move(p));
  }

  // One query on top of a data point, the rest at increasing spread.
  f.queries.push_back(f.points[0].x);
  for (const double scale : {0.5, 1.0, 1.5, 2.5}) {
    std::vector<double> q(kDim);
    for (double& v : q) v = normal(rng) * scale;
    f.queries.push_back(std::move(q));
  }

  f.base_spec.family_config = LshFamilyConfig{LshFamily::L2PStable, 3.0, kDim, seed};
  f.base_spec.rows = 1;
  f.base_spec.concat = 2;
  f.base_spec.range = 2000;
  f.base_spec.master_seed = seed;
  f.kernel = KernelConfig{f.base_spec.family_config, f.base_spec.concat};
  return f;
}

/// values[q][t] = single-row lookup S[h(q)] of trial t, with a fresh
/// independent hash function per trial.
std::vector<std::vector<double>> row_samples(const Fixture& f, std::size_t trials,
                                             std::uint64_t seed) {
  std::vector<std::vector<double>> values(f.queries.size(), std::vector<double>(trials));
  for (std::size_t t = 0; t < trials; ++t) {
    LshEnsembleSpec spec = f.base_spec;
    spec.master_seed = derive_seed(seed, (kStreamTrials << 32) | t);
    spec.family_config.seed = spec.master_seed;
    const RepresenterSketch sketch = RepresenterSketch::build(f.points, spec);
    for (std::size_t q = 0; q < f.queries.size(); ++q) {
      values[q][t] = sketch.query_mean(f.queries[q]).value;
    }
  }
  return values;
}

struct Moments {
  double mean = 0.0;
  double var = 0.0;  // unbiased
  double m4 = 0.0;   // central fourth moment
};

Moments moments(const std::vector<double>& xs) {
  Moments m;
  const double n = static_cast<double>(xs.size());
  for (const double x : xs) m.mean += x;
  m.mean /= n;
  for (const double x : xs) {
    const double d = x - m.mean;
    m.var += d * d;
    m.m4 += d * d * d * d;
  }
  m.var /= n - 1.0;
  m.m4 /= n;
  return m;
}

std::string format_double(double v) {
  std::ostringstream out;
  out.precision(4);
  out << v;
  return out.str();
}

}  // namespace

CheckResult check_calibration(LshFamily family, const SuiteOptions& options) {
  const std::size_t draws = options.quick ? 20000 : 100000;
  const double tolerance = options.quick ? 0.02 : 0.01;
  const double r = 2.0;
  const double multipliers[] = {0.1, 0.5, 1.0, 2.5, 5.0};

  // L2 collision probability is exact in any dimension; the sparse family
  // matches it through the central limit theorem, which needs the
  // difference vector spread over many coordinates. The chosen entry
  // distribution is kurtosis-matched to the Gaussian, so p = 256 is ample.
  const std::uint32_t dim = family == LshFamily::L2PStable ? 8 : 256;
  const LshFamilyConfig config{family, r, dim, options.seed};

  SplitMix64 rng(derive_seed(options.seed, (kStreamDraws << 32) | static_cast<std::uint64_t>(family)));
  NormalSampler normal;

  double worst = 0.0;
  std::ostringstream detail;
  for (const double mult : multipliers) {
    double c = mult * r;
    std::vector<double> x(dim, 0.0), y(dim);
    if (family == LshFamily::SignProjection) {
      // Unit vectors at the angle whose chord length is c; cap below the
      // antipodal chord.
      c = std::min(c, 1.9);
      const double theta = std::acos(1.0 - 0.5 * c * c);
      x.assign(dim, 0.0);
      y.assign(dim, 0.0);
      x[0] = 1.0;
      y[0] = std::cos(theta);
      y[1] = std::sin(theta);
    } else {
      double norm = 0.0;
      for (double& v : y) {
        v = normal(rng);
        norm += v * v;
      }
      norm = std::sqrt(norm);
      for (double& v : y) v = v / norm * c;
    }

    const double width = quantization_width(config);
    std::size_t collisions = 0;
    std::vector<double> a(dim);
    std::vector<std::int8_t> sparse(dim);
    for (std::size_t t = 0; t < draws; ++t) {
      switch (family) {
        case LshFamily::L2PStable: {
          for (double& v : a) v = normal(rng);
          const double b = rng.uniform(0.0, width);
          collisions += hash_l2(x, a, b, width) == hash_l2(y, a, b, width);
          break;
        }
        case LshFamily::SparseSign: {
          for (std::int8_t& v : sparse) v = sparse_sign_entry(rng);
          const double b = rng.uniform(0.0, width);
          collisions += hash_sparse(x, sparse, b, width) == hash_sparse(y, sparse, b, width);
          break;
        }
        case LshFamily::SignProjection: {
          for (double& v : a) v = normal(rng);
          collisions += hash_sign(x, a) == hash_sign(y, a);
          break;
        }
      }
    }

    const double frequency = static_cast<double>(collisions) / static_cast<double>(draws);
    const double expected = kernel_value(c, KernelConfig{config, 1});
    worst = std::max(worst, std::abs(frequency - expected));
  }

  detail << "family " << family_name(family) << ", max |freq - analytic| = "
         << format_double(worst) << " (limit " << tolerance << ")";
  return {std::string("lsh-calibration-") + family_name(family), worst <= tolerance,
          detail.str()};
}

CheckResult check_unbiasedness(const SuiteOptions& options) {
  const Fixture f = make_fixture(options.seed);
  const std::size_t trials = options.quick ? 2000 : 10000;
  const auto values = row_samples(f, trials, options.seed);

  double worst_z = 0.0;
  for (std::size_t q = 0; q < f.queries.size(); ++q) {
    const Moments m = moments(values[q]);
    const double expected = exact_weighted_kde(f.queries[q], f.points, f.kernel);
    const double se = std::sqrt(m.var / static_cast<double>(trials));
    worst_z = std::max(worst_z, std::abs(m.mean - expected) / se);
  }

  std::ostringstream detail;
  detail << trials << " single-row sketches, 5 queries, max |mean - kde| = "
         << format_double(worst_z) << " standard errors (limit 3)";
  return {"row-estimator-unbiasedness", worst_z <= 3.0, detail.str()};
}

CheckResult check_variance_bound(const SuiteOptions& options) {
  const Fixture f = make_fixture(options.seed);
  const std::size_t trials = options.quick ? 2000 : 10000;
  const auto values = row_samples(f, trials, options.seed);

  bool passed = true;
  double worst_excess = -1e300;
  for (std::size_t q = 0; q < f.queries.size(); ++q) {
    const Moments m = moments(values[q]);
    const double root = exact_root_kde(f.queries[q], f.points, f.kernel);
    const double bound = root * root;
    const double var_se = std::sqrt(std::max(0.0, m.m4 - m.var * m.var) /
                                    static_cast<double>(trials));
    const double excess = m.var - (bound + 3.0 * var_se);
    worst_excess = std::max(worst_excess, excess);
    passed = passed && excess <= 0.0;
  }

  std::ostringstream detail;
  detail << "sample variance vs (sum alpha sqrt(k))^2 + 3 sigma slack, worst margin = "
         << format_double(worst_excess) << " (<= 0 passes)";
  return {"row-estimator-variance-bound", passed, detail.str()};
}

CheckResult check_mom_coverage(const SuiteOptions& options) {
  const Fixture f = make_fixture(options.seed);
  const std::size_t trials = options.quick ? 200 : 1000;
  constexpr std::uint32_t kRows = 1000;
  constexpr double kDelta = 0.05;
  const std::uint32_t groups = default_groups(kRows);

  LshEnsembleSpec spec = f.base_spec;
  spec.rows = kRows;
  spec.range = 1000;

  const std::vector<double>& query = f.queries[1];
  const double expected = exact_weighted_kde(query, f.points, f.kernel);
  const double bound = 6.0 * exact_root_kde(query, f.points, f.kernel) *
                       std::sqrt(std::log(1.0 / kDelta) / static_cast<double>(kRows));

  std::size_t hits = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    spec.master_seed = derive_seed(options.seed, (kStreamTrials << 32) | (0x80000000ULL + t));
    spec.family_config.seed = spec.master_seed;
    const RepresenterSketch sketch = RepresenterSketch::build(f.points, spec);
    const double z = sketch.query_mom(query, groups).value;
    hits += std::abs(z - expected) <= bound;
  }

  const double coverage = static_cast<double>(hits) / static_cast<double>(trials);
  std::ostringstream detail;
  detail << "L = " << kRows << ", g = " << groups << ", coverage " << hits << "/" << trials
         << " = " << format_double(coverage) << " (needs >= 0.95)";
  return {"median-of-means-coverage", coverage >= 0.95, detail.str()};
}

std::vector<CheckResult> run_all(const SuiteOptions& options) {
  return {
      check_calibration(LshFamily::L2PStable, options),
      check_calibration(LshFamily::SparseSign, options),
      check_calibration(LshFamily::SignProjection, options),
      check_unbiasedness(options),
      check_variance_bound(options),
      check_mom_coverage(options),
  };
}

}  // namespace rsk::verify
