#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "rsketch/lsh.hpp"
#include "rsketch/types.hpp"

namespace rsk {

enum class Estimator : std::uint8_t { Mean = 0, MedianOfMeans = 1 };

struct EstimateResult {
  double value = 0.0;
  std::vector<double> per_row;  ///< counter value hit in each row, in row order
  Estimator estimator = Estimator::Mean;
  std::uint32_t groups = 1;
};

/// Largest divisor of `rows` not exceeding 8 * ceil(log(1/0.05)) = 24; the
/// default group count for median-of-means queries.
std::uint32_t default_groups(std::uint32_t rows);

/// An L x R array of floating counters plus the hash ensemble that indexes
/// it. Adding a point x with weight alpha adds alpha to one cell per row;
/// a row lookup at a query is then an unbiased estimate of the weighted
/// kernel sum over everything inserted.
///
/// The sketch optionally carries a projection matrix A (data_dim x
/// hashed_dim). When present, inserted points live in the hashed space
/// while queries arrive in the data space and are mapped through A^T
/// first. Construction normalizes family_config.seed to master_seed so
/// serialization round-trips are exact.
class RepresenterSketch {
public:
  explicit RepresenterSketch(const LshEnsembleSpec& spec);
  RepresenterSketch(const LshEnsembleSpec& spec, std::vector<double> projection,
                    std::uint32_t data_dim);

  static RepresenterSketch build(std::span<const WeightedPoint> points,
                                 const LshEnsembleSpec& spec);
  static RepresenterSketch build(std::span<const WeightedPoint> points,
                                 const LshEnsembleSpec& spec, std::vector<double> projection,
                                 std::uint32_t data_dim, unsigned threads = 1);

  void add(std::span<const double> x, double alpha);
  void add(const WeightedPoint& point) { add(point.x, point.alpha); }

  /// Cell-wise accumulate of a sketch with an identical spec and projection.
  void merge(const RepresenterSketch& other);

  EstimateResult query_mean(std::span<const double> q) const;

  /// Median-of-means over `groups` contiguous row blocks; groups must
  /// divide rows. groups == 1 reproduces query_mean bit for bit.
  EstimateResult query_mom(std::span<const double> q, std::uint32_t groups) const;

  const LshEnsembleSpec& spec() const noexcept { return spec_; }
  const LshEnsemble& ensemble() const noexcept { return *ensemble_; }
  std::span<const double> counters() const noexcept { return counters_; }
  double counter(std::uint32_t row, std::uint32_t column) const;
  double row_sum(std::uint32_t row) const;
  double total_weight() const noexcept { return total_weight_; }
  std::uint64_t count() const noexcept { return count_; }

  bool has_projection() const noexcept { return !projection_.empty(); }
  std::span<const double> projection() const noexcept { return projection_; }
  std::uint32_t data_dim() const noexcept { return data_dim_; }
  std::uint32_t hashed_dim() const noexcept { return spec_.family_config.input_dim; }

  /// Stored floats: L*R counters plus the projection matrix if present.
  std::uint64_t parameter_count() const noexcept;

  std::vector<std::uint8_t> serialize() const;
  static RepresenterSketch deserialize(std::span<const std::uint8_t> bytes);
  void save(const std::filesystem::path& path) const;
  static RepresenterSketch load(const std::filesystem::path& path);

  friend bool operator==(const RepresenterSketch& a, const RepresenterSketch& b);

private:
  /// Counter values hit by q, one per row. q is projected first when a
  /// projection is configured.
  void lookup_rows(std::span<const double> q, std::span<double> out) const;
  std::vector<double> apply_projection(std::span<const double> q) const;

  LshEnsembleSpec spec_;
  std::shared_ptr<const LshEnsemble> ensemble_;
  std::vector<double> counters_;    // rows x range, row-major
  std::vector<double> projection_;  // data_dim x hashed_dim, row-major; empty = none
  std::uint32_t data_dim_ = 0;
  double total_weight_ = 0.0;
  std::uint64_t count_ = 0;
};

RepresenterSketch merge(const RepresenterSketch& a, const RepresenterSketch& b);

}  // namespace rsk
