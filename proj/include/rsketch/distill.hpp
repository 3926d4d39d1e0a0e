#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "rsketch/kde.hpp"
#include "rsketch/lsh.hpp"
#include "rsketch/types.hpp"

namespace rsk {

/// A learned weighted kernel representation: anchor points X in the hashed
/// space, signed weights alpha, and an optional data-space-to-hashed-space
/// projection A. Prediction is sum_j alpha_j k(||A^T q - x_j||).
struct KernelModel {
  std::vector<double> points;      ///< M x hashed_dim, row-major
  std::vector<double> alphas;      ///< M
  std::vector<double> projection;  ///< data_dim x hashed_dim, row-major; empty = none
  std::uint32_t data_dim = 0;
  std::uint32_t hashed_dim = 0;
  KernelConfig kernel;

  std::uint32_t size() const noexcept { return static_cast<std::uint32_t>(alphas.size()); }
  bool has_projection() const noexcept { return !projection.empty(); }
  std::span<const double> point(std::uint32_t j) const {
    return {points.data() + static_cast<std::size_t>(j) * hashed_dim, hashed_dim};
  }

  friend bool operator==(const KernelModel&, const KernelModel&) = default;
};

void validate(const KernelModel& model);

enum class InitScheme : std::uint8_t { DataSubsample = 0, GaussianRandom = 1 };

struct DistillConfig {
  std::uint32_t num_points = 100;   ///< M
  std::uint32_t projected_dim = 0;  ///< d'; 0 hashes raw inputs
  double learning_rate = 0.05;
  std::uint32_t epochs = 200;
  std::uint32_t batch_size = 64;
  std::uint64_t seed = 1;
  InitScheme init = InitScheme::DataSubsample;
  double momentum = 0.0;
};

/// Gradient of the squared error (f(q) - y)^2 at one example, with respect
/// to every trainable tensor of the model. `projection` is empty when the
/// model has none.
struct ModelGradients {
  double prediction = 0.0;
  double loss = 0.0;
  std::vector<double> alphas;
  std::vector<double> points;
  std::vector<double> projection;
};

/// Learns a KernelModel from teacher (input, score) pairs by seeded
/// mini-batch gradient descent on mean squared error. Deterministic:
/// identical data and config give bit-identical parameters. When
/// epoch_loss is non-null it receives the full-set training MSE after each
/// epoch, with the pre-training MSE at index 0.
KernelModel fit(std::span<const double> inputs, std::span<const double> targets,
                std::uint32_t dim, const DistillConfig& cfg, const KernelConfig& kernel,
                std::vector<double>* epoch_loss = nullptr);

ModelGradients kernel_gradients(const KernelModel& model, std::span<const double> q, double y);

/// A^T q when the model carries a projection, otherwise q itself.
std::vector<double> project_query(const KernelModel& model, std::span<const double> q);

double predict(const KernelModel& model, std::span<const double> q);

double mse(const KernelModel& model, std::span<const double> inputs,
           std::span<const double> targets, std::uint32_t dim);

/// The model's anchors and weights as hashed-space points, ready to feed a
/// sketch build.
std::vector<WeightedPoint> export_points(const KernelModel& model);

enum class ScoreConvention : std::uint8_t {
  Probability = 0,  ///< positive iff score >= 0.5
  SignValue = 1,    ///< positive iff score >= 0
};

/// Score to output: thresholded label for classification, identity for
/// regression.
double decide(double score, Task task, ScoreConvention convention = ScoreConvention::Probability);

std::vector<std::uint8_t> serialize(const KernelModel& model);
KernelModel deserialize_model(std::span<const std::uint8_t> bytes);
void save_model(const KernelModel& model, const std::filesystem::path& path);
KernelModel load_model(const std::filesystem::path& path);

/// One decimal score per line, line i pairing with dataset row i.
std::vector<double> load_teacher_scores(const std::filesystem::path& path,
                                        std::size_t expected_rows);

/// Median pairwise distance over a subsample of at most max_points rows;
/// the base unit of the bandwidth grid search.
double median_pairwise_distance(std::span<const double> inputs, std::uint32_t dim,
                                std::size_t max_points, std::uint64_t seed);

}  // namespace rsk
