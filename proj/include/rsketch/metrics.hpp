#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rsketch/types.hpp"

namespace rsk {

/// Quality plus cost accounting for one model or sketch. All parameters are
/// stored as 64-bit values, so memory_bytes is always params_count * 8.
struct EvalReport {
  std::string metric_name;  ///< "accuracy" or "mae"
  double metric_value = 0.0;
  std::uint64_t params_count = 0;
  std::uint64_t memory_bytes = 0;
  std::uint64_t flops = 0;
};

/// Stored parameters of a sketch deployment: counter array R*L plus the
/// d x p projection matrix.
std::uint64_t sketch_params(std::uint64_t rows, std::uint64_t range, std::uint64_t data_dim,
                            std::uint64_t projected_dim);

/// Per-query floating operations of a sketch deployment:
/// 2*d*p (projection) + p*K*R/3 (sparse hashing) + R (aggregation).
std::uint64_t sketch_flops(std::uint64_t data_dim, std::uint64_t projected_dim,
                           std::uint64_t concat, std::uint64_t range);

/// A dense multilayer perceptron, for accounting only; nothing is executed.
struct MlpSpec {
  std::uint32_t input_dim = 0;
  std::vector<std::uint32_t> hidden;
  std::uint32_t output_dim = 1;
};

/// "512/256/128" -> hidden sizes. Input and output dims come from the caller.
MlpSpec parse_mlp_spec(const std::string& text, std::uint32_t input_dim,
                       std::uint32_t output_dim = 1);

/// Weights plus biases: sum of fan_in*fan_out + fan_out over dense layers.
std::uint64_t mlp_params(const MlpSpec& spec);

/// One multiply-add counted as 2: sum of 2*fan_in*fan_out over dense layers.
std::uint64_t mlp_flops(const MlpSpec& spec);

double reduction_ratio(std::uint64_t nn_quantity, std::uint64_t sketch_quantity);

/// Classification accuracy or regression MAE; accounting fields left zero
/// for the caller to fill.
EvalReport evaluate(std::span<const double> predictions, std::span<const double> labels,
                    Task task);

std::string to_json_line(const EvalReport& report);
std::string to_text_table(const EvalReport& report);

}  // namespace rsk
