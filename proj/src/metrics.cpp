#include "rsketch/metrics.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "rsketch/error.hpp"

namespace rsk {

std::uint64_t sketch_params(std::uint64_t rows, std::uint64_t range, std::uint64_t data_dim,
                            std::uint64_t projected_dim) {
  return range * rows + data_dim * projected_dim;
}

std::uint64_t sketch_flops(std::uint64_t data_dim, std::uint64_t projected_dim,
                           std::uint64_t concat, std::uint64_t range) {
  return 2 * data_dim * projected_dim + projected_dim * concat * range / 3 + range;
}

MlpSpec parse_mlp_spec(const std::string& text, std::uint32_t input_dim,
                       std::uint32_t output_dim) {
  MlpSpec spec;
  spec.input_dim = input_dim;
  spec.output_dim = output_dim;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, '/')) {
    if (part.empty()) continue;
    try {
      const unsigned long width = std::stoul(part);
      if (width == 0) throw std::invalid_argument("zero");
      spec.hidden.push_back(static_cast<std::uint32_t>(width));
    } catch (const std::exception&) {
      throw InputError("bad hidden-layer width \"" + part + "\" in MLP spec \"" + text + "\"");
    }
  }
  return spec;
}

namespace {

template <typename PerLayer>
std::uint64_t fold_layers(const MlpSpec& spec, PerLayer per_layer) {
  if (spec.input_dim == 0 || spec.output_dim == 0) {
    throw InputError("MLP spec: input and output dims must be positive");
  }
  std::uint64_t total = 0;
  std::uint64_t fan_in = spec.input_dim;
  for (const std::uint32_t width : spec.hidden) {
    if (width == 0) throw InputError("MLP spec: hidden widths must be positive");
    total += per_layer(fan_in, static_cast<std::uint64_t>(width));
    fan_in = width;
  }
  total += per_layer(fan_in, static_cast<std::uint64_t>(spec.output_dim));
  return total;
}

}  // namespace

std::uint64_t mlp_params(const MlpSpec& spec) {
  return fold_layers(spec, [](std::uint64_t in, std::uint64_t out) { return in * out + out; });
}

std::uint64_t mlp_flops(const MlpSpec& spec) {
  return fold_layers(spec, [](std::uint64_t in, std::uint64_t out) { return 2 * in * out; });
}

double reduction_ratio(std::uint64_t nn_quantity, std::uint64_t sketch_quantity) {
  if (sketch_quantity == 0) throw InputError("reduction ratio: sketch quantity is zero");
  return static_cast<double>(nn_quantity) / static_cast<double>(sketch_quantity);
}

EvalReport evaluate(std::span<const double> predictions, std::span<const double> labels,
                    Task task) {
  if (predictions.size() != labels.size()) {
    throw InputError("evaluate: " + std::to_string(predictions.size()) + " predictions vs " +
                     std::to_string(labels.size()) + " labels");
  }
  EvalReport report;
  const double n = static_cast<double>(labels.size());
  if (task == Task::BinaryClassification) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (predictions[i] == labels[i]) ++correct;
    }
    report.metric_name = "accuracy";
    report.metric_value = labels.empty() ? 0.0 : static_cast<double>(correct) / n;
  } else {
    double acc = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) acc += std::abs(predictions[i] - labels[i]);
    report.metric_name = "mae";
    report.metric_value = labels.empty() ? 0.0 : acc / n;
  }
  return report;
}

std::string to_json_line(const EvalReport& report) {
  nlohmann::json j{
      {"metric", report.metric_name},
      {"value", report.metric_value},
      {"params", report.params_count},
      {"memory_bytes", report.memory_bytes},
      {"flops", report.flops},
  };
  return j.dump();
}

std::string to_text_table(const EvalReport& report) {
  std::ostringstream out;
  out << "metric        " << report.metric_name << " = " << report.metric_value << '\n'
      << "params        " << report.params_count << '\n'
      << "memory        " << report.memory_bytes << " bytes ("
      << static_cast<double>(report.memory_bytes) / 1e6 << " MB)\n"
      << "flops/query   " << report.flops;
  return out.str();
}

}  // namespace rsk
