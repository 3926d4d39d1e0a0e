#include "rsketch/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>

#include "rsketch/fileio.hpp"
#include "rsketch/rng.hpp"

namespace rsk {

namespace {

struct SparseRow {
  double label = 0.0;
  std::vector<std::pair<std::uint32_t, double>> entries;
};

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& why) {
  throw InputError("libsvm parse error at line " + std::to_string(line_no) + ": " + why);
}

double parse_double(std::string_view token, std::size_t line_no, const char* what) {
  double value = 0.0;
  const bool plus = !token.empty() && token.front() == '+';  // from_chars takes only '-'
  const char* begin = token.data() + (plus ? 1 : 0);
  const char* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    parse_fail(line_no, std::string("malformed ") + what + " \"" + std::string(token) + "\"");
  }
  if (!std::isfinite(value)) {
    parse_fail(line_no, std::string(what) + " is not finite");
  }
  return value;
}

SparseRow parse_line(std::string_view line, std::size_t line_no) {
  SparseRow row;
  std::size_t pos = 0;
  const auto next_token = [&]() -> std::string_view {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
    const std::size_t start = pos;
    while (pos < line.size() && line[pos] != ' ' && line[pos] != '\t') ++pos;
    return line.substr(start, pos - start);
  };

  const std::string_view label = next_token();
  if (label.empty()) parse_fail(line_no, "missing label");
  row.label = parse_double(label, line_no, "label");

  std::uint32_t prev_index = 0;
  for (;;) {
    const std::string_view token = next_token();
    if (token.empty()) break;
    const std::size_t colon = token.find(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 == token.size()) {
      parse_fail(line_no, "malformed feature token \"" + std::string(token) + "\"");
    }
    std::uint32_t index = 0;
    {
      const char* begin = token.data();
      const char* end = begin + colon;
      const auto [ptr, ec] = std::from_chars(begin, end, index);
      if (ec != std::errc() || ptr != end) {
        parse_fail(line_no, "malformed feature index \"" + std::string(token.substr(0, colon)) + "\"");
      }
    }
    if (index == 0) parse_fail(line_no, "feature indices are 1-based, found 0");
    if (index <= prev_index) {
      parse_fail(line_no, "feature indices must be strictly increasing, " +
                              std::to_string(index) + " after " + std::to_string(prev_index));
    }
    prev_index = index;
    row.entries.emplace_back(index, parse_double(token.substr(colon + 1), line_no, "feature value"));
  }
  return row;
}

std::vector<double> normalize_labels(const std::vector<double>& raw) {
  std::map<double, std::size_t> distinct;
  for (const double v : raw) distinct[v] = 0;
  if (distinct.size() > 2) {
    throw InputError("classification file has " + std::to_string(distinct.size()) +
                     " distinct labels, expected at most 2");
  }
  std::vector<double> labels(raw.size());
  if (distinct.size() == 2) {
    const double positive = distinct.rbegin()->first;  // larger raw label is positive
    for (std::size_t i = 0; i < raw.size(); ++i) labels[i] = raw[i] == positive ? 1.0 : 0.0;
  } else if (distinct.size() == 1) {
    const double only = distinct.begin()->first;
    std::fill(labels.begin(), labels.end(), only > 0.0 ? 1.0 : 0.0);
  }
  return labels;
}

}  // namespace

Dataset parse_libsvm(std::istream& in, Task task, std::uint32_t min_dim) {
  std::vector<SparseRow> rows;
  std::uint32_t max_index = min_dim;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    // Skip blank lines, keep every other line accountable.
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    rows.push_back(parse_line(line, line_no));
    if (!rows.back().entries.empty()) {
      max_index = std::max(max_index, rows.back().entries.back().first);
    }
  }

  Dataset dataset;
  dataset.task = task;
  dataset.dim = max_index;
  dataset.features.assign(rows.size() * static_cast<std::size_t>(max_index), 0.0);
  std::vector<double> raw_labels(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    raw_labels[i] = rows[i].label;
    double* out = dataset.features.data() + i * max_index;
    for (const auto& [index, value] : rows[i].entries) out[index - 1] = value;
  }
  dataset.labels = task == Task::BinaryClassification ? normalize_labels(raw_labels)
                                                      : std::move(raw_labels);
  return dataset;
}

Dataset load_libsvm_file(const std::filesystem::path& path, Task task, std::uint32_t min_dim) {
  std::istringstream in(read_text_auto(path));
  return parse_libsvm(in, task, min_dim);
}

void write_libsvm(std::ostream& out, const Dataset& dataset) {
  const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < dataset.rows(); ++i) {
    out << dataset.labels[i];
    const std::span<const double> row = dataset.row(i);
    for (std::uint32_t j = 0; j < dataset.dim; ++j) {
      if (row[j] != 0.0) out << ' ' << (j + 1) << ':' << row[j];
    }
    out << '\n';
  }
  out.precision(old_precision);
}

namespace {

Dataset take_rows(const Dataset& dataset, const std::vector<std::size_t>& indices) {
  Dataset out;
  out.dim = dataset.dim;
  out.task = dataset.task;
  out.labels.reserve(indices.size());
  out.features.reserve(indices.size() * static_cast<std::size_t>(dataset.dim));
  for (const std::size_t i : indices) {
    out.labels.push_back(dataset.labels[i]);
    const std::span<const double> row = dataset.row(i);
    out.features.insert(out.features.end(), row.begin(), row.end());
  }
  return out;
}

}  // namespace

SplitResult split(const Dataset& dataset, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw InputError("split: test fraction must be strictly between 0 and 1");
  }
  const std::size_t n = dataset.rows();
  const std::size_t target_test =
      static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));

  std::vector<std::size_t> test_indices;
  if (dataset.task == Task::BinaryClassification) {
    // Largest-remainder quotas keep the total exact and each class within
    // one row of its proportional share.
    std::vector<std::size_t> classes[2];
    for (std::size_t i = 0; i < n; ++i) classes[dataset.labels[i] > 0.5 ? 1 : 0].push_back(i);
    std::size_t base[2];
    double remainder[2];
    std::size_t assigned = 0;
    for (int c = 0; c < 2; ++c) {
      const double quota = static_cast<double>(classes[c].size()) * test_fraction;
      base[c] = static_cast<std::size_t>(quota);
      remainder[c] = quota - static_cast<double>(base[c]);
      assigned += base[c];
    }
    while (assigned < target_test) {
      const int c = remainder[0] >= remainder[1] ? 0 : 1;
      base[c] += 1;
      remainder[c] = -1.0;
      ++assigned;
    }
    for (int c = 0; c < 2; ++c) {
      SplitMix64 rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
      deterministic_shuffle(classes[c], rng);
      test_indices.insert(test_indices.end(), classes[c].begin(),
                          classes[c].begin() + static_cast<std::ptrdiff_t>(
                                                   std::min(base[c], classes[c].size())));
    }
  } else {
    SplitMix64 rng(derive_seed(seed, 0));
    test_indices = sample_indices(n, target_test, rng);
  }

  std::vector<bool> in_test(n, false);
  for (const std::size_t i : test_indices) in_test[i] = true;
  std::vector<std::size_t> train_indices;
  train_indices.reserve(n - test_indices.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (!in_test[i]) train_indices.push_back(i);
  }
  std::sort(test_indices.begin(), test_indices.end());
  return {take_rows(dataset, train_indices), take_rows(dataset, test_indices)};
}

Scaler scale_fit(const Dataset& dataset, ScalingMode mode) {
  const std::uint32_t d = dataset.dim;
  const std::size_t n = dataset.rows();
  Scaler scaler;
  scaler.mode = mode;
  scaler.offset.assign(d, 0.0);
  scaler.scale.assign(d, 0.0);
  if (n == 0) return scaler;

  if (mode == ScalingMode::MinMax) {
    std::vector<double> lo(d, std::numeric_limits<double>::infinity());
    std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < n; ++i) {
      const std::span<const double> row = dataset.row(i);
      for (std::uint32_t j = 0; j < d; ++j) {
        lo[j] = std::min(lo[j], row[j]);
        hi[j] = std::max(hi[j], row[j]);
      }
    }
    for (std::uint32_t j = 0; j < d; ++j) {
      scaler.offset[j] = lo[j];
      scaler.scale[j] = hi[j] > lo[j] ? 1.0 / (hi[j] - lo[j]) : 0.0;
    }
  } else {
    std::vector<double> mean(d, 0.0), sq(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::span<const double> row = dataset.row(i);
      for (std::uint32_t j = 0; j < d; ++j) {
        mean[j] += row[j];
        sq[j] += row[j] * row[j];
      }
    }
    for (std::uint32_t j = 0; j < d; ++j) {
      mean[j] /= static_cast<double>(n);
      const double var = sq[j] / static_cast<double>(n) - mean[j] * mean[j];
      scaler.offset[j] = mean[j];
      scaler.scale[j] = var > 0.0 ? 1.0 / std::sqrt(var) : 0.0;
    }
  }
  return scaler;
}

Dataset scale_apply(const Scaler& scaler, const Dataset& dataset) {
  if (scaler.offset.size() != dataset.dim) {
    throw InputError("scaler: fitted on dimension " + std::to_string(scaler.offset.size()) +
                     ", dataset has " + std::to_string(dataset.dim));
  }
  Dataset out = dataset;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    double* row = out.features.data() + i * out.dim;
    for (std::uint32_t j = 0; j < out.dim; ++j) {
      row[j] = (row[j] - scaler.offset[j]) * scaler.scale[j];
    }
  }
  return out;
}

}  // namespace rsk
