#include "rsketch/distill.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <string>

#include "rsketch/fileio.hpp"
#include "rsketch/rng.hpp"

namespace rsk {

namespace {

constexpr char kModelMagic[5] = "RKMD";
constexpr std::uint32_t kModelVersion = 1;
constexpr double kDistanceFloor = 1e-12;  // chain-rule guard at coincident points

constexpr std::uint64_t kStreamProjection = 1;
constexpr std::uint64_t kStreamAnchors = 2;
constexpr std::uint64_t kStreamAlphas = 3;
constexpr std::uint64_t kStreamEpoch = 4;

void check_query_dim(const KernelModel& model, std::size_t got) {
  if (got != model.data_dim) {
    throw InputError("model: query has " + std::to_string(got) + " entries, model expects " +
                     std::to_string(model.data_dim));
  }
}

bool all_finite(std::span<const double> values) {
  for (const double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

struct GradientScratch {
  std::vector<double> z;
  std::vector<double> gz;
  std::vector<double> dists;
  std::vector<double> kvals;
};

/// Accumulates the gradient of scale * (f(q) - y)^2 into the provided
/// buffers. Shared by single-example kernel_gradients and the mini-batch
/// loop so both code paths differentiate the exact same expression.
double accumulate_gradients(const KernelModel& model, std::span<const double> q, double y,
                            double scale, std::span<double> g_alphas, std::span<double> g_points,
                            std::span<double> g_projection, GradientScratch& scratch) {
  const std::uint32_t m = model.size();
  const std::uint32_t dh = model.hashed_dim;

  std::vector<double>& z_scratch = scratch.z;
  z_scratch.assign(dh, 0.0);
  if (model.has_projection()) {
    for (std::uint32_t i = 0; i < model.data_dim; ++i) {
      const double qi = q[i];
      const double* arow = model.projection.data() + static_cast<std::size_t>(i) * dh;
      for (std::uint32_t j = 0; j < dh; ++j) z_scratch[j] += arow[j] * qi;
    }
  } else {
    z_scratch.assign(q.begin(), q.end());
  }

  double f = 0.0;
  std::vector<double>& gz_scratch = scratch.gz;
  gz_scratch.assign(dh, 0.0);
  const double* z = z_scratch.data();

  std::vector<double>& dists = scratch.dists;
  std::vector<double>& kvals = scratch.kvals;
  dists.resize(m);
  kvals.resize(m);
  for (std::uint32_t j = 0; j < m; ++j) {
    const double* xj = model.points.data() + static_cast<std::size_t>(j) * dh;
    double acc = 0.0;
    for (std::uint32_t t = 0; t < dh; ++t) {
      const double d = z[t] - xj[t];
      acc += d * d;
    }
    dists[j] = std::sqrt(acc);
    kvals[j] = kernel_value(dists[j], model.kernel);
    f += model.alphas[j] * kvals[j];
  }

  const double residual = f - y;
  const double coeff = 2.0 * residual * scale;

  for (std::uint32_t j = 0; j < m; ++j) {
    g_alphas[j] += coeff * kvals[j];
    if (dists[j] == 0.0) continue;  // radial maximum: zero distance gradient
    const double kd = kernel_distance_derivative(dists[j], model.kernel);
    const double factor =
        coeff * model.alphas[j] * kd / std::max(dists[j], kDistanceFloor);
    const double* xj = model.points.data() + static_cast<std::size_t>(j) * dh;
    double* gx = g_points.data() + static_cast<std::size_t>(j) * dh;
    for (std::uint32_t t = 0; t < dh; ++t) {
      const double diff = xj[t] - z[t];  // d c / d x_j = (x_j - z) / c
      gx[t] += factor * diff;
      gz_scratch[t] -= factor * diff;
    }
  }

  if (model.has_projection()) {
    for (std::uint32_t i = 0; i < model.data_dim; ++i) {
      const double qi = q[i];
      double* ga = g_projection.data() + static_cast<std::size_t>(i) * dh;
      for (std::uint32_t j = 0; j < dh; ++j) ga[j] += qi * gz_scratch[j];
    }
  }
  return f;
}

}  // namespace

void validate(const KernelModel& model) {
  if (model.size() < 1) throw InputError("model: needs at least one anchor point");
  if (model.hashed_dim < 1 || model.data_dim < 1) {
    throw InputError("model: dimensions must be positive");
  }
  if (model.points.size() != static_cast<std::size_t>(model.size()) * model.hashed_dim) {
    throw InputError("model: anchor matrix shape mismatch");
  }
  if (model.has_projection()) {
    if (model.projection.size() !=
        static_cast<std::size_t>(model.data_dim) * model.hashed_dim) {
      throw InputError("model: projection shape mismatch");
    }
    if (model.hashed_dim > model.data_dim) {
      throw InputError("model: projection must not raise the dimension");
    }
  } else if (model.data_dim != model.hashed_dim) {
    throw InputError("model: without projection, data_dim must equal hashed_dim");
  }
  if (!all_finite(model.points) || !all_finite(model.alphas) || !all_finite(model.projection)) {
    throw InputError("model: parameters must be finite");
  }
  if (model.kernel.family_config.input_dim != model.hashed_dim) {
    throw InputError("model: kernel input_dim must equal hashed_dim");
  }
  validate(model.kernel.family_config);
}

ModelGradients kernel_gradients(const KernelModel& model, std::span<const double> q, double y) {
  check_query_dim(model, q.size());
  ModelGradients g;
  g.alphas.assign(model.alphas.size(), 0.0);
  g.points.assign(model.points.size(), 0.0);
  g.projection.assign(model.projection.size(), 0.0);
  GradientScratch scratch;
  g.prediction = accumulate_gradients(model, q, y, 1.0, g.alphas, g.points, g.projection, scratch);
  const double residual = g.prediction - y;
  g.loss = residual * residual;
  return g;
}

std::vector<double> project_query(const KernelModel& model, std::span<const double> q) {
  check_query_dim(model, q.size());
  if (!model.has_projection()) return {q.begin(), q.end()};
  std::vector<double> z(model.hashed_dim, 0.0);
  for (std::uint32_t i = 0; i < model.data_dim; ++i) {
    const double qi = q[i];
    const double* arow = model.projection.data() + static_cast<std::size_t>(i) * model.hashed_dim;
    for (std::uint32_t j = 0; j < model.hashed_dim; ++j) z[j] += arow[j] * qi;
  }
  return z;
}

double predict(const KernelModel& model, std::span<const double> q) {
  const std::vector<double> z = project_query(model, q);
  double f = 0.0;
  for (std::uint32_t j = 0; j < model.size(); ++j) {
    f += model.alphas[j] * kernel_value(euclidean_distance(z, model.point(j)), model.kernel);
  }
  return f;
}

double mse(const KernelModel& model, std::span<const double> inputs,
           std::span<const double> targets, std::uint32_t dim) {
  if (targets.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double e = predict(model, inputs.subspan(i * dim, dim)) - targets[i];
    acc += e * e;
  }
  return acc / static_cast<double>(targets.size());
}

KernelModel fit(std::span<const double> inputs, std::span<const double> targets,
                std::uint32_t dim, const DistillConfig& cfg, const KernelConfig& kernel,
                std::vector<double>* epoch_loss) {
  const std::size_t n = targets.size();
  if (n == 0) throw InputError("fit: teacher set is empty");
  if (dim == 0 || inputs.size() != n * dim) {
    throw InputError("fit: inputs must be " + std::to_string(n) + " rows of dimension " +
                     std::to_string(dim));
  }
  if (cfg.num_points < 1) throw InputError("fit: num_points_M must be at least 1");
  if (!(cfg.learning_rate > 0.0)) throw InputError("fit: learning rate must be positive");
  if (cfg.epochs < 1) throw InputError("fit: epochs must be at least 1");
  if (cfg.batch_size < 1) throw InputError("fit: batch size must be at least 1");
  if (cfg.projected_dim > dim) {
    throw InputError("fit: projected_dim must not exceed the input dimension");
  }
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) {
    throw InputError("fit: momentum must lie in [0, 1)");
  }
  if (!all_finite(inputs) || !all_finite(targets)) {
    throw InputError("fit: teacher inputs and targets must be finite");
  }

  KernelModel model;
  model.data_dim = dim;
  model.hashed_dim = cfg.projected_dim > 0 ? cfg.projected_dim : dim;
  model.kernel = kernel;
  model.kernel.family_config.input_dim = model.hashed_dim;

  const std::uint32_t m = cfg.num_points;
  const std::uint32_t dh = model.hashed_dim;

  if (cfg.projected_dim > 0) {
    SplitMix64 rng(derive_seed(cfg.seed, kStreamProjection));
    NormalSampler normal;
    model.projection.resize(static_cast<std::size_t>(dim) * dh);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
    for (double& v : model.projection) v = normal(rng) * scale;
  }

  model.points.resize(static_cast<std::size_t>(m) * dh);
  {
    SplitMix64 rng(derive_seed(cfg.seed, kStreamAnchors));
    if (cfg.init == InitScheme::DataSubsample) {
      if (m > n) {
        throw InputError("fit: DataSubsample init needs num_points_M <= teacher rows (" +
                         std::to_string(m) + " > " + std::to_string(n) + ")");
      }
      const std::vector<std::size_t> picks = sample_indices(n, m, rng);
      for (std::uint32_t j = 0; j < m; ++j) {
        const std::vector<double> z = project_query(model, inputs.subspan(picks[j] * dim, dim));
        std::copy(z.begin(), z.end(), model.points.begin() + static_cast<std::size_t>(j) * dh);
      }
    } else {
      NormalSampler normal;
      for (double& v : model.points) v = normal(rng);
    }
  }
  {
    SplitMix64 rng(derive_seed(cfg.seed, kStreamAlphas));
    model.alphas.resize(m);
    for (double& a : model.alphas) a = rng.uniform(-0.01, 0.01);
  }
  validate(model);

  if (epoch_loss != nullptr) {
    epoch_loss->clear();
    epoch_loss->push_back(mse(model, inputs, targets, dim));
  }

  std::vector<double> g_alphas(model.alphas.size());
  std::vector<double> g_points(model.points.size());
  std::vector<double> g_projection(model.projection.size());
  std::vector<double> v_alphas(model.alphas.size(), 0.0);
  std::vector<double> v_points(model.points.size(), 0.0);
  std::vector<double> v_projection(model.projection.size(), 0.0);
  GradientScratch scratch;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  const auto apply_update = [&](std::vector<double>& param, std::vector<double>& velocity,
                                const std::vector<double>& grad) {
    if (cfg.momentum > 0.0) {
      for (std::size_t i = 0; i < param.size(); ++i) {
        velocity[i] = cfg.momentum * velocity[i] - cfg.learning_rate * grad[i];
        param[i] += velocity[i];
      }
    } else {
      for (std::size_t i = 0; i < param.size(); ++i) param[i] -= cfg.learning_rate * grad[i];
    }
  };

  for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    SplitMix64 shuffle_rng(derive_seed(cfg.seed, (kStreamEpoch << 32) | epoch));
    deterministic_shuffle(order, shuffle_rng);

    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(stop - start);
      std::fill(g_alphas.begin(), g_alphas.end(), 0.0);
      std::fill(g_points.begin(), g_points.end(), 0.0);
      std::fill(g_projection.begin(), g_projection.end(), 0.0);
      for (std::size_t i = start; i < stop; ++i) {
        const std::size_t row = order[i];
        accumulate_gradients(model, inputs.subspan(row * dim, dim), targets[row], scale,
                             g_alphas, g_points, g_projection, scratch);
      }
      apply_update(model.alphas, v_alphas, g_alphas);
      apply_update(model.points, v_points, g_points);
      if (model.has_projection()) apply_update(model.projection, v_projection, g_projection);
      if (!all_finite(model.alphas) || !all_finite(model.points) ||
          !all_finite(model.projection)) {
        throw TrainingError("training diverged to non-finite parameters", epoch);
      }
    }

    const double loss = mse(model, inputs, targets, dim);
    if (!std::isfinite(loss)) {
      throw TrainingError("training loss diverged to a non-finite value", epoch);
    }
    if (epoch_loss != nullptr) epoch_loss->push_back(loss);
  }
  return model;
}

std::vector<WeightedPoint> export_points(const KernelModel& model) {
  std::vector<WeightedPoint> points;
  points.reserve(model.size());
  for (std::uint32_t j = 0; j < model.size(); ++j) {
    const std::span<const double> x = model.point(j);
    points.push_back(WeightedPoint{{x.begin(), x.end()}, model.alphas[j]});
  }
  return points;
}

double decide(double score, Task task, ScoreConvention convention) {
  if (!std::isfinite(score)) throw InputError("decide: score must be finite");
  if (task == Task::Regression) return score;
  switch (convention) {
    case ScoreConvention::Probability:
      return score >= 0.5 ? 1.0 : 0.0;
    case ScoreConvention::SignValue:
      return score >= 0.0 ? 1.0 : 0.0;
  }
  throw ConfigError("decide: unknown score convention");
}

std::vector<std::uint8_t> serialize(const KernelModel& model) {
  ByteWriter w;
  w.magic(kModelMagic);
  w.u32(kModelVersion);
  w.u32(model.size());
  w.u32(model.data_dim);
  w.u32(model.has_projection() ? model.hashed_dim : 0);
  w.u32(model.kernel.concat);
  w.u8(static_cast<std::uint8_t>(model.kernel.family_config.family));
  w.pad(3);
  w.u64(model.kernel.family_config.seed);
  w.f64(model.kernel.family_config.bandwidth_r);
  for (const double v : model.alphas) w.f64(v);
  for (const double v : model.points) w.f64(v);
  for (const double v : model.projection) w.f64(v);
  return w.take();
}

KernelModel deserialize_model(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic(kModelMagic, "model header");

  const std::size_t version_at = r.offset();
  const std::uint32_t version = r.u32("model version");
  if (version != kModelVersion) {
    throw FormatError("unsupported model format version " + std::to_string(version), version_at);
  }

  KernelModel model;
  const std::uint32_t m = r.u32("num_points_M");
  const std::uint32_t data_dim = r.u32("data_dim");
  const std::uint32_t projected_dim = r.u32("projected_dim");
  model.data_dim = data_dim;
  model.hashed_dim = projected_dim > 0 ? projected_dim : data_dim;
  model.kernel.concat = r.u32("concat_K");

  const std::size_t family_at = r.offset();
  const std::uint8_t family = r.u8("family");
  if (family > 2) throw FormatError("unknown hash family tag " + std::to_string(family), family_at);
  model.kernel.family_config.family = static_cast<LshFamily>(family);
  r.skip(3, "header padding");
  model.kernel.family_config.seed = r.u64("kernel seed");
  model.kernel.family_config.bandwidth_r = r.f64("bandwidth_r");
  model.kernel.family_config.input_dim = model.hashed_dim;

  const std::uint64_t floats = static_cast<std::uint64_t>(m) * model.hashed_dim + m +
                               (projected_dim > 0
                                    ? static_cast<std::uint64_t>(data_dim) * projected_dim
                                    : 0);
  if (r.remaining() < floats * 8) {
    throw FormatError("truncated while reading model tensors", bytes.size());
  }

  model.alphas.resize(m);
  r.f64_block(model.alphas, "alpha vector");
  model.points.resize(static_cast<std::size_t>(m) * model.hashed_dim);
  r.f64_block(model.points, "anchor matrix");
  if (projected_dim > 0) {
    model.projection.resize(static_cast<std::size_t>(data_dim) * projected_dim);
    r.f64_block(model.projection, "projection matrix");
  }
  r.expect_end("model tensors");

  const std::size_t body_at = r.offset();
  try {
    validate(model);
  } catch (const InputError& e) {
    throw FormatError(std::string("invalid model: ") + e.what(), body_at);
  }
  return model;
}

void save_model(const KernelModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, serialize(model));
}

KernelModel load_model(const std::filesystem::path& path) {
  return deserialize_model(read_file_bytes(path));
}

std::vector<double> load_teacher_scores(const std::filesystem::path& path,
                                        std::size_t expected_rows) {
  std::istringstream in(read_text_auto(path));
  std::vector<double> scores;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t begin = line.find_first_not_of(" \t");
    if (begin == std::string::npos) continue;
    const std::size_t end = line.find_last_not_of(" \t") + 1;
    if (line[begin] == '+') ++begin;  // from_chars takes only '-'
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(line.data() + begin, line.data() + end, value);
    if (ec != std::errc() || ptr != line.data() + end || !std::isfinite(value)) {
      throw InputError("teacher scores: bad value at line " + std::to_string(line_no) + ": \"" +
                       line + "\"");
    }
    scores.push_back(value);
  }
  if (scores.size() != expected_rows) {
    throw InputError("teacher scores: file has " + std::to_string(scores.size()) +
                     " scores but the dataset has " + std::to_string(expected_rows) + " rows");
  }
  return scores;
}

double median_pairwise_distance(std::span<const double> inputs, std::uint32_t dim,
                                std::size_t max_points, std::uint64_t seed) {
  if (dim == 0 || inputs.size() % dim != 0) {
    throw InputError("median_pairwise_distance: inputs must be rows of the given dimension");
  }
  const std::size_t n = inputs.size() / dim;
  if (n < 2) throw InputError("median_pairwise_distance: need at least two rows");
  SplitMix64 rng(seed);
  const std::vector<std::size_t> picks = sample_indices(n, std::max<std::size_t>(2, max_points), rng);
  std::vector<double> dists;
  dists.reserve(picks.size() * (picks.size() - 1) / 2);
  for (std::size_t a = 0; a < picks.size(); ++a) {
    for (std::size_t b = a + 1; b < picks.size(); ++b) {
      dists.push_back(euclidean_distance(inputs.subspan(picks[a] * dim, dim),
                                         inputs.subspan(picks[b] * dim, dim)));
    }
  }
  std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
  return dists[dists.size() / 2];
}

}  // namespace rsk
