#include "rsketch/sketch.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>

#include "rsketch/fileio.hpp"

namespace rsk {

namespace {

constexpr char kMagic[5] = "RSKH";
constexpr std::uint32_t kFormatVersion = 1;

LshEnsembleSpec normalized(LshEnsembleSpec spec) {
  spec.family_config.seed = spec.master_seed;
  return spec;
}

}  // namespace

std::uint32_t default_groups(std::uint32_t rows) {
  const std::uint32_t cap = 24;  // 8 * ceil(log(1/0.05))
  for (std::uint32_t g = std::min(cap, rows); g > 1; --g) {
    if (rows % g == 0) return g;
  }
  return 1;
}

RepresenterSketch::RepresenterSketch(const LshEnsembleSpec& spec)
    : RepresenterSketch(spec, {}, spec.family_config.input_dim) {}

RepresenterSketch::RepresenterSketch(const LshEnsembleSpec& spec, std::vector<double> projection,
                                     std::uint32_t data_dim)
    : spec_(normalized(spec)),
      ensemble_(std::make_shared<LshEnsemble>(spec_)),
      counters_(static_cast<std::size_t>(spec_.rows) * spec_.range, 0.0),
      projection_(std::move(projection)),
      data_dim_(data_dim) {
  if (projection_.empty()) {
    if (data_dim_ == 0) data_dim_ = spec_.family_config.input_dim;
    if (data_dim_ != spec_.family_config.input_dim) {
      throw InputError("sketch: without a projection, data_dim must equal the hashed dimension");
    }
  } else {
    const std::size_t want = static_cast<std::size_t>(data_dim_) * spec_.family_config.input_dim;
    if (data_dim_ == 0 || projection_.size() != want) {
      throw InputError("sketch: projection must be data_dim x hashed_dim");
    }
    for (const double v : projection_) {
      if (!std::isfinite(v)) throw InputError("sketch: projection entries must be finite");
    }
  }
}

RepresenterSketch RepresenterSketch::build(std::span<const WeightedPoint> points,
                                           const LshEnsembleSpec& spec) {
  return build(points, spec, {}, spec.family_config.input_dim);
}

RepresenterSketch RepresenterSketch::build(std::span<const WeightedPoint> points,
                                           const LshEnsembleSpec& spec,
                                           std::vector<double> projection, std::uint32_t data_dim,
                                           unsigned threads) {
  RepresenterSketch sketch(spec, std::move(projection), data_dim);
  if (threads <= 1 || points.size() < 2 * threads) {
    for (const WeightedPoint& p : points) sketch.add(p);
    return sketch;
  }

  // Private partial sketches per contiguous partition, merged in partition
  // order: the result does not depend on the thread count beyond fixed
  // re-association of the sums. Copies share the ensemble tables.
  const std::size_t chunk = (points.size() + threads - 1) / threads;
  std::vector<RepresenterSketch> parts(threads, sketch);
  {
    std::vector<std::thread> workers;
    workers.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
      workers.emplace_back([&, t] {
        const std::size_t begin = std::min(points.size(), t * chunk);
        const std::size_t end = std::min(points.size(), begin + chunk);
        for (std::size_t i = begin; i < end; ++i) parts[t].add(points[i]);
      });
    }
    for (std::thread& w : workers) w.join();
  }
  for (const RepresenterSketch& part : parts) sketch.merge(part);
  return sketch;
}

void RepresenterSketch::add(std::span<const double> x, double alpha) {
  if (x.size() != hashed_dim()) {
    throw InputError("sketch add: point has " + std::to_string(x.size()) +
                     " entries, sketch hashes dimension " + std::to_string(hashed_dim()));
  }
  if (!std::isfinite(alpha)) throw InputError("sketch add: weight must be finite");
  for (const double v : x) {
    if (!std::isfinite(v)) throw InputError("sketch add: point entries must be finite");
  }
  for (std::uint32_t row = 0; row < spec_.rows; ++row) {
    counters_[static_cast<std::size_t>(row) * spec_.range + ensemble_->index(x, row)] += alpha;
  }
  total_weight_ += alpha;
  count_ += 1;
}

void RepresenterSketch::merge(const RepresenterSketch& other) {
  if (spec_ != other.spec_) {
    throw IncompatibleSketchError("sketch merge: ensemble specs differ");
  }
  if (projection_ != other.projection_ || data_dim_ != other.data_dim_) {
    throw IncompatibleSketchError("sketch merge: projections differ");
  }
  for (std::size_t i = 0; i < counters_.size(); ++i) counters_[i] += other.counters_[i];
  total_weight_ += other.total_weight_;
  count_ += other.count_;
}

RepresenterSketch merge(const RepresenterSketch& a, const RepresenterSketch& b) {
  RepresenterSketch out = a;
  out.merge(b);
  return out;
}

std::vector<double> RepresenterSketch::apply_projection(std::span<const double> q) const {
  // z = A^T q with A stored row-major as data_dim x hashed_dim.
  const std::size_t dh = hashed_dim();
  std::vector<double> z(dh, 0.0);
  for (std::uint32_t i = 0; i < data_dim_; ++i) {
    const double qi = q[i];
    const double* arow = projection_.data() + static_cast<std::size_t>(i) * dh;
    for (std::size_t j = 0; j < dh; ++j) z[j] += arow[j] * qi;
  }
  return z;
}

void RepresenterSketch::lookup_rows(std::span<const double> q, std::span<double> out) const {
  std::vector<double> projected;
  std::span<const double> v = q;
  if (has_projection()) {
    if (q.size() != data_dim_) {
      throw InputError("sketch query: expected a data-space vector of dimension " +
                       std::to_string(data_dim_));
    }
    projected = apply_projection(q);
    v = projected;
  } else if (q.size() != hashed_dim()) {
    throw InputError("sketch query: query has " + std::to_string(q.size()) +
                     " entries, sketch hashes dimension " + std::to_string(hashed_dim()));
  }
  for (std::uint32_t row = 0; row < spec_.rows; ++row) {
    out[row] = counters_[static_cast<std::size_t>(row) * spec_.range + ensemble_->index(v, row)];
  }
}

EstimateResult RepresenterSketch::query_mean(std::span<const double> q) const {
  EstimateResult result;
  result.estimator = Estimator::Mean;
  result.groups = 1;
  result.per_row.resize(spec_.rows);
  lookup_rows(q, result.per_row);
  double acc = 0.0;
  for (const double v : result.per_row) acc += v;
  result.value = acc / static_cast<double>(spec_.rows);
  return result;
}

EstimateResult RepresenterSketch::query_mom(std::span<const double> q,
                                            std::uint32_t groups) const {
  if (groups < 1) throw InputError("sketch query: groups must be at least 1");
  if (spec_.rows % groups != 0) {
    throw InputError("sketch query: groups (" + std::to_string(groups) +
                     ") must divide rows (" + std::to_string(spec_.rows) + ")");
  }
  EstimateResult result;
  result.estimator = Estimator::MedianOfMeans;
  result.groups = groups;
  result.per_row.resize(spec_.rows);
  lookup_rows(q, result.per_row);

  const std::uint32_t block = spec_.rows / groups;
  std::vector<double> means(groups);
  for (std::uint32_t g = 0; g < groups; ++g) {
    double acc = 0.0;
    for (std::uint32_t i = 0; i < block; ++i) {
      acc += result.per_row[static_cast<std::size_t>(g) * block + i];
    }
    means[g] = acc / static_cast<double>(block);
  }
  std::sort(means.begin(), means.end());
  result.value = (groups % 2 == 1)
                     ? means[groups / 2]
                     : 0.5 * (means[groups / 2 - 1] + means[groups / 2]);
  return result;
}

double RepresenterSketch::counter(std::uint32_t row, std::uint32_t column) const {
  if (row >= spec_.rows || column >= spec_.range) {
    throw InputError("sketch counter: cell out of range");
  }
  return counters_[static_cast<std::size_t>(row) * spec_.range + column];
}

double RepresenterSketch::row_sum(std::uint32_t row) const {
  if (row >= spec_.rows) throw InputError("sketch row_sum: row out of range");
  double acc = 0.0;
  for (std::uint32_t j = 0; j < spec_.range; ++j) {
    acc += counters_[static_cast<std::size_t>(row) * spec_.range + j];
  }
  return acc;
}

std::uint64_t RepresenterSketch::parameter_count() const noexcept {
  return static_cast<std::uint64_t>(spec_.rows) * spec_.range +
         static_cast<std::uint64_t>(projection_.size());
}

bool operator==(const RepresenterSketch& a, const RepresenterSketch& b) {
  return a.spec_ == b.spec_ && a.projection_ == b.projection_ && a.data_dim_ == b.data_dim_ &&
         a.counters_ == b.counters_ && a.total_weight_ == b.total_weight_ && a.count_ == b.count_;
}

std::vector<std::uint8_t> RepresenterSketch::serialize() const {
  ByteWriter w;
  w.magic(kMagic);
  w.u32(kFormatVersion);
  w.u32(spec_.rows);
  w.u32(spec_.range);
  w.u32(spec_.concat);
  w.u8(static_cast<std::uint8_t>(spec_.family_config.family));
  w.pad(3);
  w.u64(spec_.master_seed);
  w.f64(spec_.family_config.bandwidth_r);
  w.u32(data_dim_);
  w.u32(has_projection() ? hashed_dim() : 0);
  w.f64(total_weight_);
  w.u64(count_);
  for (const double v : projection_) w.f64(v);
  for (const double v : counters_) w.f64(v);
  return w.take();
}

RepresenterSketch RepresenterSketch::deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic(kMagic, "sketch header");

  const std::size_t version_at = r.offset();
  const std::uint32_t version = r.u32("format_version");
  if (version != kFormatVersion) {
    throw FormatError("unsupported sketch format version " + std::to_string(version), version_at);
  }

  LshEnsembleSpec spec;
  spec.rows = r.u32("rows_L");
  spec.range = r.u32("range_R");
  spec.concat = r.u32("concat_K");

  const std::size_t family_at = r.offset();
  const std::uint8_t family = r.u8("family");
  if (family > 2) throw FormatError("unknown hash family tag " + std::to_string(family), family_at);
  spec.family_config.family = static_cast<LshFamily>(family);
  r.skip(3, "header padding");

  spec.master_seed = r.u64("master_seed");
  spec.family_config.seed = spec.master_seed;

  const std::size_t bandwidth_at = r.offset();
  spec.family_config.bandwidth_r = r.f64("bandwidth_r");
  if (spec.family_config.family != LshFamily::SignProjection &&
      !(spec.family_config.bandwidth_r > 0.0 && std::isfinite(spec.family_config.bandwidth_r))) {
    throw FormatError("bandwidth_r must be positive", bandwidth_at);
  }

  const std::size_t dims_at = r.offset();
  const std::uint32_t data_dim = r.u32("data_dim_d");
  const std::uint32_t projected_dim = r.u32("projected_dim_p");
  if (data_dim == 0) throw FormatError("data_dim_d must be positive", dims_at);
  spec.family_config.input_dim = projected_dim > 0 ? projected_dim : data_dim;

  const double total_weight = r.f64("total_weight");
  const std::uint64_t count = r.u64("count");

  std::vector<double> projection;
  if (projected_dim > 0) {
    projection.resize(static_cast<std::size_t>(data_dim) * projected_dim);
    r.f64_block(projection, "projection matrix");
  }

  const std::size_t spec_at = r.offset();
  try {
    validate(spec);
  } catch (const InputError& e) {
    throw FormatError(std::string("invalid sketch header: ") + e.what(), spec_at);
  }
  const std::uint64_t ensemble_cells = static_cast<std::uint64_t>(spec.rows) * spec.concat *
                                       spec.family_config.input_dim;
  if (ensemble_cells > (1ULL << 31)) {
    throw FormatError("implausible ensemble size in header", spec_at);
  }
  const std::uint64_t counter_bytes = static_cast<std::uint64_t>(spec.rows) * spec.range * 8;
  if (r.remaining() < counter_bytes) {
    throw FormatError("truncated while reading counter array", bytes.size());
  }

  RepresenterSketch sketch(spec, std::move(projection), data_dim);
  r.f64_block(sketch.counters_, "counter array");
  r.expect_end("counter array");
  sketch.total_weight_ = total_weight;
  sketch.count_ = count;
  return sketch;
}

void RepresenterSketch::save(const std::filesystem::path& path) const {
  const std::vector<std::uint8_t> bytes = serialize();
  write_file_atomic(path, bytes);
}

RepresenterSketch RepresenterSketch::load(const std::filesystem::path& path) {
  return deserialize(read_file_bytes(path));
}

}  // namespace rsk
