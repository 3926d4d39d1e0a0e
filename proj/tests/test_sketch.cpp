#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "rsketch/sketch.hpp"
#include "rsketch/rng.hpp"
#include "test_support.hpp"

using namespace rsk;

namespace {

LshEnsembleSpec small_spec(std::uint32_t rows = 4, std::uint32_t range = 8,
                           std::uint32_t dim = 3, std::uint64_t seed = 77) {
  LshEnsembleSpec spec;
  spec.family_config = {LshFamily::L2PStable, 1.5, dim, seed};
  spec.rows = rows;
  spec.concat = 2;
  spec.range = range;
  spec.master_seed = seed;
  return spec;
}

std::size_t nonzero_cells_in_row(const RepresenterSketch& s, std::uint32_t row) {
  std::size_t nonzero = 0;
  for (std::uint32_t j = 0; j < s.spec().range; ++j) nonzero += s.counter(row, j) != 0.0;
  return nonzero;
}

}  // namespace

TEST_CASE("empty build gives all-zero counters") {
  const RepresenterSketch s = RepresenterSketch::build({}, small_spec());
  CHECK(s.total_weight() == 0.0);
  CHECK(s.count() == 0);
  for (const double c : s.counters()) CHECK(c == 0.0);
  CHECK(s.query_mean(std::vector<double>{1.0, 2.0, 3.0}).value == 0.0);
}

TEST_CASE("single point puts exactly one cell per row at its weight") {
  const WeightedPoint p{{0.4, -1.0, 2.2}, 2.5};
  const RepresenterSketch s = RepresenterSketch::build(std::vector<WeightedPoint>{p}, small_spec());
  for (std::uint32_t row = 0; row < s.spec().rows; ++row) {
    CHECK(nonzero_cells_in_row(s, row) == 1);
    CHECK(s.row_sum(row) == 2.5);
  }
  CHECK(s.total_weight() == 2.5);
  CHECK(s.count() == 1);
}

TEST_CASE("every row conserves the weight total") {
  SplitMix64 rng(5);
  std::vector<WeightedPoint> points = testutil::random_points(rng, 10, 3, 0.1, 1.9);
  double sum = 0.0;
  for (const WeightedPoint& p : points) sum += p.alpha;
  for (WeightedPoint& p : points) p.alpha *= 7.3 / sum;  // rescale to a known total

  const RepresenterSketch s = RepresenterSketch::build(points, small_spec(8, 32));
  for (std::uint32_t row = 0; row < s.spec().rows; ++row) {
    CHECK(s.row_sum(row) == doctest::Approx(7.3).epsilon(1e-9));
  }
  CHECK(s.total_weight() == doctest::Approx(7.3).epsilon(1e-12));
}

TEST_CASE("signed add cancels a prior add") {
  SplitMix64 rng(6);
  const auto points = testutil::random_points(rng, 5, 3, -1.0, 1.0);
  RepresenterSketch s = RepresenterSketch::build(points, small_spec());
  const std::vector<double> before(s.counters().begin(), s.counters().end());

  const WeightedPoint extra{{0.1, 0.2, 0.3}, 1.7};
  s.add(extra);
  s.add(extra.x, -extra.alpha);

  for (std::size_t i = 0; i < before.size(); ++i) {
    CHECK(s.counters()[i] == doctest::Approx(before[i]).epsilon(1e-12));
  }
}

TEST_CASE("add to empty equals single-point build") {
  const WeightedPoint p{{1.0, 0.0, -0.5}, 0.9};
  RepresenterSketch streaming(small_spec());
  streaming.add(p);
  const RepresenterSketch batch = RepresenterSketch::build(std::vector<WeightedPoint>{p},
                                                           small_spec());
  CHECK(streaming == batch);
}

TEST_CASE("streaming 1000 points equals batch build") {
  SplitMix64 rng(7);
  const auto points = testutil::random_points(rng, 1000, 3, -2.0, 2.0);
  const RepresenterSketch batch = RepresenterSketch::build(points, small_spec(6, 64));
  RepresenterSketch streaming(small_spec(6, 64));
  for (const WeightedPoint& p : points) streaming.add(p);
  CHECK(streaming == batch);  // same accumulation order, bitwise equal
}

TEST_CASE("merge identities") {
  SplitMix64 rng(8);
  const auto points = testutil::random_points(rng, 20, 3, 0.0, 1.0);
  const RepresenterSketch s = RepresenterSketch::build(points, small_spec());

  const RepresenterSketch zero(small_spec());
  CHECK(merge(s, zero) == s);

  const RepresenterSketch doubled = merge(s, s);
  for (std::size_t i = 0; i < s.counters().size(); ++i) {
    CHECK(doubled.counters()[i] == 2.0 * s.counters()[i]);
  }
  CHECK(doubled.count() == 2 * s.count());
}

TEST_CASE("sharded build merges to the single build") {
  SplitMix64 rng(9);
  const auto points = testutil::random_points(rng, 500, 3, -1.0, 2.0);
  const auto spec = small_spec(5, 32);
  const RepresenterSketch whole = RepresenterSketch::build(points, spec);

  RepresenterSketch merged(spec);
  for (int shard = 0; shard < 4; ++shard) {
    RepresenterSketch part(spec);
    for (std::size_t i = shard; i < points.size(); i += 4) part.add(points[i]);
    merged.merge(part);
  }
  for (std::size_t i = 0; i < whole.counters().size(); ++i) {
    CHECK(merged.counters()[i] == doctest::Approx(whole.counters()[i]).epsilon(1e-9));
  }
}

TEST_CASE("parallel build matches sequential within re-association") {
  SplitMix64 rng(10);
  const auto points = testutil::random_points(rng, 400, 3, -1.0, 1.0);
  const auto spec = small_spec(5, 32);
  const RepresenterSketch seq = RepresenterSketch::build(points, spec, {}, 3, 1);
  const RepresenterSketch par = RepresenterSketch::build(points, spec, {}, 3, 4);
  CHECK(seq.count() == par.count());
  for (std::size_t i = 0; i < seq.counters().size(); ++i) {
    CHECK(par.counters()[i] == doctest::Approx(seq.counters()[i]).epsilon(1e-9));
  }
}

TEST_CASE("merge rejects mismatched specs") {
  const RepresenterSketch a(small_spec(4, 8, 3, 1));
  const RepresenterSketch b(small_spec(4, 8, 3, 2));  // different master seed
  RepresenterSketch c(small_spec(4, 8, 3, 1));
  CHECK_THROWS_AS(c.merge(b), IncompatibleSketchError);
  CHECK_NOTHROW(c.merge(a));
}

TEST_CASE("query at an inserted point returns its weight exactly") {
  const std::vector<double> x{0.3, 0.3, -0.8};
  RepresenterSketch s(small_spec(16, 64));
  s.add(x, 3.0);
  const EstimateResult mean = s.query_mean(x);
  CHECK(mean.value == 3.0);
  for (const double v : mean.per_row) CHECK(v == 3.0);  // collides in every row at distance 0
}

TEST_CASE("median-of-means group handling") {
  SplitMix64 rng(11);
  const auto points = testutil::random_points(rng, 30, 3, -1.0, 2.0);
  const RepresenterSketch s = RepresenterSketch::build(points, small_spec(12, 32));
  const std::vector<double> q = testutil::random_vector(rng, 3);

  const EstimateResult mean = s.query_mean(q);
  const EstimateResult mom1 = s.query_mom(q, 1);
  CHECK(mom1.value == mean.value);  // single group is bitwise the mean
  CHECK(mom1.estimator == Estimator::MedianOfMeans);
  CHECK(mean.estimator == Estimator::Mean);

  const EstimateResult momL = s.query_mom(q, 12);
  std::vector<double> rows = momL.per_row;
  std::sort(rows.begin(), rows.end());
  CHECK(momL.value == 0.5 * (rows[5] + rows[6]));  // median of the raw row values

  // value is reproducible from per_row for a mid-range g
  const EstimateResult mom4 = s.query_mom(q, 4);
  std::vector<double> means;
  for (int g = 0; g < 4; ++g) {
    double acc = 0.0;
    for (int i = 0; i < 3; ++i) acc += mom4.per_row[g * 3 + i];
    means.push_back(acc / 3.0);
  }
  std::sort(means.begin(), means.end());
  CHECK(mom4.value == 0.5 * (means[1] + means[2]));

  CHECK_THROWS_AS(s.query_mom(q, 5), InputError);  // 5 does not divide 12
  CHECK_THROWS_AS(s.query_mom(q, 0), InputError);
}

TEST_CASE("scaling the weights scales the estimates") {
  SplitMix64 rng(12);
  auto points = testutil::random_points(rng, 25, 3, -1.0, 2.0);
  const auto spec = small_spec(12, 32);
  const RepresenterSketch base = RepresenterSketch::build(points, spec);
  const std::vector<double> q = testutil::random_vector(rng, 3);

  auto scaled_points = points;
  for (WeightedPoint& p : scaled_points) p.alpha *= 2.0;  // power of two: exact
  const RepresenterSketch scaled = RepresenterSketch::build(scaled_points, spec);

  CHECK(scaled.query_mean(q).value == 2.0 * base.query_mean(q).value);
  CHECK(scaled.query_mom(q, 4).value == 2.0 * base.query_mom(q, 4).value);

  for (WeightedPoint& p : scaled_points) p.alpha = p.alpha / 2.0 * 0.37;
  const RepresenterSketch odd = RepresenterSketch::build(scaled_points, spec);
  CHECK(odd.query_mean(q).value ==
        doctest::Approx(0.37 * base.query_mean(q).value).epsilon(1e-12));
}

TEST_CASE("identical input gives bit-identical counters") {
  SplitMix64 rng(13);
  const auto points = testutil::random_points(rng, 40, 3, -1.0, 1.0);
  const RepresenterSketch a = RepresenterSketch::build(points, small_spec(6, 16));
  const RepresenterSketch b = RepresenterSketch::build(points, small_spec(6, 16));
  CHECK(a == b);
  CHECK(a.serialize() == b.serialize());
}

TEST_CASE("add validates dimension and finiteness") {
  RepresenterSketch s(small_spec());
  CHECK_THROWS_AS(s.add(std::vector<double>{1.0}, 1.0), InputError);
  CHECK_THROWS_AS(s.add(std::vector<double>{1.0, 2.0, 3.0},
                        std::numeric_limits<double>::quiet_NaN()),
                  InputError);
  CHECK_THROWS_AS(
      s.add(std::vector<double>{1.0, std::numeric_limits<double>::infinity(), 3.0}, 1.0),
      InputError);
}

TEST_CASE("serialization round-trips") {
  SUBCASE("empty sketch") {
    const RepresenterSketch s(small_spec());
    const RepresenterSketch back = RepresenterSketch::deserialize(s.serialize());
    CHECK(back == s);
  }

  SUBCASE("populated sketch re-serializes byte-identically") {
    SplitMix64 rng(14);
    const auto points = testutil::random_points(rng, 50, 3, -2.0, 2.0);
    const RepresenterSketch s = RepresenterSketch::build(points, small_spec(10, 20));
    const auto bytes = s.serialize();
    const RepresenterSketch back = RepresenterSketch::deserialize(bytes);
    CHECK(back == s);
    CHECK(back.serialize() == bytes);
  }

  SUBCASE("projection sketch round-trips") {
    LshEnsembleSpec spec = small_spec(4, 16, 2);
    std::vector<double> projection{0.5, 0.1, -0.2, 0.7, 0.3, 0.9, -0.4, 0.2};  // 4 x 2
    RepresenterSketch s(spec, projection, 4);
    s.add(std::vector<double>{0.1, 0.9}, 1.5);  // points live in the hashed space
    const RepresenterSketch back = RepresenterSketch::deserialize(s.serialize());
    CHECK(back == s);
    CHECK(back.has_projection());
    CHECK(back.data_dim() == 4);
    CHECK(back.hashed_dim() == 2);
  }
}

TEST_CASE("file size is header plus counters plus projection") {
  LshEnsembleSpec spec = small_spec(2000, 20, 2);
  spec.concat = 1;
  const RepresenterSketch s(spec);
  CHECK(s.serialize().size() == 64u + 2000u * 20u * 8u);

  std::vector<double> projection(4 * 2, 0.25);
  const RepresenterSketch with_proj(small_spec(4, 16, 2), projection, 4);
  CHECK(with_proj.serialize().size() == 64u + 8u * 8u + 4u * 16u * 8u);
}

TEST_CASE("deserialize reports offsets for corrupted input") {
  SplitMix64 rng(15);
  const auto points = testutil::random_points(rng, 10, 3, 0.0, 1.0);
  const RepresenterSketch s = RepresenterSketch::build(points, small_spec());
  const std::vector<std::uint8_t> bytes = s.serialize();

  SUBCASE("bad magic") {
    auto bad = bytes;
    bad[0] = 'X';
    try {
      RepresenterSketch::deserialize(bad);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.offset() == 0);
    }
  }

  SUBCASE("bad version") {
    auto bad = bytes;
    bad[4] = 9;
    try {
      RepresenterSketch::deserialize(bad);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.offset() == 4);
    }
  }

  SUBCASE("bad family tag") {
    auto bad = bytes;
    bad[20] = 7;
    try {
      RepresenterSketch::deserialize(bad);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.offset() == 20);
    }
  }

  SUBCASE("truncation") {
    auto bad = bytes;
    bad.resize(bytes.size() - 5);
    CHECK_THROWS_AS(RepresenterSketch::deserialize(bad), FormatError);
  }

  SUBCASE("trailing bytes") {
    auto bad = bytes;
    bad.push_back(0);
    try {
      RepresenterSketch::deserialize(bad);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.offset() == bytes.size());
    }
  }
}

TEST_CASE("projected query equals hashing the projected vector directly") {
  // d = 4 inputs, hashed space d' = 2
  LshEnsembleSpec spec = small_spec(8, 32, 2, 99);
  std::vector<double> projection{0.5, -0.1, 0.2, 0.7, -0.3, 0.9, 0.4, 0.2};  // 4 x 2

  SplitMix64 rng(16);
  const auto points = testutil::random_points(rng, 15, 2, -1.0, 1.0);
  const RepresenterSketch with_proj = RepresenterSketch::build(points, spec, projection, 4);
  const RepresenterSketch plain = RepresenterSketch::build(points, spec);

  const std::vector<double> q = testutil::random_vector(rng, 4);
  std::vector<double> z(2, 0.0);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 2; ++j) z[j] += projection[i * 2 + j] * q[i];
  }

  CHECK(with_proj.query_mean(q).value == plain.query_mean(z).value);
  CHECK_THROWS_AS(with_proj.query_mean(z), InputError);  // projection sketches take raw queries
}

TEST_CASE("default_groups picks the largest divisor up to 24") {
  CHECK(default_groups(1000) == 20);
  CHECK(default_groups(2000) == 20);
  CHECK(default_groups(24) == 24);
  CHECK(default_groups(48) == 24);
  CHECK(default_groups(25) == 5);
  CHECK(default_groups(7) == 7);
  CHECK(default_groups(1) == 1);
  CHECK(default_groups(5000) == 20);
}

TEST_CASE("save and load through the filesystem") {
  SplitMix64 rng(17);
  const auto points = testutil::random_points(rng, 20, 3, -1.0, 1.0);
  const RepresenterSketch s = RepresenterSketch::build(points, small_spec());
  const auto path = std::filesystem::temp_directory_path() / "rsketch-test-sketch.bin";
  s.save(path);
  CHECK(RepresenterSketch::load(path) == s);
  std::filesystem::remove(path);
}
