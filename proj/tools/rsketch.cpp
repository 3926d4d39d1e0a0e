// Command-line front end: distill -> build -> query/evaluate, plus dataset
// utilities and the statistical verification suites.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rsketch/data.hpp"
#include "rsketch/distill.hpp"
#include "rsketch/error.hpp"
#include "rsketch/fileio.hpp"
#include "rsketch/kde.hpp"
#include "rsketch/metrics.hpp"
#include "rsketch/sketch.hpp"
#include "rsketch/verify.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitInputError = 2;
constexpr int kExitFormatError = 3;

struct CommonOptions {
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string format = "text";

  bool json() const { return format == "json-lines"; }
};

void add_common(CLI::App* cmd, CommonOptions& common) {
  cmd->add_option("--seed", common.seed, "Seed for every random choice in this command");
  cmd->add_option("--threads", common.threads, "Worker thread cap")->check(CLI::Range(1u, 256u));
  cmd->add_option("--format", common.format, "Output format")
      ->check(CLI::IsMember({"text", "json-lines"}));
}

rsk::Task parse_task(const std::string& name) {
  if (name == "classification") return rsk::Task::BinaryClassification;
  if (name == "regression") return rsk::Task::Regression;
  throw rsk::ConfigError("unknown task \"" + name + "\"");
}

rsk::LshFamily parse_family(const std::string& name) {
  if (name == "l2") return rsk::LshFamily::L2PStable;
  if (name == "sparse") return rsk::LshFamily::SparseSign;
  if (name == "sign") return rsk::LshFamily::SignProjection;
  throw rsk::ConfigError("unknown hash family \"" + name + "\"");
}

rsk::ScoreConvention parse_convention(const std::string& name) {
  if (name == "probability") return rsk::ScoreConvention::Probability;
  if (name == "sign") return rsk::ScoreConvention::SignValue;
  throw rsk::ConfigError("unknown score convention \"" + name + "\"");
}

/// Deterministic parallel map over [0, n): each worker owns a contiguous
/// slice, so results do not depend on the thread count.
template <typename Fn>
void for_rows(std::size_t n, unsigned threads, Fn&& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, std::thread::hardware_concurrency()));
  if (threads <= 1 || n < 2 * threads) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t chunk = (n + threads - 1) / threads;
  std::vector<std::thread> workers;
  workers.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    workers.emplace_back([&fn, t, chunk, n] {
      const std::size_t begin = std::min(n, t * chunk);
      const std::size_t end = std::min(n, begin + chunk);
      for (std::size_t i = begin; i < end; ++i) fn(i);
    });
  }
  for (std::thread& w : workers) w.join();
}

// ---- distill ---------------------------------------------------------------

struct DistillArgs {
  CommonOptions common;
  std::string data_path;
  std::string teacher_path;
  std::string out_path;
  std::string task = "classification";
  std::string family = "l2";
  std::string init = "subsample";
  std::string bandwidth = "auto";
  rsk::DistillConfig cfg;
  double val_fraction = 0.1;
  std::uint32_t concat = 1;
};

int cmd_distill(const DistillArgs& args) {
  const rsk::Task task = parse_task(args.task);
  const rsk::Dataset dataset = rsk::load_libsvm_file(args.data_path, task);
  if (dataset.rows() == 0) throw rsk::InputError("dataset is empty: " + args.data_path);
  const std::vector<double> scores = rsk::load_teacher_scores(args.teacher_path, dataset.rows());

  rsk::DistillConfig cfg = args.cfg;
  cfg.seed = args.common.seed;
  cfg.init = args.init == "gaussian" ? rsk::InitScheme::GaussianRandom
                                     : rsk::InitScheme::DataSubsample;

  const rsk::LshFamily family = parse_family(args.family);
  if (family == rsk::LshFamily::SignProjection) {
    throw rsk::ConfigError("the distillation pipeline hashes distances; use family l2 or sparse");
  }

  // Seeded validation split for the bandwidth grid and the reported MSE.
  std::vector<std::size_t> order(dataset.rows());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rsk::SplitMix64 split_rng(rsk::derive_seed(cfg.seed, 0xda7a));
  rsk::deterministic_shuffle(order, split_rng);
  const std::size_t val_rows = std::min(
      dataset.rows() - 1,
      static_cast<std::size_t>(static_cast<double>(dataset.rows()) * args.val_fraction));
  const std::size_t train_rows = dataset.rows() - val_rows;

  std::vector<double> train_x(train_rows * dataset.dim), train_y(train_rows);
  std::vector<double> val_x(val_rows * dataset.dim), val_y(val_rows);
  for (std::size_t i = 0; i < train_rows; ++i) {
    const auto row = dataset.row(order[i]);
    std::copy(row.begin(), row.end(), train_x.begin() + i * dataset.dim);
    train_y[i] = scores[order[i]];
  }
  for (std::size_t i = 0; i < val_rows; ++i) {
    const auto row = dataset.row(order[train_rows + i]);
    std::copy(row.begin(), row.end(), val_x.begin() + i * dataset.dim);
    val_y[i] = scores[order[train_rows + i]];
  }

  std::vector<double> grid;
  if (args.bandwidth == "auto") {
    const double unit = rsk::median_pairwise_distance(train_x, dataset.dim, 1000, cfg.seed);
    for (const double mult : {0.5, 1.0, 2.0, 4.0, 8.0}) grid.push_back(mult * unit);
  } else {
    try {
      grid.push_back(std::stod(args.bandwidth));
    } catch (const std::exception&) {
      throw rsk::ConfigError("bandwidth must be a number or \"auto\"");
    }
    if (!(grid.back() > 0.0)) throw rsk::ConfigError("bandwidth must be positive");
  }

  std::optional<rsk::KernelModel> best;
  double best_val = 0.0, best_train = 0.0, best_r = 0.0;
  for (const double r : grid) {
    rsk::KernelConfig kernel;
    kernel.family_config =
        rsk::LshFamilyConfig{family, r, cfg.projected_dim > 0 ? cfg.projected_dim : dataset.dim,
                             cfg.seed};
    kernel.concat = args.concat;
    std::vector<double> losses;
    rsk::KernelModel model = rsk::fit(train_x, train_y, dataset.dim, cfg, kernel, &losses);
    const double val = val_rows > 0 ? rsk::mse(model, val_x, val_y, dataset.dim) : losses.back();
    if (!best || val < best_val) {
      best = std::move(model);
      best_val = val;
      best_train = losses.back();
      best_r = r;
    }
  }

  rsk::save_model(*best, args.out_path);
  if (args.common.json()) {
    std::cout << json{{"model", args.out_path},
                      {"bandwidth", best_r},
                      {"train_mse", best_train},
                      {"val_mse", best_val},
                      {"anchors", best->size()}}
                     .dump()
              << '\n';
  } else {
    std::cout << "model        " << args.out_path << '\n'
              << "bandwidth    " << best_r << '\n'
              << "train mse    " << best_train << '\n'
              << "val mse      " << best_val << '\n';
  }
  return kExitOk;
}

// ---- build -----------------------------------------------------------------

struct BuildArgs {
  CommonOptions common;
  std::string model_path;
  std::string out_path;
  std::string family;  // optional l2 <-> sparse override
  std::uint32_t rows = 2000;
  std::uint32_t range = 100;
};

int cmd_build(const BuildArgs& args) {
  rsk::KernelModel model = rsk::load_model(args.model_path);

  rsk::LshEnsembleSpec spec;
  spec.family_config = model.kernel.family_config;
  if (!args.family.empty()) {
    const rsk::LshFamily family = parse_family(args.family);
    if (family == rsk::LshFamily::SignProjection) {
      throw rsk::ConfigError("sketches are built over l2 or sparse families");
    }
    // l2 and sparse share the same collision kernel, so swapping them
    // keeps the sketch consistent with the trained model.
    spec.family_config.family = family;
  }
  spec.rows = args.rows;
  spec.concat = model.kernel.concat;
  spec.range = args.range;
  spec.master_seed = args.common.seed;

  const std::vector<rsk::WeightedPoint> points = rsk::export_points(model);
  const rsk::RepresenterSketch sketch =
      rsk::RepresenterSketch::build(points, spec,
                                    model.has_projection() ? model.projection
                                                           : std::vector<double>{},
                                    model.data_dim, args.common.threads);
  sketch.save(args.out_path);

  const std::uint64_t params = rsk::sketch_params(
      spec.rows, spec.range, model.data_dim, model.has_projection() ? model.hashed_dim : 0);
  if (args.common.json()) {
    std::cout << json{{"sketch", args.out_path},
                      {"rows", spec.rows},
                      {"range", spec.range},
                      {"params", params},
                      {"memory_bytes", params * 8}}
                     .dump()
              << '\n';
  } else {
    std::cout << "sketch       " << args.out_path << '\n'
              << "params       " << params << '\n'
              << "memory       " << params * 8 << " bytes ("
              << static_cast<double>(params * 8) / 1e6 << " MB)\n";
  }
  return kExitOk;
}

// ---- query / evaluate --------------------------------------------------------

struct QueryArgs {
  CommonOptions common;
  std::string sketch_path;
  std::string data_path;
  std::string task = "classification";
  std::string estimator = "mom";
  std::uint32_t groups = 0;  // 0 = divisor rule default
};

std::vector<double> sketch_scores(const rsk::RepresenterSketch& sketch, const rsk::Dataset& data,
                                  const std::string& estimator, std::uint32_t groups,
                                  unsigned threads) {
  const bool mom = estimator == "mom";
  std::vector<double> out(data.rows());
  for_rows(data.rows(), threads, [&](std::size_t i) {
    out[i] = mom ? sketch.query_mom(data.row(i), groups).value
                 : sketch.query_mean(data.row(i)).value;
  });
  return out;
}

int cmd_query(const QueryArgs& args) {
  const rsk::RepresenterSketch sketch = rsk::RepresenterSketch::load(args.sketch_path);
  const rsk::Dataset data = rsk::load_libsvm_file(args.data_path, parse_task(args.task),
                                                  sketch.data_dim());
  if (data.dim > sketch.data_dim()) {
    throw rsk::InputError("dataset has features beyond the sketch dimension (" +
                          std::to_string(data.dim) + " > " + std::to_string(sketch.data_dim()) +
                          ")");
  }
  const std::uint32_t groups =
      args.groups > 0 ? args.groups : rsk::default_groups(sketch.spec().rows);
  const std::vector<double> scores =
      sketch_scores(sketch, data, args.estimator, groups, args.common.threads);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (args.common.json()) {
      std::cout << json{{"row", i}, {"score", scores[i]}}.dump() << '\n';
    } else {
      std::cout << scores[i] << '\n';
    }
  }
  return kExitOk;
}

struct EvaluateArgs {
  CommonOptions common;
  std::string sketch_path;
  std::string model_path;
  std::string data_path;
  std::string task = "classification";
  std::string estimator = "mom";
  std::string convention = "probability";
  std::string nn_spec;
  std::uint32_t groups = 0;
};

int cmd_evaluate(const EvaluateArgs& args) {
  if (args.sketch_path.empty() == args.model_path.empty()) {
    throw rsk::ConfigError("evaluate needs exactly one of --sketch or --model");
  }
  const rsk::Task task = parse_task(args.task);
  const rsk::ScoreConvention convention = parse_convention(args.convention);

  std::vector<double> raw;
  rsk::EvalReport report;
  std::uint32_t data_dim = 0;

  if (!args.sketch_path.empty()) {
    const rsk::RepresenterSketch sketch = rsk::RepresenterSketch::load(args.sketch_path);
    const rsk::Dataset data = rsk::load_libsvm_file(args.data_path, task, sketch.data_dim());
    if (data.dim > sketch.data_dim()) {
      throw rsk::InputError("dataset has features beyond the sketch dimension");
    }
    const std::uint32_t groups =
        args.groups > 0 ? args.groups : rsk::default_groups(sketch.spec().rows);
    raw = sketch_scores(sketch, data, args.estimator, groups, args.common.threads);

    std::vector<double> decisions(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      decisions[i] = rsk::decide(raw[i], task, convention);
    }
    report = rsk::evaluate(decisions, data.labels, task);
    const std::uint32_t projected = sketch.has_projection() ? sketch.hashed_dim() : 0;
    report.params_count = rsk::sketch_params(sketch.spec().rows, sketch.spec().range,
                                             sketch.data_dim(), projected);
    report.flops = rsk::sketch_flops(projected > 0 ? sketch.data_dim() : 0, projected,
                                     sketch.spec().concat, sketch.spec().range);
    data_dim = sketch.data_dim();
  } else {
    const rsk::KernelModel model = rsk::load_model(args.model_path);
    const rsk::Dataset data = rsk::load_libsvm_file(args.data_path, task, model.data_dim);
    if (data.dim > model.data_dim) {
      throw rsk::InputError("dataset has features beyond the model dimension");
    }
    raw.resize(data.rows());
    for_rows(data.rows(), args.common.threads,
             [&](std::size_t i) { raw[i] = rsk::predict(model, data.row(i)); });
    std::vector<double> decisions(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      decisions[i] = rsk::decide(raw[i], task, convention);
    }
    report = rsk::evaluate(decisions, data.labels, task);

    const std::uint32_t dh = model.hashed_dim;
    report.params_count = static_cast<std::uint64_t>(model.size()) * dh + model.size() +
                          model.projection.size();
    // Distance + kernel per anchor, plus the projection matmul.
    report.flops = (model.has_projection() ? 2ULL * model.data_dim * dh : 0) +
                   static_cast<std::uint64_t>(model.size()) * (3ULL * dh + 13);
    data_dim = model.data_dim;
  }
  report.memory_bytes = report.params_count * 8;

  json extra = json::object();
  if (!args.nn_spec.empty()) {
    const rsk::MlpSpec mlp = rsk::parse_mlp_spec(args.nn_spec, data_dim, 1);
    extra["nn_params"] = rsk::mlp_params(mlp);
    extra["nn_flops"] = rsk::mlp_flops(mlp);
    extra["params_reduction"] = rsk::reduction_ratio(rsk::mlp_params(mlp), report.params_count);
    extra["flops_reduction"] = rsk::reduction_ratio(rsk::mlp_flops(mlp), report.flops);
  }

  if (args.common.json()) {
    json j = json::parse(rsk::to_json_line(report));
    j.update(extra);
    std::cout << j.dump() << '\n';
  } else {
    std::cout << rsk::to_text_table(report) << '\n';
    if (!extra.empty()) {
      std::cout << "nn params     " << extra["nn_params"] << '\n'
                << "nn flops      " << extra["nn_flops"] << '\n'
                << "params reduction  " << extra["params_reduction"].get<double>() << "x\n"
                << "flops reduction   " << extra["flops_reduction"].get<double>() << "x\n";
    }
  }
  return kExitOk;
}

// ---- verify / dataset-info ----------------------------------------------------

struct VerifyArgs {
  CommonOptions common;
  bool quick = false;
};

int cmd_verify(const VerifyArgs& args, bool seed_given) {
  rsk::verify::SuiteOptions options;
  options.quick = args.quick;
  if (seed_given) options.seed = args.common.seed;
  bool all_passed = true;
  for (const rsk::verify::CheckResult& result : rsk::verify::run_all(options)) {
    all_passed = all_passed && result.passed;
    if (args.common.json()) {
      std::cout << json{{"check", result.name}, {"passed", result.passed}, {"detail", result.detail}}
                       .dump()
                << '\n';
    } else {
      std::cout << (result.passed ? "PASS" : "FAIL") << "  " << result.name << "  ("
                << result.detail << ")\n";
    }
  }
  return all_passed ? kExitOk : kExitCheckFailed;
}

struct InfoArgs {
  CommonOptions common;
  std::string data_path;
  std::string task = "classification";
};

int cmd_dataset_info(const InfoArgs& args) {
  const rsk::Task task = parse_task(args.task);
  const rsk::Dataset data = rsk::load_libsvm_file(args.data_path, task);
  json j{{"rows", data.rows()}, {"dim", data.dim},
         {"task", task == rsk::Task::BinaryClassification ? "classification" : "regression"}};
  if (task == rsk::Task::BinaryClassification) {
    std::size_t positive = 0;
    for (const double y : data.labels) positive += y > 0.5;
    j["positive"] = positive;
    j["negative"] = data.rows() - positive;
  } else if (!data.labels.empty()) {
    const auto [lo, hi] = std::minmax_element(data.labels.begin(), data.labels.end());
    double mean = 0.0;
    for (const double y : data.labels) mean += y;
    j["label_min"] = *lo;
    j["label_max"] = *hi;
    j["label_mean"] = mean / static_cast<double>(data.rows());
  }
  if (args.common.json()) {
    std::cout << j.dump() << '\n';
  } else {
    for (const auto& [key, value] : j.items()) std::cout << key << "  " << value << '\n';
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weighted kernel-density sketching toolkit"};
  app.require_subcommand(1);
  // Key=value config file with one [subcommand] section per command; must
  // precede the subcommand name. Explicit flags override file values.
  app.set_config("--config", "", "key=value config file with [subcommand] sections");

  DistillArgs distill_args;
  CLI::App* distill = app.add_subcommand(
      "distill", "Learn a weighted kernel representation from teacher scores");
  distill->add_option("--data", distill_args.data_path, "Dataset (libsvm text, plain or .gz)")
      ->required();
  distill->add_option("--teacher", distill_args.teacher_path, "Teacher scores, one per line")
      ->required();
  distill->add_option("--out", distill_args.out_path, "Model output path")->required();
  distill->add_option("--task", distill_args.task, "classification | regression")
      ->check(CLI::IsMember({"classification", "regression"}));
  distill->add_option("-M,--anchors", distill_args.cfg.num_points, "Number of anchor points");
  distill->add_option("-p,--projected-dim", distill_args.cfg.projected_dim,
                      "Learned projection width; 0 hashes raw inputs");
  distill->add_option("--family", distill_args.family, "l2 | sparse")
      ->check(CLI::IsMember({"l2", "sparse"}));
  distill->add_option("-K,--concat", distill_args.concat, "Concatenated hashes per row")
      ->check(CLI::PositiveNumber);
  distill->add_option("-r,--bandwidth", distill_args.bandwidth,
                      "Kernel bandwidth, or \"auto\" for the median-distance grid");
  distill->add_option("--lr", distill_args.cfg.learning_rate, "Learning rate");
  distill->add_option("--epochs", distill_args.cfg.epochs, "Training epochs");
  distill->add_option("--batch-size", distill_args.cfg.batch_size, "Mini-batch size");
  distill->add_option("--momentum", distill_args.cfg.momentum, "Momentum coefficient");
  distill->add_option("--init", distill_args.init, "subsample | gaussian")
      ->check(CLI::IsMember({"subsample", "gaussian"}));
  distill->add_option("--val-fraction", distill_args.val_fraction,
                      "Held-out fraction for the reported MSE and the bandwidth grid");
  add_common(distill, distill_args.common);

  BuildArgs build_args;
  CLI::App* build = app.add_subcommand("build", "Build a sketch from a trained model");
  build->add_option("--model", build_args.model_path, "Model file")->required();
  build->add_option("--out", build_args.out_path, "Sketch output path")->required();
  build->add_option("-L,--rows", build_args.rows, "Sketch rows");
  build->add_option("-R,--range", build_args.range, "Buckets per row");
  build->add_option("--family", build_args.family,
                    "Override the hash family (l2 | sparse); the kernel is unchanged")
      ->check(CLI::IsMember({"l2", "sparse"}));
  add_common(build, build_args.common);

  QueryArgs query_args;
  CLI::App* query = app.add_subcommand("query", "Score dataset rows against a sketch");
  query->add_option("--sketch", query_args.sketch_path, "Sketch file")->required();
  query->add_option("--data", query_args.data_path, "Dataset (libsvm)")->required();
  query->add_option("--task", query_args.task, "Label convention of the file")
      ->check(CLI::IsMember({"classification", "regression"}));
  query->add_option("--estimator", query_args.estimator, "mom | mean")
      ->check(CLI::IsMember({"mom", "mean"}));
  query->add_option("-g,--groups", query_args.groups,
                    "Median-of-means groups; 0 picks the largest divisor of L up to 24");
  add_common(query, query_args.common);

  EvaluateArgs eval_args;
  CLI::App* evaluate = app.add_subcommand("evaluate", "Metric plus cost accounting on a test set");
  evaluate->add_option("--sketch", eval_args.sketch_path, "Sketch file");
  evaluate->add_option("--model", eval_args.model_path, "Model file (evaluates exact kernel sums)");
  evaluate->add_option("--data", eval_args.data_path, "Test dataset (libsvm)")->required();
  evaluate->add_option("--task", eval_args.task, "classification | regression")
      ->check(CLI::IsMember({"classification", "regression"}));
  evaluate->add_option("--estimator", eval_args.estimator, "mom | mean")
      ->check(CLI::IsMember({"mom", "mean"}));
  evaluate->add_option("-g,--groups", eval_args.groups, "Median-of-means groups; 0 = divisor rule");
  evaluate->add_option("--score-convention", eval_args.convention, "probability | sign")
      ->check(CLI::IsMember({"probability", "sign"}));
  evaluate->add_option("--nn-spec", eval_args.nn_spec,
                       "Baseline MLP hidden sizes like 512/256/128 for reduction ratios");
  add_common(evaluate, eval_args.common);

  VerifyArgs verify_args;
  CLI::App* verify = app.add_subcommand("verify", "Run the statistical verification suites");
  verify->add_flag("--quick", verify_args.quick, "Reduced trial counts, looser tolerances");
  add_common(verify, verify_args.common);

  InfoArgs info_args;
  CLI::App* info = app.add_subcommand("dataset-info", "Shape and label summary of a dataset");
  info->add_option("--data", info_args.data_path, "Dataset (libsvm)")->required();
  info->add_option("--task", info_args.task, "classification | regression")
      ->check(CLI::IsMember({"classification", "regression"}));
  add_common(info, info_args.common);

  try {
    app.parse(argc, argv);
    if (distill->parsed()) return cmd_distill(distill_args);
    if (build->parsed()) return cmd_build(build_args);
    if (query->parsed()) return cmd_query(query_args);
    if (evaluate->parsed()) return cmd_evaluate(eval_args);
    if (verify->parsed()) return cmd_verify(verify_args, verify->count("--seed") > 0);
    if (info->parsed()) return cmd_dataset_info(info_args);
    return kExitInputError;
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitInputError;
  } catch (const rsk::FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFormatError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInputError;
  }
}
