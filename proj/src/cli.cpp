#include "emtl/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <variant>

#include <CLI11.hpp>

#include "emtl/bench.hpp"
#include "emtl/datagen.hpp"
#include "emtl/error.hpp"
#include "emtl/io.hpp"
#include "emtl/lgmm.hpp"
#include "emtl/lvq.hpp"
#include "emtl/transfer.hpp"

namespace emtl {

namespace {

struct Options {
  std::optional<std::uint64_t> seed;
  std::string method;
  std::vector<int> n_grid;
  std::optional<int> folds;
  std::vector<int> exclude_classes;
  std::optional<double> sigma;
  std::optional<double> epsilon;
  std::optional<double> ridge;
  std::string out;

  // generate
  std::string dataset = "toy";
  std::string role = "source";
  int n_per_class = 100;

  // train / transfer / predict
  std::string data;
  std::string model;
  std::string transfer_map;
  int epochs = 100;
  int prototypes_per_class = 1;
  int components = 1;
  bool shared = false;

  // benchmark
  std::string config;
  std::optional<int> threads;
  bool no_timing = false;
};

void write_text(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    save_document(text, path);
  }
}

int cmd_generate(const Options& o, std::ostream& out) {
  const std::uint64_t seed = o.seed.value_or(0);
  Dataset data;
  const bool source = o.role == "source";
  if (o.role != "source" && o.role != "target") {
    throw Error(ErrorKind::invalid_input, "--role must be source or target");
  }
  if (o.dataset == "toy") {
    data = source ? toy_source(o.n_per_class, seed) : toy_target(o.n_per_class, seed);
  } else if (o.dataset == "cigars") {
    data = source ? cigars_source(o.n_per_class, seed) : cigars_target(o.n_per_class, seed);
  } else if (o.dataset == "ambiguous") {
    data = toy_ambiguous(o.n_per_class, seed);
  } else {
    throw Error(ErrorKind::invalid_input, "unknown dataset '" + o.dataset + "'");
  }
  if (!o.exclude_classes.empty()) data = exclude_classes(data, o.exclude_classes);
  if (o.out.empty() || o.out == "-") {
    write_dataset_csv(data, out);
  } else {
    write_dataset_csv(data, o.out);
  }
  return 0;
}

int cmd_train(const Options& o, std::ostream& out) {
  Dataset data = read_dataset_csv(o.data);
  if (!o.exclude_classes.empty()) data = exclude_classes(data, o.exclude_classes);
  const std::string method = o.method.empty() ? "gmlvq" : o.method;
  if (method == "gmlvq" || method == "lgmlvq") {
    LvqTrainingConfig config;
    config.seed = o.seed.value_or(0);
    config.epochs = o.epochs;
    config.prototypes_per_class = o.prototypes_per_class;
    const LvqModel model = method == "gmlvq" ? train_gmlvq(data, config) : train_lgmlvq(data, config);
    write_text(to_document(model), o.out, out);
  } else if (method == "lgmm") {
    LgmmFitConfig config;
    config.seed = o.seed.value_or(0);
    config.components_per_label = o.components;
    config.shared_precision = o.shared;
    write_text(to_document(fit_lgmm(data, config).model), o.out, out);
  } else {
    throw Error(ErrorKind::invalid_input, "unknown training method '" + method + "'");
  }
  return 0;
}

LabeledGMM model_as_lgmm(const ModelDocument& doc, const std::optional<double>& sigma) {
  if (const auto* gmm = std::get_if<LabeledGMM>(&doc)) return *gmm;
  if (const auto* lvq = std::get_if<LvqModel>(&doc)) {
    return to_lgmm(*lvq, sigma.value_or(default_conversion_sigma(*lvq)));
  }
  throw Error(ErrorKind::invalid_input, "model document must hold an lGMM or an LVQ model");
}

int cmd_transfer(const Options& o, std::ostream& out) {
  const LabeledGMM model = model_as_lgmm(load_document(o.model), o.sigma);
  Dataset data = read_dataset_csv(o.data);
  if (!o.exclude_classes.empty()) data = exclude_classes(data, o.exclude_classes);
  TransferConfig config;
  if (o.epsilon) config.epsilon = *o.epsilon;
  config.ridge = o.ridge;
  const TransferMap map = em_transfer(model, data, config);
  write_text(to_document(map), o.out, out);
  return 0;
}

int cmd_predict(const Options& o, std::ostream& out) {
  const ModelDocument doc = load_document(o.model);
  const Dataset data = read_dataset_csv(o.data);
  std::optional<Matrix> H;
  if (!o.transfer_map.empty()) {
    const ModelDocument map = load_document(o.transfer_map);
    if (!std::holds_alternative<TransferMap>(map)) {
      throw Error(ErrorKind::invalid_input, o.transfer_map + " is not a transfer map");
    }
    H = std::get<TransferMap>(map).H;
  }
  if (std::holds_alternative<TransferMap>(doc)) {
    throw Error(ErrorKind::invalid_input, "--model must be an lGMM or an LVQ model");
  }
  const Eigen::Index model_dim = std::holds_alternative<LabeledGMM>(doc) ? std::get<LabeledGMM>(doc).dim()
                                                                         : std::get<LvqModel>(doc).dim();
  Dataset predicted{data.points, {}};
  if (H && (H->cols() != data.dim() || H->rows() != model_dim)) {
    throw Error(ErrorKind::invalid_input, "transfer map shape does not match model and data");
  }
  if (!H && data.dim() != model_dim) {
    throw Error(ErrorKind::invalid_input, "data dimension does not match the model");
  }
  std::optional<PreparedModel> prepared;
  if (const auto* gmm = std::get_if<LabeledGMM>(&doc)) prepared.emplace(*gmm, PrecisionPolicy{});
  std::size_t wrong = 0;
  for (std::size_t j = 0; j < data.size(); ++j) {
    Vector x = data.points.row(static_cast<Eigen::Index>(j)).transpose();
    if (H) x = *H * x;
    const int label =
        prepared ? classify(*prepared, x) : lvq_classify(std::get<LvqModel>(doc), x);
    predicted.labels.push_back(label);
    if (label != data.labels[j]) ++wrong;
  }
  if (o.out.empty() || o.out == "-") {
    write_dataset_csv(predicted, out);
  } else {
    write_dataset_csv(predicted, o.out);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", static_cast<double>(wrong) / static_cast<double>(data.size()));
    out << "error " << buf << "\n";
  }
  return 0;
}

int cmd_benchmark(const Options& o, std::ostream& out, std::ostream& err) {
  ExperimentConfig config =
      o.config.empty() ? ExperimentConfig::defaults_for(DatasetChoice::toy) : load_experiment_config(o.config);
  if (o.seed) config.seed = *o.seed;
  if (!o.method.empty()) {
    config.methods.clear();
    std::string name;
    std::stringstream list(o.method);
    while (std::getline(list, name, ',')) {
      const auto m = parse_method(name);
      if (!m) throw Error(ErrorKind::invalid_input, "unknown method '" + name + "'");
      config.methods.push_back(*m);
    }
  }
  if (!o.n_grid.empty()) config.n_grid = o.n_grid;
  if (o.folds) config.folds = *o.folds;
  if (!o.exclude_classes.empty()) config.excluded_classes = o.exclude_classes;
  if (o.sigma) config.sigma = o.sigma;
  if (o.epsilon) config.transfer.epsilon = *o.epsilon;
  if (o.ridge) config.transfer.ridge = o.ridge;
  if (!o.out.empty()) config.output_path = o.out == "-" ? "" : o.out;
  if (o.threads) config.threads = *o.threads;
  if (o.no_timing) config.measure_time = false;
  const ExperimentReport report = run_experiment(config);
  if (config.output_path.empty()) write_report_csv(report, out);
  for (const auto& message : report.failure_messages) err << "failure: " << message << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Linear transfer of prototype and Gaussian mixture classifiers"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "Root seed");
    sub->add_option("--out", o.out, "Output file ('-' for standard output)");
  };

  auto* generate = app.add_subcommand("generate", "Write a synthetic dataset as CSV");
  add_common(generate);
  generate->add_option("--dataset", o.dataset, "toy, cigars or ambiguous");
  generate->add_option("--role", o.role, "source or target");
  generate->add_option("--n-per-class", o.n_per_class, "Points per class")->check(CLI::PositiveNumber);
  generate->add_option("--exclude-classes", o.exclude_classes, "Labels to drop")->delimiter(',');

  auto* train = app.add_subcommand("train", "Fit a source model and write it as a model document");
  add_common(train);
  train->add_option("--data", o.data, "Training CSV")->required();
  train->add_option("--method", o.method, "gmlvq, lgmlvq or lgmm");
  train->add_option("--epochs", o.epochs, "LVQ epochs")->check(CLI::PositiveNumber);
  train->add_option("--prototypes-per-class", o.prototypes_per_class)->check(CLI::PositiveNumber);
  train->add_option("--components", o.components, "lGMM components per label")->check(CLI::PositiveNumber);
  train->add_flag("--shared", o.shared, "lGMM with one shared precision matrix");
  train->add_option("--exclude-classes", o.exclude_classes, "Labels to drop")->delimiter(',');

  auto* transfer = app.add_subcommand("transfer", "Fit a transfer matrix for target data");
  add_common(transfer);
  transfer->add_option("--model", o.model, "Source model document")->required();
  transfer->add_option("--data", o.data, "Target CSV")->required();
  transfer->add_option("--sigma", o.sigma, "Width for converting an LVQ model");
  transfer->add_option("--epsilon", o.epsilon, "Stopping threshold");
  transfer->add_option("--ridge", o.ridge, "Ridge strength for the closed-form step");
  transfer->add_option("--exclude-classes", o.exclude_classes, "Labels to drop")->delimiter(',');

  auto* benchmark = app.add_subcommand("benchmark", "Run a crossvalidated experiment");
  add_common(benchmark);
  benchmark->add_option("--config", o.config, "Experiment config file");
  benchmark->add_option("--method", o.method, "Comma separated methods");
  benchmark->add_option("--n-grid", o.n_grid, "Target training sizes")->delimiter(',');
  benchmark->add_option("--folds", o.folds, "Number of folds");
  benchmark->add_option("--exclude-classes", o.exclude_classes, "Labels missing from target training")
      ->delimiter(',');
  benchmark->add_option("--sigma", o.sigma, "Width for converting LVQ models");
  benchmark->add_option("--epsilon", o.epsilon, "Stopping threshold");
  benchmark->add_option("--ridge", o.ridge, "Ridge strength");
  benchmark->add_option("--threads", o.threads, "Worker threads (0 = all)");
  benchmark->add_flag("--no-timing", o.no_timing, "Write zero runtimes");

  auto* predict = app.add_subcommand("predict", "Classify a CSV, optionally through a transfer map");
  add_common(predict);
  predict->add_option("--model", o.model, "Model document")->required();
  predict->add_option("--data", o.data, "CSV to classify")->required();
  predict->add_option("--transfer", o.transfer_map, "Transfer map document");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (generate->parsed()) return cmd_generate(o, out);
    if (train->parsed()) return cmd_train(o, out);
    if (transfer->parsed()) return cmd_transfer(o, out);
    if (benchmark->parsed()) return cmd_benchmark(o, out, err);
    if (predict->parsed()) return cmd_predict(o, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_numerical(e.kind()) ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace emtl
