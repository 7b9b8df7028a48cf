#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "emtl/datagen.hpp"
#include "emtl/dataset.hpp"
#include "emtl/lvq.hpp"
#include "emtl/optim.hpp"
#include "emtl/transfer.hpp"

namespace emtl {

enum class Method {
  source,          // GMLVQ source model on held-out source data
  source_loc,      // LGMLVQ source model on held-out source data
  naive,           // GMLVQ source model applied to target data unchanged
  naive_loc,       // same for LGMLVQ
  em,              // EM transfer through the GMLVQ-derived lGMM (shared precision)
  em_loc,          // EM transfer through the LGMLVQ-derived lGMM (local precisions)
  retrain,         // new GMLVQ on the target training data
  retrain_loc,     // new LGMLVQ on the target training data
  gmlvq_transfer,  // H fitted by minimizing the GLVQ cost of the GMLVQ source model
};

std::string_view method_name(Method method);
std::optional<Method> parse_method(std::string_view name);

enum class DatasetChoice { toy, cigars, csv, custom };

std::string_view dataset_name(DatasetChoice choice);
std::optional<DatasetChoice> parse_dataset(std::string_view name);

struct ExperimentConfig {
  DatasetChoice dataset = DatasetChoice::toy;
  std::vector<Method> methods;
  std::vector<int> n_grid;
  int folds = 10;
  std::vector<int> excluded_classes;
  std::uint64_t seed = 0;
  std::string output_path;

  int n_per_class = 0;     // training pool per class for generated data; 0 = dataset default
  int test_per_class = 0;  // held-out samples per class; 0 = n_per_class
  std::string source_csv;  // dataset == csv
  std::string target_csv;
  std::string target_test_csv;  // optional; defaults to target_csv
  GeneratorSpec custom_source;  // dataset == custom; counts and seeds are set per fold
  GeneratorSpec custom_target;

  std::optional<double> sigma;  // lGMM conversion width; default per model
  LvqTrainingConfig lvq;
  TransferConfig transfer;
  SolverConfig gmlvq_transfer_solver;
  int threads = 0;            // 0 = one per hardware thread
  bool measure_time = true;   // false writes zero times, making reports byte-reproducible

  /// The standard protocol for toy (10 folds, N in {4..64}) or cigars
  /// (30 folds, N in {4..64} including 12); class 3 excluded from the
  /// target training data.
  static ExperimentConfig defaults_for(DatasetChoice dataset);

  void validate() const;
};

/// Flat `key = value` text, '#' starts a comment. Keys not given keep the
/// defaults of the chosen dataset.
ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::string& path);

struct MethodStats {
  double err_mean = 0.0;
  double err_std = 0.0;
  double time_mean = 0.0;
  double time_std = 0.0;
  int folds = 0;     // successful folds
  int failures = 0;  // folds where the method raised an error
};

struct ExperimentReport {
  std::vector<Method> methods;
  std::vector<int> n_grid;
  std::vector<std::vector<MethodStats>> stats;  // [method][n index]
  // Per-fold raw values; NaN marks a failure.
  std::vector<std::vector<std::vector<double>>> fold_errors;  // [method][n index][fold]
  std::vector<std::vector<std::vector<double>>> fold_times;
  std::vector<std::string> failure_messages;

  const MethodStats& at(Method method, int n) const;
  bool has(Method method) const;
};

double baseline_naive(const LvqModel& source_model, const Dataset& target_test);

double baseline_retrain(const Dataset& target_train, const Dataset& target_test, MetricKind family,
                        const LvqTrainingConfig& config);

/// GLVQ cost of the source model evaluated at H x, and its gradient in H.
double glvq_transfer_cost(const LvqModel& source_model, const Dataset& target, const Matrix& H,
                          const Sigmoid& phi, Matrix* gradient = nullptr);

struct GmlvqTransferResult {
  Matrix H;
  double error = 0.0;
  SolverStatus status = SolverStatus::converged;
};

/// Fits H (zero-padded identity start) by full-batch quasi-Newton descent on
/// the GLVQ cost and reports the test error of lvq_classify(H x).
GmlvqTransferResult baseline_gmlvq_transfer(const LvqModel& source_model, const Dataset& target_train,
                                            const Dataset& target_test, const SolverConfig& solver = {},
                                            const Sigmoid& phi = {});

ExperimentReport run_experiment(const ExperimentConfig& config);

}  // namespace emtl
