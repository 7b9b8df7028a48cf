#pragma once

#include <cstdint>
#include <vector>

#include "emtl/dataset.hpp"
#include "emtl/lgmm.hpp"

namespace emtl {

enum class MetricKind {
  shared,  // GMLVQ: one Omega for every prototype
  local,   // LGMLVQ: one Omega per prototype
};

struct LvqModel {
  Matrix prototypes;             // K x m, row k is prototype k
  std::vector<int> labels;       // K, 1-based
  MetricKind metric = MetricKind::shared;
  std::vector<Matrix> omegas;    // 1 (shared) or K (local) matrices, m x m

  int num_prototypes() const { return static_cast<int>(prototypes.rows()); }
  Eigen::Index dim() const { return prototypes.cols(); }
  int num_labels() const;
  const Matrix& omega(int k) const {
    return metric == MetricKind::shared ? omegas.front() : omegas[static_cast<std::size_t>(k)];
  }

  void validate() const;
};

/// Logistic sigmoid with slope beta.
struct Sigmoid {
  double beta = 1.0;

  double operator()(double z) const;
  double derivative(double z) const;
};

struct LvqTrainingConfig {
  int prototypes_per_class = 1;
  int epochs = 100;
  double learning_rate_prototypes = 0.01;
  double learning_rate_omega = 0.001;
  Sigmoid phi;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Squared metric distance (mu_k - x)^T Omega_k^T Omega_k (mu_k - x).
double lvq_distance(const LvqModel& model, int k, const Eigen::Ref<const Vector>& x);

/// Closest same-label (d+) and different-label (d-) prototypes of one sample.
struct Winners {
  int plus = -1;
  int minus = -1;
  double d_plus = 0.0;
  double d_minus = 0.0;
};

Winners find_winners(const LvqModel& model, const Eigen::Ref<const Vector>& x, int label);

/// (d+ - d-) / (d+ + d-); 0 when both distances vanish.
double relative_distance_difference(double d_plus, double d_minus);

/// sum_i phi((d+ - d-) / (d+ + d-)).
double glvq_cost(const LvqModel& model, const Dataset& data, const Sigmoid& phi = {});

LvqModel train_gmlvq(const Dataset& data, const LvqTrainingConfig& config);
LvqModel train_lgmlvq(const Dataset& data, const LvqTrainingConfig& config);

/// Label of the nearest prototype; ties go to the smallest prototype index.
int lvq_classify(const LvqModel& model, const Eigen::Ref<const Vector>& x);

/// Fraction of misclassified points, optionally after mapping x -> H x.
double lvq_error(const LvqModel& model, const Dataset& data);
double lvq_error(const LvqModel& model, const Dataset& data, const Matrix& transfer);

/// Median over ordered prototype pairs of sqrt(d^2_k(mu_l)); 0 for K = 1.
double median_prototype_distance(const LvqModel& model);

/// 0.05 x median_prototype_distance (1.0 when that is 0).
double default_conversion_sigma(const LvqModel& model);

/// lGMM with means = prototypes, Lambda_k = Omega_k^T Omega_k / sigma^2,
/// one-hot label distributions and uniform priors.
LabeledGMM to_lgmm(const LvqModel& model, double sigma);

}  // namespace emtl
