#pragma once

#include <cstdint>
#include <vector>

#include "emtl/dataset.hpp"

namespace emtl {

/// How degenerate precision matrices are made into valid densities.
///
/// eigen_floor keeps every component's standard deviation along each
/// eigendirection inside [min_std, max_std]: precision eigenvalues are
/// clamped to [1/max_std^2, 1/min_std^2]. pseudo_determinant evaluates the
/// quadratic form with the matrix as given and replaces det by the product
/// of eigenvalues above 1e-12 times the largest one.
struct PrecisionPolicy {
  enum class Mode { eigen_floor, pseudo_determinant };

  Mode mode = Mode::eigen_floor;
  double min_std = 1e-3;
  double max_std = 1e3;

  static PrecisionPolicy eigen_floor(double min_std = 1e-3, double max_std = 1e3);
  static PrecisionPolicy pseudo_determinant();

  void validate() const;
};

/// Labeled Gaussian mixture: p(x, y) = sum_k N(x | mu_k, Lambda_k) P(y|k) P(k).
struct LabeledGMM {
  Matrix means;                   // K x m, row k is mu_k
  std::vector<Matrix> precisions;  // K matrices, m x m
  bool shared_precision = false;
  Matrix label_cond;  // K x L, row-stochastic
  Vector priors;      // K

  int num_components() const { return static_cast<int>(means.rows()); }
  int num_labels() const { return static_cast<int>(label_cond.cols()); }
  Eigen::Index dim() const { return means.cols(); }

  /// Checks shapes and the stochastic/PSD invariants.
  void validate() const;
};

/// One component's precision after applying a PrecisionPolicy.
struct ConditionedPrecision {
  Matrix precision;
  Vector eigenvalues;  // of `precision`, ascending; exact clamp results under eigen_floor
  double log_det = 0.0;
};

ConditionedPrecision condition_precision(const Matrix& precision, const PrecisionPolicy& policy);

/// Model with every precision conditioned once, for repeated evaluation.
/// Immutable after construction and safe to share between threads.
class PreparedModel {
 public:
  PreparedModel(const LabeledGMM& model, const PrecisionPolicy& policy);
  PreparedModel(LabeledGMM&&, const PrecisionPolicy&) = delete;

  const LabeledGMM& model() const { return *model_; }
  int num_components() const { return model_->num_components(); }
  int num_labels() const { return model_->num_labels(); }
  Eigen::Index dim() const { return model_->dim(); }

  const Matrix& precision(int k) const { return components_[static_cast<std::size_t>(k)].precision; }
  const ConditionedPrecision& component(int k) const {
    return components_[static_cast<std::size_t>(k)];
  }

  /// True when all conditioned precisions are identical.
  bool precisions_shared() const { return shared_; }

  double log_density(int k, const Eigen::Ref<const Vector>& x) const;
  double log_label_cond(int k, int label) const;
  double log_prior(int k) const { return log_priors_[k]; }

 private:
  const LabeledGMM* model_;
  std::vector<ConditionedPrecision> components_;
  Vector log_priors_;
  Matrix log_label_cond_;
  double log_two_pi_term_ = 0.0;
  bool shared_ = false;
};

double log_component_density(const LabeledGMM& model, int k, const Vector& x,
                             const PrecisionPolicy& policy = {});

/// p(x, y); labels are 1-based.
double joint_density(const LabeledGMM& model, const Vector& x, int y,
                     const PrecisionPolicy& policy = {});
double log_joint_density(const PreparedModel& model, const Eigen::Ref<const Vector>& x, int y);

/// P(y | x) for y = 1..L, stored at index y-1.
Vector posterior_labels(const LabeledGMM& model, const Vector& x, const PrecisionPolicy& policy = {});
Vector posterior_labels(const PreparedModel& model, const Eigen::Ref<const Vector>& x);

/// MAP label; ties go to the smallest label.
int classify(const LabeledGMM& model, const Vector& x, const PrecisionPolicy& policy = {});
int classify(const PreparedModel& model, const Eigen::Ref<const Vector>& x);

/// sum_j log p(x_j, y_j). Returns -infinity when some point is impossible
/// under the model (its label has zero probability under every component).
double log_likelihood(const LabeledGMM& model, const Dataset& data, const PrecisionPolicy& policy = {});
double log_likelihood(const PreparedModel& model, const Dataset& data);

struct LgmmFitConfig {
  int components_per_label = 1;
  bool shared_precision = false;
  PrecisionPolicy policy;
  std::uint64_t seed = 0;
  int restarts = 1;
  double tolerance = 1e-6;
  int max_iterations = 500;
};

struct LgmmFitResult {
  LabeledGMM model;
  std::vector<double> loglik_trace;  // of the returned restart
  int iterations = 0;
  bool converged = false;
};

/// EM for a labeled mixture with crisp labels: every component owns exactly
/// one label, components_per_label of them per label present in `data`.
LgmmFitResult fit_lgmm(const Dataset& data, const LgmmFitConfig& config);

}  // namespace emtl
