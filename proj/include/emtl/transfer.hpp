#pragma once

#include <optional>
#include <vector>

#include "emtl/dataset.hpp"
#include "emtl/lgmm.hpp"
#include "emtl/optim.hpp"

namespace emtl {

/// K x N matrix of component posteriors; column j belongs to target point j.
using Responsibilities = Matrix;

struct TransferConfig {
  /// Stop once |E_Q - E_Q'| < epsilon (times max(1, E_Q at the initial map)
  /// when relative_epsilon is set).
  double epsilon = 1e-5;
  bool relative_epsilon = true;
  int max_iterations = 200;
  /// Ridge strength for the closed-form step; unset means
  /// 1e-8 * trace(X X^T) / n for the target data X.
  std::optional<double> ridge;
  PrecisionPolicy policy;
  SolverConfig solver;  // only used when precisions differ between components

  void validate() const;
};

struct TransferMap {
  Matrix H;  // m x n: target space -> source space
  int iterations = 0;
  bool converged = false;
  std::vector<double> eq_error_trace;
  std::vector<double> loglik_trace;

  double final_eq_error() const { return eq_error_trace.empty() ? 0.0 : eq_error_trace.back(); }
};

/// min(m, n) identity padded with zeros to m x n.
Matrix padded_identity(Eigen::Index m, Eigen::Index n);

double default_ridge(const Dataset& target);

/// gamma_{k|j} proportional to N(H x_j | mu_k, Lambda_k) P(y_j | k) P(k).
/// Throws DegenerateResponsibilityError for a point no component can explain.
Responsibilities e_step(const PreparedModel& model, const Matrix& H, const Dataset& target);
Responsibilities e_step(const LabeledGMM& model, const Matrix& H, const Dataset& target,
                        const PrecisionPolicy& policy = {});

/// sum_j sum_k gamma_kj (H x_j - mu_k)^T Lambda_k (H x_j - mu_k), plus
/// ridge * trace(Lambda H H^T) when ridge > 0 and the precisions are shared.
double eq_error(const PreparedModel& model, const Matrix& H, const Dataset& target,
                const Responsibilities& gamma, double ridge = 0.0);
double eq_error(const LabeledGMM& model, const Matrix& H, const Dataset& target,
                const Responsibilities& gamma, double ridge = 0.0, const PrecisionPolicy& policy = {});

/// Analytic gradient of eq_error with respect to H.
Matrix eq_gradient(const PreparedModel& model, const Matrix& H, const Dataset& target,
                   const Responsibilities& gamma, double ridge = 0.0);
Matrix eq_gradient(const LabeledGMM& model, const Matrix& H, const Dataset& target,
                   const Responsibilities& gamma, double ridge = 0.0, const PrecisionPolicy& policy = {});

/// H = W Gamma X^T (X X^T + ridge I)^{-1}. Requires shared precisions; with
/// ridge == 0 a rank-deficient X X^T raises singular_system.
Matrix m_step_closed_form(const LabeledGMM& model, const Dataset& target, const Responsibilities& gamma,
                          double ridge);

struct GradientStepResult {
  Matrix H;
  SolverStatus status = SolverStatus::converged;
  int evaluations = 0;
  /// Normalization applied to E_Q before solving; the solver tolerance
  /// applies to the gradient of E_Q / scale.
  double scale = 1.0;
};

/// Minimizes eq_error (no ridge) with the quasi-Newton solver, starting at H_init.
GradientStepResult m_step_gradient(const PreparedModel& model, const Dataset& target,
                                   const Responsibilities& gamma, const Matrix& H_init,
                                   const SolverConfig& solver = {});
GradientStepResult m_step_gradient(const LabeledGMM& model, const Dataset& target,
                                   const Responsibilities& gamma, const Matrix& H_init,
                                   const SolverConfig& solver = {}, const PrecisionPolicy& policy = {});

/// Expectation maximization for the linear transfer matrix.
TransferMap em_transfer(const LabeledGMM& model, const Dataset& target, const TransferConfig& config = {});

Vector apply_transfer(const TransferMap& map, const Vector& x);

}  // namespace emtl
