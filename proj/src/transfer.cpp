#include "emtl/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "emtl/error.hpp"

namespace emtl {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_shapes(const PreparedModel& model, const Matrix& H, const Dataset& target) {
  target.validate(model.num_labels());
  if (H.rows() != model.dim() || H.cols() != target.dim()) {
    throw Error(ErrorKind::invalid_input, "transfer matrix is " + std::to_string(H.rows()) + "x" +
                                              std::to_string(H.cols()) + ", expected " +
                                              std::to_string(model.dim()) + "x" +
                                              std::to_string(target.dim()));
  }
}

void check_gamma(const PreparedModel& model, const Dataset& target, const Responsibilities& gamma) {
  if (gamma.rows() != model.num_components() || gamma.cols() != static_cast<Eigen::Index>(target.size())) {
    throw Error(ErrorKind::invalid_input, "responsibility matrix has the wrong shape");
  }
}

// Responsibility-weighted moments of the target data per component:
// scatter_k = X diag(gamma_k) X^T, first_k = X gamma_k, mass_k = sum_j gamma_kj.
struct WeightedMoments {
  std::vector<Matrix> scatter;
  std::vector<Vector> first;
  Vector mass;

  WeightedMoments(const Dataset& target, const Responsibilities& gamma) {
    const auto k_count = gamma.rows();
    scatter.resize(static_cast<std::size_t>(k_count));
    first.resize(static_cast<std::size_t>(k_count));
    mass = gamma.rowwise().sum();
    const Matrix& X = target.points;  // N x n
    for (Eigen::Index k = 0; k < k_count; ++k) {
      const auto weights = gamma.row(k).transpose();
      first[static_cast<std::size_t>(k)] = X.transpose() * weights;
      scatter[static_cast<std::size_t>(k)] = X.transpose() * weights.asDiagonal() * X;
    }
  }
};

double shared_ridge_term(const PreparedModel& model, const Matrix& H, double ridge) {
  if (!(ridge > 0.0) || !model.precisions_shared()) return 0.0;
  return ridge * (model.precision(0) * H * H.transpose()).trace();
}

double moments_value(const PreparedModel& model, const WeightedMoments& mom, const Matrix& H) {
  double total = 0.0;
  const Matrix& means = model.model().means;
  for (int k = 0; k < model.num_components(); ++k) {
    const auto ks = static_cast<std::size_t>(k);
    if (mom.mass[k] == 0.0) continue;
    const Matrix& lambda = model.precision(k);
    const Vector mu = means.row(k).transpose();
    const Matrix lh = lambda * H;
    total += (lh * mom.scatter[ks]).cwiseProduct(H).sum() - 2.0 * mu.dot(lh * mom.first[ks]) +
             mom.mass[k] * mu.dot(lambda * mu);
  }
  return total;
}

Matrix moments_gradient(const PreparedModel& model, const WeightedMoments& mom, const Matrix& H) {
  Matrix grad = Matrix::Zero(H.rows(), H.cols());
  const Matrix& means = model.model().means;
  for (int k = 0; k < model.num_components(); ++k) {
    const auto ks = static_cast<std::size_t>(k);
    if (mom.mass[k] == 0.0) continue;
    const Vector mu = means.row(k).transpose();
    grad.noalias() += 2.0 * model.precision(k) * (H * mom.scatter[ks] - mu * mom.first[ks].transpose());
  }
  return grad;
}

Matrix closed_form(const PreparedModel& model, const Dataset& target, const Responsibilities& gamma,
                   double ridge) {
  if (!model.precisions_shared()) {
    throw Error(ErrorKind::invalid_configuration,
                "closed-form maximization requires one precision matrix shared by all components");
  }
  if (!(ridge >= 0.0)) throw Error(ErrorKind::invalid_input, "ridge must be non-negative");
  const Matrix& X = target.points;  // N x n
  const Eigen::Index n = X.cols();
  Matrix gram = X.transpose() * X;
  if (ridge == 0.0) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
    const double top = eig.eigenvalues().maxCoeff();
    if (!(top > 0.0) || eig.eigenvalues().minCoeff() <= 1e-12 * top) {
      throw Error(ErrorKind::singular_system,
                  "X X^T is rank deficient; use a positive ridge to regularize the closed-form step");
    }
  }
  gram.diagonal().array() += ridge;
  // rhs = (W Gamma X^T)^T = X^T Gamma^T W^T, n x m.
  const Matrix rhs = X.transpose() * (gamma.transpose() * model.model().means);
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::singular_system, "regularized normal equations are not positive definite");
  }
  Matrix Ht = llt.solve(rhs);
  if (!Ht.allFinite()) throw Error(ErrorKind::singular_system, "closed-form transfer matrix is not finite");
  (void)n;
  return Ht.transpose();
}

}  // namespace

void TransferConfig::validate() const {
  if (!(epsilon > 0.0)) throw Error(ErrorKind::invalid_configuration, "epsilon must be positive");
  if (max_iterations < 1) throw Error(ErrorKind::invalid_configuration, "max_iterations must be at least 1");
  if (ridge && !(*ridge >= 0.0)) throw Error(ErrorKind::invalid_configuration, "ridge must be non-negative");
  policy.validate();
  solver.validate();
}

Matrix padded_identity(Eigen::Index m, Eigen::Index n) { return Matrix::Identity(m, n); }

double default_ridge(const Dataset& target) {
  return 1e-8 * target.points.squaredNorm() / static_cast<double>(target.dim());
}

Responsibilities e_step(const PreparedModel& model, const Matrix& H, const Dataset& target) {
  check_shapes(model, H, target);
  const int k_count = model.num_components();
  const auto n_points = static_cast<Eigen::Index>(target.size());
  const Matrix mapped = H * target.points.transpose();  // m x N
  Responsibilities gamma(k_count, n_points);
  std::vector<double> terms(static_cast<std::size_t>(k_count));
  for (Eigen::Index j = 0; j < n_points; ++j) {
    const int y = target.labels[static_cast<std::size_t>(j)];
    double top = kNegInf;
    for (int k = 0; k < k_count; ++k) {
      double t = model.log_label_cond(k, y) + model.log_prior(k);
      if (t != kNegInf) t += model.log_density(k, mapped.col(j));
      terms[static_cast<std::size_t>(k)] = t;
      top = std::max(top, t);
    }
    if (!std::isfinite(top)) {
      throw DegenerateResponsibilityError(static_cast<std::size_t>(j),
                                          "target point " + std::to_string(j) + " (label " +
                                              std::to_string(y) +
                                              ") has zero probability under every component");
    }
    double sum = 0.0;
    for (int k = 0; k < k_count; ++k) sum += std::exp(terms[static_cast<std::size_t>(k)] - top);
    const double lse = top + std::log(sum);
    for (int k = 0; k < k_count; ++k) gamma(k, j) = std::exp(terms[static_cast<std::size_t>(k)] - lse);
  }
  return gamma;
}

Responsibilities e_step(const LabeledGMM& model, const Matrix& H, const Dataset& target,
                        const PrecisionPolicy& policy) {
  const PreparedModel prepared(model, policy);
  return e_step(prepared, H, target);
}

double eq_error(const PreparedModel& model, const Matrix& H, const Dataset& target,
                const Responsibilities& gamma, double ridge) {
  check_shapes(model, H, target);
  check_gamma(model, target, gamma);
  const Matrix mapped = H * target.points.transpose();
  const Matrix& means = model.model().means;
  double total = 0.0;
  Vector residual(model.dim());
  for (int k = 0; k < model.num_components(); ++k) {
    const Matrix& lambda = model.precision(k);
    for (Eigen::Index j = 0; j < mapped.cols(); ++j) {
      const double g = gamma(k, j);
      if (g == 0.0) continue;
      residual = mapped.col(j) - means.row(k).transpose();
      total += g * residual.dot(lambda * residual);
    }
  }
  return total + shared_ridge_term(model, H, ridge);
}

double eq_error(const LabeledGMM& model, const Matrix& H, const Dataset& target,
                const Responsibilities& gamma, double ridge, const PrecisionPolicy& policy) {
  const PreparedModel prepared(model, policy);
  return eq_error(prepared, H, target, gamma, ridge);
}

Matrix eq_gradient(const PreparedModel& model, const Matrix& H, const Dataset& target,
                   const Responsibilities& gamma, double ridge) {
  check_shapes(model, H, target);
  check_gamma(model, target, gamma);
  const WeightedMoments mom(target, gamma);
  Matrix grad = moments_gradient(model, mom, H);
  if (ridge > 0.0 && model.precisions_shared()) grad += 2.0 * ridge * model.precision(0) * H;
  return grad;
}

Matrix eq_gradient(const LabeledGMM& model, const Matrix& H, const Dataset& target,
                   const Responsibilities& gamma, double ridge, const PrecisionPolicy& policy) {
  const PreparedModel prepared(model, policy);
  return eq_gradient(prepared, H, target, gamma, ridge);
}

Matrix m_step_closed_form(const LabeledGMM& model, const Dataset& target, const Responsibilities& gamma,
                          double ridge) {
  const PreparedModel prepared(model, PrecisionPolicy{});
  target.validate(model.num_labels());
  check_gamma(prepared, target, gamma);
  return closed_form(prepared, target, gamma, ridge);
}

GradientStepResult m_step_gradient(const PreparedModel& model, const Dataset& target,
                                   const Responsibilities& gamma, const Matrix& H_init,
                                   const SolverConfig& solver) {
  check_shapes(model, H_init, target);
  check_gamma(model, target, gamma);
  const WeightedMoments mom(target, gamma);
  const Eigen::Index m = H_init.rows();
  const Eigen::Index n = H_init.cols();

  // Normalize so the tolerance is relative to the starting gradient, but
  // never finer than 1e-6 of the curvature scale (warm starts at the optimum).
  double curvature = 0.0;
  for (int k = 0; k < model.num_components(); ++k) {
    curvature += 2.0 * model.precision(k).trace() * mom.scatter[static_cast<std::size_t>(k)].trace();
  }
  const double start_grad = moments_gradient(model, mom, H_init).lpNorm<Eigen::Infinity>();
  double scale = std::max(start_grad, 1e-6 * curvature);
  if (!(scale > 0.0) || !std::isfinite(scale)) scale = 1.0;

  // Parameters are H flattened row-major.
  auto unflatten = [m, n](const Vector& v) {
    return Matrix(Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        v.data(), m, n));
  };
  auto flatten = [m, n](const Matrix& h) {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> row_major = h;
    return Vector(Eigen::Map<const Vector>(row_major.data(), m * n));
  };

  const Objective objective = [&](const Vector& v, Vector& grad) {
    const Matrix h = unflatten(v);
    grad = flatten(moments_gradient(model, mom, h)) / scale;
    return moments_value(model, mom, h) / scale;
  };
  const SolverResult res = minimize(objective, flatten(H_init), solver);
  GradientStepResult out;
  out.H = unflatten(res.x);
  out.status = res.status;
  out.evaluations = res.evaluations;
  out.scale = scale;
  return out;
}

GradientStepResult m_step_gradient(const LabeledGMM& model, const Dataset& target,
                                   const Responsibilities& gamma, const Matrix& H_init,
                                   const SolverConfig& solver, const PrecisionPolicy& policy) {
  const PreparedModel prepared(model, policy);
  return m_step_gradient(prepared, target, gamma, H_init, solver);
}

TransferMap em_transfer(const LabeledGMM& model, const Dataset& target, const TransferConfig& config) {
  config.validate();
  const PreparedModel prepared(model, config.policy);
  target.validate(model.num_labels());
  const double ridge = config.ridge.value_or(default_ridge(target));
  const bool shared = prepared.precisions_shared();
  const double eq_ridge = shared ? ridge : 0.0;

  TransferMap map;
  map.H = padded_identity(model.dim(), target.dim());
  double previous = std::numeric_limits<double>::infinity();
  double threshold = config.epsilon;
  Dataset mapped{Matrix(), target.labels};

  for (int it = 0; it < config.max_iterations; ++it) {
    const Responsibilities gamma = e_step(prepared, map.H, target);
    if (it == 0 && config.relative_epsilon) {
      threshold = config.epsilon * std::max(1.0, eq_error(prepared, map.H, target, gamma, eq_ridge));
    }
    if (shared) {
      map.H = closed_form(prepared, target, gamma, ridge);
    } else {
      GradientStepResult step = m_step_gradient(prepared, target, gamma, map.H, config.solver);
      if (step.status == SolverStatus::numerical_failure) {
        throw Error(ErrorKind::numerical_failure, "maximization step produced non-finite values");
      }
      map.H = std::move(step.H);
    }
    const double e = eq_error(prepared, map.H, target, gamma, eq_ridge);
    mapped.points = target.points * map.H.transpose();
    map.eq_error_trace.push_back(e);
    map.loglik_trace.push_back(log_likelihood(prepared, mapped));
    map.iterations = it + 1;
    if (std::abs(previous - e) < threshold) {
      map.converged = true;
      break;
    }
    previous = e;
  }
  return map;
}

Vector apply_transfer(const TransferMap& map, const Vector& x) {
  if (x.size() != map.H.cols()) {
    throw Error(ErrorKind::invalid_input, "point has dimension " + std::to_string(x.size()) +
                                              ", transfer map expects " + std::to_string(map.H.cols()));
  }
  return map.H * x;
}

}  // namespace emtl
