#include "emtl/lgmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "emtl/error.hpp"
#include "emtl/rng.hpp"

namespace emtl {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLogTwoPi = 1.8378770664093454836;  // log(2 pi)
constexpr double kPseudoDetRelThreshold = 1e-12;

double log_sum_exp(const double* values, std::size_t n) {
  double top = kNegInf;
  for (std::size_t i = 0; i < n; ++i) top = std::max(top, values[i]);
  if (top == kNegInf) return kNegInf;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += std::exp(values[i] - top);
  return top + std::log(sum);
}

double matrix_scale(const Matrix& m) { return std::max(1.0, m.cwiseAbs().maxCoeff()); }

void check_label(const PreparedModel& model, int y) {
  if (y < 1 || y > model.num_labels()) {
    throw Error(ErrorKind::invalid_input, "label " + std::to_string(y) + " outside 1.." +
                                              std::to_string(model.num_labels()));
  }
}

void check_point(const PreparedModel& model, const Eigen::Ref<const Vector>& x) {
  if (x.size() != model.dim()) {
    throw Error(ErrorKind::invalid_input, "point has dimension " + std::to_string(x.size()) +
                                              ", model expects " + std::to_string(model.dim()));
  }
  if (!x.allFinite()) throw Error(ErrorKind::invalid_input, "point has non-finite entries");
}

}  // namespace

PrecisionPolicy PrecisionPolicy::eigen_floor(double min_std, double max_std) {
  PrecisionPolicy p;
  p.mode = Mode::eigen_floor;
  p.min_std = min_std;
  p.max_std = max_std;
  p.validate();
  return p;
}

PrecisionPolicy PrecisionPolicy::pseudo_determinant() {
  PrecisionPolicy p;
  p.mode = Mode::pseudo_determinant;
  return p;
}

void PrecisionPolicy::validate() const {
  if (!(min_std > 0.0) || !std::isfinite(min_std)) {
    throw Error(ErrorKind::invalid_configuration, "min_std must be positive");
  }
  if (!(max_std >= min_std)) {
    throw Error(ErrorKind::invalid_configuration, "max_std must be at least min_std");
  }
}

void LabeledGMM::validate() const {
  const auto k_count = means.rows();
  if (k_count < 1) throw Error(ErrorKind::invalid_input, "model has no components");
  if (means.cols() < 1) throw Error(ErrorKind::invalid_input, "model has dimension 0");
  if (static_cast<Eigen::Index>(precisions.size()) != k_count || label_cond.rows() != k_count ||
      priors.size() != k_count) {
    throw Error(ErrorKind::invalid_input, "model component counts disagree");
  }
  if (label_cond.cols() < 1) throw Error(ErrorKind::invalid_input, "model has no labels");
  if (!means.allFinite() || !label_cond.allFinite() || !priors.allFinite()) {
    throw Error(ErrorKind::invalid_input, "model has non-finite parameters");
  }
  if ((label_cond.array() < 0.0).any() || (priors.array() < 0.0).any()) {
    throw Error(ErrorKind::invalid_input, "model has negative probabilities");
  }
  for (Eigen::Index k = 0; k < k_count; ++k) {
    if (std::abs(label_cond.row(k).sum() - 1.0) > 1e-9) {
      throw Error(ErrorKind::invalid_input,
                  "label distribution of component " + std::to_string(k) + " does not sum to 1");
    }
  }
  if (std::abs(priors.sum() - 1.0) > 1e-9) {
    throw Error(ErrorKind::invalid_input, "component priors do not sum to 1");
  }
  for (std::size_t k = 0; k < precisions.size(); ++k) {
    const Matrix& p = precisions[k];
    if (p.rows() != means.cols() || p.cols() != means.cols()) {
      throw Error(ErrorKind::invalid_input, "precision " + std::to_string(k) + " has wrong shape");
    }
    if (!p.allFinite()) throw Error(ErrorKind::invalid_input, "precision has non-finite entries");
    const double scale = matrix_scale(p);
    if ((p - p.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
      throw Error(ErrorKind::invalid_input, "precision " + std::to_string(k) + " is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(p, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-9 * scale) {
      throw Error(ErrorKind::invalid_input,
                  "precision " + std::to_string(k) + " has a negative eigenvalue");
    }
    if (shared_precision && p != precisions.front()) {
      throw Error(ErrorKind::invalid_input, "model is flagged shared_precision but precisions differ");
    }
  }
}

ConditionedPrecision condition_precision(const Matrix& precision, const PrecisionPolicy& policy) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (precision + precision.transpose()));
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorKind::numerical_failure, "eigendecomposition of a precision matrix failed");
  }
  ConditionedPrecision out;
  if (policy.mode == PrecisionPolicy::Mode::eigen_floor) {
    const double lo = 1.0 / (policy.max_std * policy.max_std);
    const double hi = 1.0 / (policy.min_std * policy.min_std);
    out.eigenvalues = eig.eigenvalues().cwiseMax(lo).cwiseMin(hi);
    out.precision = eig.eigenvectors() * out.eigenvalues.asDiagonal() * eig.eigenvectors().transpose();
    out.log_det = out.eigenvalues.array().log().sum();
  } else {
    out.eigenvalues = eig.eigenvalues();
    out.precision = precision;
    const double top = out.eigenvalues.maxCoeff();
    const double threshold = kPseudoDetRelThreshold * top;
    if (!(top > 0.0)) {
      throw Error(ErrorKind::degenerate_model, "precision matrix has no positive eigenvalue");
    }
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < out.eigenvalues.size(); ++i) {
      if (out.eigenvalues[i] > threshold) log_det += std::log(out.eigenvalues[i]);
    }
    out.log_det = log_det;
  }
  return out;
}

PreparedModel::PreparedModel(const LabeledGMM& model, const PrecisionPolicy& policy) : model_(&model) {
  policy.validate();
  model.validate();
  const int k_count = model.num_components();
  components_.reserve(static_cast<std::size_t>(k_count));
  for (const Matrix& p : model.precisions) components_.push_back(condition_precision(p, policy));
  shared_ = model.shared_precision;
  if (!shared_) {
    shared_ = std::all_of(components_.begin(), components_.end(), [&](const ConditionedPrecision& c) {
      return c.precision == components_.front().precision;
    });
  }
  log_priors_ = model.priors.array().log();
  log_label_cond_ = model.label_cond.array().log();
  log_two_pi_term_ = 0.5 * static_cast<double>(model.dim()) * kLogTwoPi;
}

double PreparedModel::log_density(int k, const Eigen::Ref<const Vector>& x) const {
  const ConditionedPrecision& c = components_[static_cast<std::size_t>(k)];
  const Vector diff = x - model_->means.row(k).transpose();
  const double quad = diff.dot(c.precision * diff);
  return 0.5 * c.log_det - log_two_pi_term_ - 0.5 * quad;
}

double PreparedModel::log_label_cond(int k, int label) const { return log_label_cond_(k, label - 1); }

double log_component_density(const LabeledGMM& model, int k, const Vector& x,
                             const PrecisionPolicy& policy) {
  policy.validate();
  if (k < 0 || k >= model.num_components()) {
    throw Error(ErrorKind::invalid_input, "component index " + std::to_string(k) + " out of range");
  }
  if (x.size() != model.dim()) throw Error(ErrorKind::invalid_input, "point dimension mismatch");
  if (!x.allFinite()) throw Error(ErrorKind::invalid_input, "point has non-finite entries");
  const ConditionedPrecision c = condition_precision(model.precisions[static_cast<std::size_t>(k)], policy);
  const Vector diff = x - model.means.row(k).transpose();
  return 0.5 * c.log_det - 0.5 * static_cast<double>(model.dim()) * kLogTwoPi -
         0.5 * diff.dot(c.precision * diff);
}

double log_joint_density(const PreparedModel& model, const Eigen::Ref<const Vector>& x, int y) {
  check_label(model, y);
  check_point(model, x);
  const int k_count = model.num_components();
  std::vector<double> terms(static_cast<std::size_t>(k_count));
  for (int k = 0; k < k_count; ++k) {
    const double label_term = model.log_label_cond(k, y) + model.log_prior(k);
    terms[static_cast<std::size_t>(k)] = label_term == kNegInf ? kNegInf : model.log_density(k, x) + label_term;
  }
  return log_sum_exp(terms.data(), terms.size());
}

double joint_density(const LabeledGMM& model, const Vector& x, int y, const PrecisionPolicy& policy) {
  const PreparedModel prepared(model, policy);
  return std::exp(log_joint_density(prepared, x, y));
}

Vector posterior_labels(const PreparedModel& model, const Eigen::Ref<const Vector>& x) {
  check_point(model, x);
  const int k_count = model.num_components();
  const int l_count = model.num_labels();
  std::vector<double> log_dens(static_cast<std::size_t>(k_count));
  bool any_finite = false;
  for (int k = 0; k < k_count; ++k) {
    log_dens[static_cast<std::size_t>(k)] = model.log_density(k, x) + model.log_prior(k);
    any_finite = any_finite || std::isfinite(log_dens[static_cast<std::size_t>(k)]);
  }
  if (!any_finite) {
    throw Error(ErrorKind::degenerate_evaluation, "every component has zero density at the point");
  }
  std::vector<double> log_joint(static_cast<std::size_t>(l_count));
  std::vector<double> terms(static_cast<std::size_t>(k_count));
  for (int y = 1; y <= l_count; ++y) {
    for (int k = 0; k < k_count; ++k) {
      const double lc = model.log_label_cond(k, y);
      terms[static_cast<std::size_t>(k)] = lc == kNegInf ? kNegInf : log_dens[static_cast<std::size_t>(k)] + lc;
    }
    log_joint[static_cast<std::size_t>(y - 1)] = log_sum_exp(terms.data(), terms.size());
  }
  const double norm = log_sum_exp(log_joint.data(), log_joint.size());
  if (!std::isfinite(norm)) {
    throw Error(ErrorKind::degenerate_evaluation, "marginal density is not finite at the point");
  }
  Vector out(l_count);
  for (int y = 0; y < l_count; ++y) out[y] = std::exp(log_joint[static_cast<std::size_t>(y)] - norm);
  return out;
}

Vector posterior_labels(const LabeledGMM& model, const Vector& x, const PrecisionPolicy& policy) {
  const PreparedModel prepared(model, policy);
  return posterior_labels(prepared, x);
}

int classify(const PreparedModel& model, const Eigen::Ref<const Vector>& x) {
  const Vector post = posterior_labels(model, x);
  Eigen::Index best = 0;
  for (Eigen::Index y = 1; y < post.size(); ++y) {
    if (post[y] > post[best]) best = y;
  }
  return static_cast<int>(best) + 1;
}

int classify(const LabeledGMM& model, const Vector& x, const PrecisionPolicy& policy) {
  const PreparedModel prepared(model, policy);
  return classify(prepared, x);
}

double log_likelihood(const PreparedModel& model, const Dataset& data) {
  data.validate(model.num_labels());
  if (data.dim() != model.dim()) throw Error(ErrorKind::invalid_input, "dataset dimension mismatch");
  double total = 0.0;
  for (std::size_t j = 0; j < data.size(); ++j) {
    const double lj = log_joint_density(model, data.points.row(static_cast<Eigen::Index>(j)).transpose(),
                                        data.labels[j]);
    if (lj == kNegInf) return kNegInf;
    total += lj;
  }
  return total;
}

double log_likelihood(const LabeledGMM& model, const Dataset& data, const PrecisionPolicy& policy) {
  const PreparedModel prepared(model, policy);
  return log_likelihood(prepared, data);
}

// ---------------------------------------------------------------------------
// EM fitting with crisp component labels

namespace {

struct FitRun {
  LabeledGMM model;
  std::vector<double> trace;
  int iterations = 0;
  bool converged = false;
};

// Covariance -> precision with the std bounds of the policy.
Matrix bounded_precision(const Matrix& covariance, const PrecisionPolicy& policy) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (covariance + covariance.transpose()));
  const double lo = policy.min_std * policy.min_std;
  const double hi = policy.max_std * policy.max_std;
  const Vector var = eig.eigenvalues().cwiseMax(lo).cwiseMin(hi);
  return eig.eigenvectors() * var.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
}

FitRun fit_once(const Dataset& data, const std::vector<int>& labels, const LgmmFitConfig& config,
                std::mt19937_64& rng) {
  const int per_label = config.components_per_label;
  const int k_count = per_label * static_cast<int>(labels.size());
  const int l_count = data.max_label();
  const Eigen::Index m = data.dim();
  const auto n = static_cast<Eigen::Index>(data.size());

  std::vector<int> owner(static_cast<std::size_t>(k_count));
  std::vector<std::vector<std::size_t>> by_label(labels.size());
  for (std::size_t j = 0; j < data.size(); ++j) {
    const auto pos = std::lower_bound(labels.begin(), labels.end(), data.labels[j]) - labels.begin();
    by_label[static_cast<std::size_t>(pos)].push_back(j);
  }

  FitRun run;
  LabeledGMM& model = run.model;
  model.means.resize(k_count, m);
  model.precisions.assign(static_cast<std::size_t>(k_count), Matrix::Identity(m, m));
  model.shared_precision = config.shared_precision;
  model.label_cond = Matrix::Zero(k_count, l_count);
  model.priors.resize(k_count);

  Matrix pooled = Matrix::Zero(m, m);
  for (std::size_t li = 0; li < labels.size(); ++li) {
    const auto& idx = by_label[li];
    std::vector<std::size_t> pick(idx);
    std::shuffle(pick.begin(), pick.end(), rng);
    Vector mean = Vector::Zero(m);
    for (std::size_t j : idx) mean += data.points.row(static_cast<Eigen::Index>(j)).transpose();
    mean /= static_cast<double>(idx.size());
    Matrix cov = Matrix::Zero(m, m);
    for (std::size_t j : idx) {
      const Vector d = data.points.row(static_cast<Eigen::Index>(j)).transpose() - mean;
      cov += d * d.transpose();
    }
    pooled += cov;
    cov /= static_cast<double>(idx.size());
    for (int c = 0; c < per_label; ++c) {
      const int k = static_cast<int>(li) * per_label + c;
      owner[static_cast<std::size_t>(k)] = labels[li];
      model.means.row(k) = data.points.row(static_cast<Eigen::Index>(pick[static_cast<std::size_t>(c)]));
      model.precisions[static_cast<std::size_t>(k)] = bounded_precision(cov, config.policy);
      model.label_cond(k, labels[li] - 1) = 1.0;
      model.priors[k] = static_cast<double>(idx.size()) / static_cast<double>(n * per_label);
    }
  }
  if (config.shared_precision) {
    const Matrix shared = bounded_precision(pooled / static_cast<double>(n), config.policy);
    for (auto& p : model.precisions) p = shared;
  }

  Matrix resp = Matrix::Zero(k_count, n);
  double previous = kNegInf;
  std::vector<double> terms(static_cast<std::size_t>(per_label));
  for (int it = 0; it < config.max_iterations; ++it) {
    // E-step; points only see the components of their own label.
    const PreparedModel prepared(model, config.policy);
    double ll = 0.0;
    resp.setZero();
    for (std::size_t li = 0; li < labels.size(); ++li) {
      for (std::size_t j : by_label[li]) {
        const auto col = static_cast<Eigen::Index>(j);
        const Vector x = data.points.row(col).transpose();
        for (int c = 0; c < per_label; ++c) {
          const int k = static_cast<int>(li) * per_label + c;
          terms[static_cast<std::size_t>(c)] = prepared.log_density(k, x) + prepared.log_prior(k);
        }
        const double lse = log_sum_exp(terms.data(), terms.size());
        if (!std::isfinite(lse)) {
          throw Error(ErrorKind::numerical_failure, "point " + std::to_string(j) + " has zero likelihood");
        }
        ll += lse;
        for (int c = 0; c < per_label; ++c) {
          resp(static_cast<int>(li) * per_label + c, col) = std::exp(terms[static_cast<std::size_t>(c)] - lse);
        }
      }
    }
    run.trace.push_back(ll);
    run.iterations = it + 1;
    if (it > 0 && std::abs(ll - previous) < config.tolerance) {
      run.converged = true;
      break;
    }
    previous = ll;

    // M-step
    Matrix scatter_sum = Matrix::Zero(m, m);
    for (int k = 0; k < k_count; ++k) {
      const double weight = resp.row(k).sum();
      if (weight <= 1e-10) {
        // Starved component: keep its parameters, drop its mass.
        model.priors[k] = 0.0;
        continue;
      }
      const Vector mean = (data.points.transpose() * resp.row(k).transpose()) / weight;
      Matrix scatter = Matrix::Zero(m, m);
      for (Eigen::Index j = 0; j < n; ++j) {
        const double g = resp(k, j);
        if (g == 0.0) continue;
        const Vector d = data.points.row(j).transpose() - mean;
        scatter.noalias() += g * (d * d.transpose());
      }
      model.means.row(k) = mean.transpose();
      model.priors[k] = weight / static_cast<double>(n);
      scatter_sum += scatter;
      if (!config.shared_precision) {
        model.precisions[static_cast<std::size_t>(k)] = bounded_precision(scatter / weight, config.policy);
      }
    }
    model.priors /= model.priors.sum();
    if (config.shared_precision) {
      const Matrix shared = bounded_precision(scatter_sum / static_cast<double>(n), config.policy);
      for (auto& p : model.precisions) p = shared;
    }
  }
  return run;
}

}  // namespace

LgmmFitResult fit_lgmm(const Dataset& data, const LgmmFitConfig& config) {
  data.validate();
  config.policy.validate();
  if (config.components_per_label < 1) {
    throw Error(ErrorKind::invalid_configuration, "components_per_label must be at least 1");
  }
  if (config.restarts < 1) throw Error(ErrorKind::invalid_configuration, "restarts must be at least 1");
  if (config.max_iterations < 1) throw Error(ErrorKind::invalid_configuration, "max_iterations must be at least 1");
  const std::vector<int> labels = data.present_labels();
  for (int y : labels) {
    const auto count = std::count(data.labels.begin(), data.labels.end(), y);
    if (count < config.components_per_label) {
      throw Error(ErrorKind::invalid_configuration,
                  "label " + std::to_string(y) + " has " + std::to_string(count) + " points but " +
                      std::to_string(config.components_per_label) + " components were requested");
    }
  }

  const SeedStream root(config.seed);
  LgmmFitResult best;
  double best_ll = kNegInf;
  bool have_best = false;
  for (int r = 0; r < config.restarts; ++r) {
    auto rng = root.child(static_cast<std::uint64_t>(r)).engine();
    FitRun run = fit_once(data, labels, config, rng);
    const double ll = run.trace.back();
    if (!have_best || ll > best_ll) {
      best_ll = ll;
      have_best = true;
      best.model = std::move(run.model);
      best.loglik_trace = std::move(run.trace);
      best.iterations = run.iterations;
      best.converged = run.converged;
    }
  }
  return best;
}

}  // namespace emtl
