#include "emtl/lvq.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "emtl/error.hpp"
#include "emtl/rng.hpp"

namespace emtl {

namespace {

void normalize_omega(Matrix& omega) {
  const double norm = omega.norm();
  if (norm > 0.0) omega *= std::sqrt(static_cast<double>(omega.cols())) / norm;
}

void check_data_against_model(const LvqModel& model, const Dataset& data) {
  data.validate();
  if (data.dim() != model.dim()) {
    throw Error(ErrorKind::invalid_input, "dataset dimension " + std::to_string(data.dim()) +
                                              " does not match model dimension " +
                                              std::to_string(model.dim()));
  }
}

LvqModel train(const Dataset& data, const LvqTrainingConfig& config, MetricKind metric) {
  data.validate();
  config.validate();
  const std::vector<int> classes = data.present_labels();
  if (classes.size() < 2) {
    throw Error(ErrorKind::invalid_configuration,
                "LVQ training needs at least two classes (no differently labeled prototype exists)");
  }
  const Eigen::Index m = data.dim();
  const int per_class = config.prototypes_per_class;
  const int k_count = per_class * static_cast<int>(classes.size());

  auto rng = SeedStream(config.seed).engine();
  std::normal_distribution<double> normal(0.0, 1.0);

  LvqModel model;
  model.metric = metric;
  model.prototypes.resize(k_count, m);
  model.labels.resize(static_cast<std::size_t>(k_count));
  for (std::size_t c = 0; c < classes.size(); ++c) {
    Vector sum = Vector::Zero(m);
    Vector sq = Vector::Zero(m);
    int count = 0;
    for (std::size_t j = 0; j < data.size(); ++j) {
      if (data.labels[j] != classes[c]) continue;
      const auto row = data.points.row(static_cast<Eigen::Index>(j)).transpose();
      sum += row;
      sq += row.cwiseProduct(row);
      ++count;
    }
    const Vector mean = sum / count;
    const Vector stddev = (sq / count - mean.cwiseProduct(mean)).cwiseMax(0.0).cwiseSqrt();
    for (int p = 0; p < per_class; ++p) {
      const int k = static_cast<int>(c) * per_class + p;
      model.labels[static_cast<std::size_t>(k)] = classes[c];
      for (Eigen::Index d = 0; d < m; ++d) {
        model.prototypes(k, d) = mean[d] + 0.01 * stddev[d] * normal(rng);
      }
    }
  }
  const std::size_t omega_count = metric == MetricKind::shared ? 1 : static_cast<std::size_t>(k_count);
  model.omegas.assign(omega_count, Matrix::Identity(m, m));

  const double eta_w = config.learning_rate_prototypes;
  const double eta_o = config.learning_rate_omega;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Vector diff_p(m), diff_m(m), u_p(m), u_m(m);
  Matrix step_p(m, m), step_m(m, m);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t j : order) {
      const auto x = data.points.row(static_cast<Eigen::Index>(j)).transpose();
      const Winners w = find_winners(model, x, data.labels[j]);
      const double s = w.d_plus + w.d_minus;
      if (!(s > 0.0)) continue;
      const double mu = (w.d_plus - w.d_minus) / s;
      const double f = config.phi.derivative(mu);
      const double g_plus = 2.0 * w.d_minus / (s * s);
      const double g_minus = 2.0 * w.d_plus / (s * s);

      Matrix& omega_p = model.omegas[metric == MetricKind::shared ? 0 : static_cast<std::size_t>(w.plus)];
      Matrix& omega_m = model.omegas[metric == MetricKind::shared ? 0 : static_cast<std::size_t>(w.minus)];
      diff_p = x - model.prototypes.row(w.plus).transpose();
      diff_m = x - model.prototypes.row(w.minus).transpose();
      u_p.noalias() = omega_p * diff_p;
      u_m.noalias() = omega_m * diff_m;

      // d/dOmega of d_k is 2 Omega (x - w)(x - w)^T = 2 u (x - w)^T.
      step_p.noalias() = (2.0 * f * g_plus) * u_p * diff_p.transpose();
      step_m.noalias() = (2.0 * f * g_minus) * u_m * diff_m.transpose();

      model.prototypes.row(w.plus) += (eta_w * f * g_plus * 2.0) * (omega_p.transpose() * u_p).transpose();
      model.prototypes.row(w.minus) -= (eta_w * f * g_minus * 2.0) * (omega_m.transpose() * u_m).transpose();

      if (metric == MetricKind::shared) {
        omega_p -= eta_o * (step_p - step_m);
        normalize_omega(omega_p);
      } else {
        omega_p -= eta_o * step_p;
        omega_m += eta_o * step_m;
        normalize_omega(omega_p);
        normalize_omega(omega_m);
      }
    }
  }
  if (!model.prototypes.allFinite()) {
    throw Error(ErrorKind::numerical_failure, "LVQ training diverged");
  }
  return model;
}

}  // namespace

int LvqModel::num_labels() const {
  return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
}

void LvqModel::validate() const {
  if (prototypes.rows() < 1 || prototypes.cols() < 1) {
    throw Error(ErrorKind::invalid_input, "LVQ model has no prototypes");
  }
  if (static_cast<Eigen::Index>(labels.size()) != prototypes.rows()) {
    throw Error(ErrorKind::invalid_input, "LVQ model has mismatched prototype labels");
  }
  for (int y : labels) {
    if (y < 1) throw Error(ErrorKind::invalid_input, "LVQ prototype labels must be >= 1");
  }
  const std::size_t expected = metric == MetricKind::shared ? 1 : labels.size();
  if (omegas.size() != expected) {
    throw Error(ErrorKind::invalid_input, "LVQ model has " + std::to_string(omegas.size()) +
                                              " metric matrices, expected " + std::to_string(expected));
  }
  for (const Matrix& omega : omegas) {
    if (omega.cols() != prototypes.cols() || omega.rows() < 1) {
      throw Error(ErrorKind::invalid_input, "LVQ metric matrix has wrong shape");
    }
    if (!omega.allFinite()) throw Error(ErrorKind::invalid_input, "LVQ metric matrix is not finite");
  }
  if (!prototypes.allFinite()) throw Error(ErrorKind::invalid_input, "LVQ prototypes are not finite");
}

double Sigmoid::operator()(double z) const { return 1.0 / (1.0 + std::exp(-beta * z)); }

double Sigmoid::derivative(double z) const {
  const double s = (*this)(z);
  return beta * s * (1.0 - s);
}

void LvqTrainingConfig::validate() const {
  if (prototypes_per_class < 1) {
    throw Error(ErrorKind::invalid_configuration, "prototypes_per_class must be at least 1");
  }
  if (epochs < 1) throw Error(ErrorKind::invalid_configuration, "epochs must be at least 1");
  if (!(learning_rate_prototypes > 0.0) || !(learning_rate_omega > 0.0)) {
    throw Error(ErrorKind::invalid_configuration, "learning rates must be positive");
  }
  if (!(phi.beta > 0.0)) throw Error(ErrorKind::invalid_configuration, "sigmoid slope must be positive");
}

double lvq_distance(const LvqModel& model, int k, const Eigen::Ref<const Vector>& x) {
  const Vector u = model.omega(k) * (model.prototypes.row(k).transpose() - x);
  return u.squaredNorm();
}

Winners find_winners(const LvqModel& model, const Eigen::Ref<const Vector>& x, int label) {
  Winners w;
  for (int k = 0; k < model.num_prototypes(); ++k) {
    const double d = lvq_distance(model, k, x);
    if (model.labels[static_cast<std::size_t>(k)] == label) {
      if (w.plus < 0 || d < w.d_plus) {
        w.plus = k;
        w.d_plus = d;
      }
    } else if (w.minus < 0 || d < w.d_minus) {
      w.minus = k;
      w.d_minus = d;
    }
  }
  if (w.plus < 0) {
    throw Error(ErrorKind::invalid_configuration, "no prototype carries label " + std::to_string(label));
  }
  if (w.minus < 0) {
    throw Error(ErrorKind::invalid_configuration,
                "no prototype with a label other than " + std::to_string(label));
  }
  return w;
}

double relative_distance_difference(double d_plus, double d_minus) {
  const double s = d_plus + d_minus;
  return s > 0.0 ? (d_plus - d_minus) / s : 0.0;
}

double glvq_cost(const LvqModel& model, const Dataset& data, const Sigmoid& phi) {
  model.validate();
  check_data_against_model(model, data);
  double cost = 0.0;
  for (std::size_t j = 0; j < data.size(); ++j) {
    const Winners w = find_winners(model, data.points.row(static_cast<Eigen::Index>(j)).transpose(),
                                   data.labels[j]);
    cost += phi(relative_distance_difference(w.d_plus, w.d_minus));
  }
  return cost;
}

LvqModel train_gmlvq(const Dataset& data, const LvqTrainingConfig& config) {
  return train(data, config, MetricKind::shared);
}

LvqModel train_lgmlvq(const Dataset& data, const LvqTrainingConfig& config) {
  return train(data, config, MetricKind::local);
}

int lvq_classify(const LvqModel& model, const Eigen::Ref<const Vector>& x) {
  if (x.size() != model.dim()) throw Error(ErrorKind::invalid_input, "point dimension mismatch");
  int best = 0;
  double best_d = lvq_distance(model, 0, x);
  for (int k = 1; k < model.num_prototypes(); ++k) {
    const double d = lvq_distance(model, k, x);
    if (d < best_d) {
      best = k;
      best_d = d;
    }
  }
  return model.labels[static_cast<std::size_t>(best)];
}

double lvq_error(const LvqModel& model, const Dataset& data) {
  check_data_against_model(model, data);
  std::size_t wrong = 0;
  for (std::size_t j = 0; j < data.size(); ++j) {
    if (lvq_classify(model, data.points.row(static_cast<Eigen::Index>(j)).transpose()) != data.labels[j]) {
      ++wrong;
    }
  }
  return static_cast<double>(wrong) / static_cast<double>(data.size());
}

double lvq_error(const LvqModel& model, const Dataset& data, const Matrix& transfer) {
  data.validate();
  if (transfer.cols() != data.dim() || transfer.rows() != model.dim()) {
    throw Error(ErrorKind::invalid_input, "transfer matrix shape does not match data and model");
  }
  Dataset mapped{data.points * transfer.transpose(), data.labels};
  return lvq_error(model, mapped);
}

double median_prototype_distance(const LvqModel& model) {
  std::vector<double> dists;
  for (int k = 0; k < model.num_prototypes(); ++k) {
    for (int l = 0; l < model.num_prototypes(); ++l) {
      if (k != l) dists.push_back(std::sqrt(lvq_distance(model, k, model.prototypes.row(l).transpose())));
    }
  }
  if (dists.empty()) return 0.0;
  std::sort(dists.begin(), dists.end());
  const std::size_t n = dists.size();
  return n % 2 == 1 ? dists[n / 2] : 0.5 * (dists[n / 2 - 1] + dists[n / 2]);
}

double default_conversion_sigma(const LvqModel& model) {
  const double median = median_prototype_distance(model);
  return median > 0.0 ? 0.05 * median : 1.0;
}

LabeledGMM to_lgmm(const LvqModel& model, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw Error(ErrorKind::invalid_input, "conversion sigma must be positive and finite");
  }
  model.validate();
  const int k_count = model.num_prototypes();
  LabeledGMM out;
  out.means = model.prototypes;
  out.shared_precision = model.metric == MetricKind::shared;
  out.precisions.reserve(static_cast<std::size_t>(k_count));
  const double scale = 1.0 / (sigma * sigma);
  Matrix shared_precision;
  auto metric_tensor = [scale](const Matrix& omega) {
    const Matrix lambda = omega.transpose() * omega;
    return Matrix(scale * 0.5 * (lambda + lambda.transpose()));
  };
  if (out.shared_precision) shared_precision = metric_tensor(model.omegas.front());
  for (int k = 0; k < k_count; ++k) {
    if (out.shared_precision) {
      out.precisions.push_back(shared_precision);
    } else {
      out.precisions.push_back(metric_tensor(model.omega(k)));
    }
  }
  out.label_cond = Matrix::Zero(k_count, model.num_labels());
  for (int k = 0; k < k_count; ++k) out.label_cond(k, model.labels[static_cast<std::size_t>(k)] - 1) = 1.0;
  out.priors = Vector::Constant(k_count, 1.0 / k_count);
  return out;
}

}  // namespace emtl
