#pragma once

#include <random>

#include "emtl/dataset.hpp"
#include "emtl/lgmm.hpp"

namespace emtl::test {

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (const double x : v) out[i++] = x;
  return out;
}

inline Matrix mat(Eigen::Index rows, Eigen::Index cols, std::initializer_list<double> v) {
  Matrix out(rows, cols);
  auto it = v.begin();
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = *it++;
  }
  return out;
}

// Three crisp components at (-1,0), (0,0), (1,0) with precision I/0.09.
inline LabeledGMM toy_model() {
  LabeledGMM m;
  m.means = mat(3, 2, {-1, 0, 0, 0, 1, 0});
  m.precisions.assign(3, Matrix::Identity(2, 2) / 0.09);
  m.shared_precision = true;
  m.label_cond = Matrix::Identity(3, 3);
  m.priors = Vector::Constant(3, 1.0 / 3.0);
  return m;
}

// Components 1 and 3 share label 1.
inline LabeledGMM ambiguous_model() {
  LabeledGMM m = toy_model();
  m.label_cond = mat(3, 2, {1, 0, 0, 1, 1, 0});
  return m;
}

// K=3, m=2, L=2 with soft label distributions and distinct precisions.
inline LabeledGMM mixed_model() {
  LabeledGMM m;
  m.means = mat(3, 2, {0, 0, 2, 1, -1, 3});
  m.precisions = {mat(2, 2, {2, 0.5, 0.5, 1}), mat(2, 2, {1, 0, 0, 3}), mat(2, 2, {1.5, -0.2, -0.2, 0.8})};
  m.label_cond = mat(3, 2, {1, 0, 0.3, 0.7, 0, 1});
  m.priors = vec({0.5, 0.3, 0.2});
  return m;
}

inline LabeledGMM mixed_model_shared() {
  LabeledGMM m = mixed_model();
  m.precisions.assign(3, m.precisions.front());
  m.shared_precision = true;
  return m;
}

// Four points in three dimensions for mixed_model.
inline Dataset mixed_target() {
  Dataset d;
  d.points = mat(4, 3, {1, 0, 2, 0, 1, -1, 2, 2, 0, -1, 0.5, 1});
  d.labels = {1, 2, 2, 1};
  return d;
}

inline Matrix mixed_H() { return mat(2, 3, {0.5, 0.1, -0.2, 0.3, -0.4, 0.6}); }

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

inline Matrix random_spd(Eigen::Index n, std::mt19937_64& rng, double ridge = 0.5) {
  const Matrix a = random_matrix(n, n, rng);
  return a * a.transpose() + ridge * Matrix::Identity(n, n);
}

}  // namespace emtl::test
