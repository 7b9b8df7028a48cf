#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace emtl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Labeled point set. Row j of `points` is one sample; labels are 1-based.
struct Dataset {
  Matrix points;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  Eigen::Index dim() const { return points.cols(); }

  /// Largest label present (0 for an empty set).
  int max_label() const;

  /// Sorted distinct labels.
  std::vector<int> present_labels() const;

  /// Throws invalid_input unless N >= 1, rows match labels, all entries are
  /// finite and every label lies in [1, max_label] (max_label <= 0 skips the
  /// upper bound).
  void validate(int max_label = 0) const;

  /// Rows selected by index, in the given order.
  Dataset subset(const std::vector<std::size_t>& indices) const;
};

bool operator==(const Dataset& a, const Dataset& b);

}  // namespace emtl
