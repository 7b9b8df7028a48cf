#include "emtl/dataset.hpp"

#include <algorithm>
#include <string>

#include "emtl/error.hpp"

namespace emtl {

int Dataset::max_label() const {
  return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
}

std::vector<int> Dataset::present_labels() const {
  std::vector<int> out(labels);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void Dataset::validate(int max_label) const {
  if (labels.empty()) throw Error(ErrorKind::invalid_input, "dataset is empty");
  if (static_cast<std::size_t>(points.rows()) != labels.size()) {
    throw Error(ErrorKind::invalid_input, "dataset has " + std::to_string(points.rows()) +
                                              " rows but " + std::to_string(labels.size()) +
                                              " labels");
  }
  if (points.cols() < 1) throw Error(ErrorKind::invalid_input, "dataset has no features");
  if (!points.allFinite()) throw Error(ErrorKind::invalid_input, "dataset contains non-finite values");
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (labels[j] < 1 || (max_label > 0 && labels[j] > max_label)) {
      throw Error(ErrorKind::invalid_input,
                  "label " + std::to_string(labels[j]) + " of point " + std::to_string(j) +
                      " is out of range");
    }
  }
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.points.resize(static_cast<Eigen::Index>(indices.size()), points.cols());
  out.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.points.row(static_cast<Eigen::Index>(i)) = points.row(static_cast<Eigen::Index>(indices[i]));
    out.labels.push_back(labels[indices[i]]);
  }
  return out;
}

bool operator==(const Dataset& a, const Dataset& b) {
  return a.labels == b.labels && a.points.rows() == b.points.rows() &&
         a.points.cols() == b.points.cols() && a.points == b.points;
}

}  // namespace emtl
