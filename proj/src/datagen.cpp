#include "emtl/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "emtl/error.hpp"
#include "emtl/rng.hpp"

namespace emtl {

namespace {

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

Matrix mat2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

GeneratorSpec make_spec(std::vector<Vector> means, std::vector<Matrix> covs, std::vector<int> labels,
                        int n, std::uint64_t seed) {
  GeneratorSpec spec;
  spec.means = std::move(means);
  spec.covariances = std::move(covs);
  spec.labels = std::move(labels);
  spec.points_per_component = n;
  spec.seed = seed;
  return spec;
}

}  // namespace

void GeneratorSpec::validate() const {
  if (means.empty()) throw Error(ErrorKind::invalid_input, "generator has no components");
  if (covariances.size() != means.size() || labels.size() != means.size()) {
    throw Error(ErrorKind::invalid_input, "generator component lists differ in length");
  }
  if (points_per_component < 1) throw Error(ErrorKind::invalid_input, "points per class must be at least 1");
  const auto dim = means.front().size();
  for (std::size_t c = 0; c < means.size(); ++c) {
    const Matrix& cov = covariances[c];
    if (means[c].size() != dim || cov.rows() != dim || cov.cols() != dim) {
      throw Error(ErrorKind::invalid_input, "generator component " + std::to_string(c) + " has wrong shape");
    }
    if (labels[c] < 1) throw Error(ErrorKind::invalid_input, "generator labels must be >= 1");
    if (!means[c].allFinite() || !cov.allFinite()) {
      throw Error(ErrorKind::invalid_input, "generator parameters must be finite");
    }
    const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      throw Error(ErrorKind::invalid_input, "covariance " + std::to_string(c) + " is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov, Eigen::EigenvaluesOnly);
    if (!(eig.eigenvalues().minCoeff() > 0.0)) {
      throw Error(ErrorKind::invalid_input, "covariance " + std::to_string(c) + " is not positive definite");
    }
  }
}

Dataset sample(const GeneratorSpec& spec) {
  spec.validate();
  const auto dim = spec.means.front().size();
  const auto per = static_cast<Eigen::Index>(spec.points_per_component);
  Dataset out;
  out.points.resize(per * static_cast<Eigen::Index>(spec.means.size()), dim);
  out.labels.reserve(static_cast<std::size_t>(out.points.rows()));
  const SeedStream root(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(dim);
  Eigen::Index row = 0;
  for (std::size_t c = 0; c < spec.means.size(); ++c) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(spec.covariances[c]);
    const Matrix root_cov =
        eig.eigenvectors() * eig.eigenvalues().cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
    auto rng = root.child(c).engine();
    for (Eigen::Index i = 0; i < per; ++i) {
      for (Eigen::Index d = 0; d < dim; ++d) z[d] = normal(rng);
      out.points.row(row++) = (spec.means[c] + root_cov * z).transpose();
      out.labels.push_back(spec.labels[c]);
    }
  }
  return out;
}

GeneratorSpec toy_source_spec(int n_per_class, std::uint64_t seed) {
  const Matrix cov = 0.09 * Matrix::Identity(2, 2);
  return make_spec({vec2(-1, 0), vec2(0, 0), vec2(1, 0)}, {cov, cov, cov}, {1, 2, 3}, n_per_class, seed);
}

GeneratorSpec toy_target_spec(int n_per_class, std::uint64_t seed) {
  const Matrix cov = 0.09 * Matrix::Identity(2, 2);
  return make_spec({vec2(-0.1, -2), vec2(0, 0), vec2(0.1, 2)}, {cov, cov, cov}, {1, 2, 3}, n_per_class, seed);
}

GeneratorSpec toy_ambiguous_spec(int n_per_class, std::uint64_t seed) {
  GeneratorSpec spec = toy_source_spec(n_per_class, seed);
  spec.labels = {1, 2, 1};
  return spec;
}

GeneratorSpec cigars_source_spec(int n_per_class, std::uint64_t seed) {
  const Matrix outer = mat2(0.485, 0.36, 0.36, 0.485);
  const Matrix middle = mat2(0.485, -0.36, -0.36, 0.485);
  return make_spec({vec2(-0.5, 0), vec2(0.5, 0), vec2(1.5, 0)}, {outer, middle, outer}, {1, 2, 3},
                   n_per_class, seed);
}

GeneratorSpec cigars_target_spec(int n_per_class, std::uint64_t seed) {
  GeneratorSpec spec = cigars_source_spec(n_per_class, seed);
  const Matrix r = rotation_2d(90.0);
  for (auto& mu : spec.means) mu = r * mu;
  for (auto& cov : spec.covariances) {
    const Matrix rotated = r * cov * r.transpose();
    cov = 0.5 * (rotated + rotated.transpose());
  }
  return spec;
}

Dataset toy_source(int n_per_class, std::uint64_t seed) { return sample(toy_source_spec(n_per_class, seed)); }
Dataset toy_target(int n_per_class, std::uint64_t seed) { return sample(toy_target_spec(n_per_class, seed)); }
Dataset toy_ambiguous(int n_per_class, std::uint64_t seed) {
  return sample(toy_ambiguous_spec(n_per_class, seed));
}
Dataset cigars_source(int n_per_class, std::uint64_t seed) {
  return sample(cigars_source_spec(n_per_class, seed));
}
Dataset cigars_target(int n_per_class, std::uint64_t seed) {
  return sample(cigars_target_spec(n_per_class, seed));
}

Matrix rotation_2d(double degrees) {
  // Exact entries for multiples of 90 degrees keep rotated specs exact.
  const double turns = degrees / 90.0;
  if (turns == std::round(turns)) {
    static constexpr double kCos[4] = {1, 0, -1, 0};
    static constexpr double kSin[4] = {0, 1, 0, -1};
    const auto q = static_cast<int>(((static_cast<long long>(turns) % 4) + 4) % 4);
    return mat2(kCos[q], -kSin[q], kSin[q], kCos[q]);
  }
  const double rad = degrees * std::numbers::pi / 180.0;
  return mat2(std::cos(rad), -std::sin(rad), std::sin(rad), std::cos(rad));
}

Dataset exclude_classes(const Dataset& data, const std::vector<int>& labels_to_drop) {
  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < data.size(); ++j) {
    if (std::find(labels_to_drop.begin(), labels_to_drop.end(), data.labels[j]) == labels_to_drop.end()) {
      keep.push_back(j);
    }
  }
  if (keep.empty()) throw Error(ErrorKind::invalid_result, "excluding the requested classes leaves no data");
  return data.subset(keep);
}

Dataset subsample_balanced(const Dataset& data, std::size_t n, std::uint64_t seed) {
  data.validate();
  if (n < 1) throw Error(ErrorKind::invalid_input, "subsample size must be at least 1");
  if (n > data.size()) {
    throw Error(ErrorKind::invalid_input, "requested " + std::to_string(n) + " points but only " +
                                              std::to_string(data.size()) + " are available");
  }
  const std::vector<int> classes = data.present_labels();
  const std::size_t l_count = classes.size();
  std::vector<std::vector<std::size_t>> members(l_count);
  for (std::size_t j = 0; j < data.size(); ++j) {
    const auto pos = std::lower_bound(classes.begin(), classes.end(), data.labels[j]) - classes.begin();
    members[static_cast<std::size_t>(pos)].push_back(j);
  }

  auto rng = SeedStream(seed).engine();
  std::vector<std::size_t> quota(l_count, n / l_count);
  std::vector<std::size_t> class_order(l_count);
  std::iota(class_order.begin(), class_order.end(), std::size_t{0});
  std::shuffle(class_order.begin(), class_order.end(), rng);
  for (std::size_t i = 0; i < n % l_count; ++i) ++quota[class_order[i]];

  std::vector<std::size_t> chosen;
  chosen.reserve(n);
  for (std::size_t c = 0; c < l_count; ++c) {
    if (quota[c] > members[c].size()) {
      throw Error(ErrorKind::invalid_input, "class " + std::to_string(classes[c]) + " has " +
                                                std::to_string(members[c].size()) + " points, " +
                                                std::to_string(quota[c]) + " requested");
    }
    std::shuffle(members[c].begin(), members[c].end(), rng);
    chosen.insert(chosen.end(), members[c].begin(), members[c].begin() + static_cast<std::ptrdiff_t>(quota[c]));
  }
  std::shuffle(chosen.begin(), chosen.end(), rng);
  return data.subset(chosen);
}

}  // namespace emtl
