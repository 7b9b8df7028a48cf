#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "emtl/datagen.hpp"
#include "emtl/error.hpp"
#include "helpers.hpp"

using namespace emtl;
using namespace emtl::test;

namespace {

std::map<int, int> label_counts(const Dataset& d) {
  std::map<int, int> counts;
  for (const int y : d.labels) ++counts[y];
  return counts;
}

// Rows of `d` generated by component c of a spec with n points per component.
Matrix component_rows(const Dataset& d, const GeneratorSpec& spec, std::size_t c) {
  Matrix rows(spec.points_per_component, d.dim());
  int r = 0;
  for (std::size_t j = 0; j < d.size(); ++j) {
    if (d.labels[j] == spec.labels[c]) rows.row(r++) = d.points.row(static_cast<Eigen::Index>(j));
  }
  REQUIRE(r == spec.points_per_component);
  return rows;
}

}  // namespace

TEST_CASE("toy generator parameters") {
  const GeneratorSpec source = toy_source_spec();
  REQUIRE(source.means.size() == 3);
  CHECK(source.means[0] == vec({-1, 0}));
  CHECK(source.means[1] == vec({0, 0}));
  CHECK(source.means[2] == vec({1, 0}));
  for (const auto& c : source.covariances) CHECK(c.isApprox(0.09 * Matrix::Identity(2, 2)));
  CHECK(source.points_per_component == 100);

  const GeneratorSpec target = toy_target_spec();
  CHECK(target.means[0] == vec({-0.1, -2}));
  CHECK(target.means[1] == vec({0, 0}));
  CHECK(target.means[2] == vec({0.1, 2}));
  CHECK(target.labels == std::vector<int>{1, 2, 3});
}

TEST_CASE("ambiguous toy data carries two labels") {
  const Dataset d = toy_ambiguous(40, 3);
  const auto counts = label_counts(d);
  REQUIRE(counts.size() == 2);
  CHECK(counts.at(1) == 2 * counts.at(2));
  CHECK(toy_ambiguous_spec().means == toy_source_spec().means);
}

TEST_CASE("cigars covariances and rotation") {
  const GeneratorSpec source = cigars_source_spec();
  CHECK(source.points_per_component == 1000);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(source.covariances[0]);
  CHECK(eig.eigenvalues()[0] == doctest::Approx(0.125));
  CHECK(eig.eigenvalues()[1] == doctest::Approx(0.845));
  CHECK(source.covariances[0] == source.covariances[2]);
  CHECK(source.covariances[1](0, 1) == doctest::Approx(-0.36));

  const GeneratorSpec target = cigars_target_spec();
  const Matrix r = rotation_2d(90);
  CHECK(target.means[2].isApprox(vec({0, 1.5})));
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(target.means[c].isApprox(r * source.means[c]));
    CHECK(target.covariances[c].isApprox(r * source.covariances[c] * r.transpose()));
  }
}

TEST_CASE("rotation matrices") {
  CHECK(rotation_2d(90) == mat(2, 2, {0, -1, 1, 0}));
  CHECK(rotation_2d(-90) == mat(2, 2, {0, 1, -1, 0}));
  CHECK(rotation_2d(360) == Matrix::Identity(2, 2));
  const Matrix r = rotation_2d(30);
  CHECK((r * r.transpose()).isApprox(Matrix::Identity(2, 2)));
  CHECK(r(1, 0) == doctest::Approx(0.5));
}

TEST_CASE("sampling is balanced and deterministic") {
  const GeneratorSpec spec = toy_target_spec(17, 5);
  const Dataset a = sample(spec);
  CHECK(a.size() == 51);
  for (const auto& [label, count] : label_counts(a)) CHECK(count == 17);
  CHECK(a == sample(spec));
  CHECK(!(a == sample(toy_target_spec(17, 6))));
  CHECK(toy_source(10, 3) == toy_source(10, 3));
  CHECK(cigars_target(10, 3) == cigars_target(10, 3));
}

TEST_CASE("large samples match the specified moments") {
  const GeneratorSpec spec = cigars_source_spec(10000, 42);
  const Dataset d = sample(spec);
  for (std::size_t c = 0; c < spec.means.size(); ++c) {
    const Matrix rows = component_rows(d, spec, c);
    const Vector mean = rows.colwise().mean().transpose();
    const Matrix centered = rows.rowwise() - mean.transpose();
    const Matrix cov = centered.transpose() * centered / static_cast<double>(rows.rows() - 1);
    for (Eigen::Index i = 0; i < mean.size(); ++i) {
      const double sd = std::sqrt(spec.covariances[c](i, i));
      CHECK(std::abs(mean[i] - spec.means[c][i]) <= 5.0 * sd / 100.0);
    }
    CHECK((cov - spec.covariances[c]).norm() <= 0.1 * spec.covariances[c].norm());
  }
}

TEST_CASE("invalid generator specs") {
  GeneratorSpec spec = toy_source_spec(10, 1);
  spec.covariances[1] = Matrix::Zero(2, 2);
  CHECK_THROWS_AS(sample(spec), Error);
  spec = toy_source_spec(10, 1);
  spec.covariances[0](0, 1) = 0.5;
  CHECK_THROWS_AS(sample(spec), Error);
  spec = toy_source_spec(0, 1);
  CHECK_THROWS_AS(sample(spec), Error);
  spec = toy_source_spec(10, 1);
  spec.labels.pop_back();
  CHECK_THROWS_AS(sample(spec), Error);
}

TEST_CASE("excluding classes keeps label numbers") {
  const Dataset d = toy_target(30, 2);
  const Dataset kept = exclude_classes(d, {3});
  CHECK(kept.size() == 60);
  CHECK(kept.present_labels() == std::vector<int>{1, 2});
  CHECK(exclude_classes(d, {}) == d);
  const Dataset middle = exclude_classes(d, {1, 3});
  CHECK(middle.present_labels() == std::vector<int>{2});
  try {
    exclude_classes(d, {1, 2, 3});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::invalid_result);
  }
}

TEST_CASE("balanced subsampling") {
  const Dataset two = exclude_classes(toy_target(20, 4), {3});
  const Dataset four = subsample_balanced(two, 4, 1);
  CHECK(label_counts(four) == std::map<int, int>{{1, 2}, {2, 2}});

  std::map<int, int> larger;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto counts = label_counts(subsample_balanced(two, 3, seed));
    REQUIRE(counts.size() == 2);
    CHECK(std::max(counts.at(1), counts.at(2)) == 2);
    CHECK(std::min(counts.at(1), counts.at(2)) == 1);
    ++larger[counts.at(1) == 2 ? 1 : 2];
  }
  CHECK(larger.size() == 2);

  const Dataset all = subsample_balanced(two, two.size(), 9);
  CHECK(all.size() == two.size());
  CHECK(label_counts(all) == label_counts(two));
  CHECK(subsample_balanced(two, 7, 3) == subsample_balanced(two, 7, 3));
  CHECK_THROWS_AS(subsample_balanced(two, two.size() + 1, 1), Error);
}

TEST_CASE("subsamples of reduced data only carry retained labels") {
  const Dataset d = cigars_target(50, 8);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Dataset s = subsample_balanced(exclude_classes(d, {2}), 12, seed);
    for (const int y : s.labels) CHECK(y != 2);
  }
}
