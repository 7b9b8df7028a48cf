#pragma once

#include <cstdint>
#include <vector>

#include "emtl/dataset.hpp"

namespace emtl {

/// Labeled Gaussian generator: component c emits points_per_component
/// samples from N(means[c], covariances[c]) labeled labels[c].
struct GeneratorSpec {
  std::vector<Vector> means;
  std::vector<Matrix> covariances;
  std::vector<int> labels;
  int points_per_component = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

Dataset sample(const GeneratorSpec& spec);

// Three Gaussians at (-1,0), (0,0), (1,0) with covariance 0.3^2 I.
GeneratorSpec toy_source_spec(int n_per_class = 100, std::uint64_t seed = 0);
// Same with means (-0.1,-2), (0,0), (0.1,2).
GeneratorSpec toy_target_spec(int n_per_class = 100, std::uint64_t seed = 0);
// toy_source with the outer components both labeled 1.
GeneratorSpec toy_ambiguous_spec(int n_per_class = 100, std::uint64_t seed = 0);
GeneratorSpec cigars_source_spec(int n_per_class = 1000, std::uint64_t seed = 0);
// cigars_source conjugated by a 90 degree rotation.
GeneratorSpec cigars_target_spec(int n_per_class = 1000, std::uint64_t seed = 0);

Dataset toy_source(int n_per_class = 100, std::uint64_t seed = 0);
Dataset toy_target(int n_per_class = 100, std::uint64_t seed = 0);
Dataset toy_ambiguous(int n_per_class = 100, std::uint64_t seed = 0);
Dataset cigars_source(int n_per_class = 1000, std::uint64_t seed = 0);
Dataset cigars_target(int n_per_class = 1000, std::uint64_t seed = 0);

/// 2x2 counter-clockwise rotation.
Matrix rotation_2d(double degrees);

/// Drops every point whose label is listed; labels are not renumbered.
Dataset exclude_classes(const Dataset& data, const std::vector<int>& labels_to_drop);

/// Draws exactly n points without replacement, floor(n/L) or ceil(n/L) from
/// each of the L present classes; the classes receiving the extra points are
/// chosen at random. The result is shuffled.
Dataset subsample_balanced(const Dataset& data, std::size_t n, std::uint64_t seed);

}  // namespace emtl
