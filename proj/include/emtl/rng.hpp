#pragma once

#include <cstdint>
#include <random>

namespace emtl {

/// Splittable seed: every stream is a pure function of (root, path of child
/// indices), so parallel folds draw from independent, reproducible generators.
class SeedStream {
 public:
  explicit SeedStream(std::uint64_t root = 0) : state_(root) {}

  SeedStream child(std::uint64_t index) const;
  std::uint64_t value() const { return state_; }
  std::mt19937_64 engine() const;

 private:
  std::uint64_t state_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace emtl
