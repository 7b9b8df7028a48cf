#include <doctest.h>

#include <cmath>
#include <limits>

#include "emtl/error.hpp"
#include "emtl/optim.hpp"
#include "helpers.hpp"

using namespace emtl;
using namespace emtl::test;

namespace {

Objective quadratic(const Matrix& a, const Vector& b) {
  return [a, b](const Vector& x, Vector& g) {
    g = a * x - b;
    return 0.5 * x.dot(a * x) - b.dot(x);
  };
}

bool non_increasing(const std::vector<double>& trace) {
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (trace[i] > trace[i - 1]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("shifted sphere") {
  const Vector c = vec({1.5, -2, 0.25});
  const Objective f = [&](const Vector& x, Vector& g) {
    g = 2.0 * (x - c);
    return (x - c).squaredNorm();
  };
  const SolverResult r = minimize(f, Vector::Zero(3));
  CHECK(r.status == SolverStatus::converged);
  CHECK((r.x - c).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("random SPD quadratics match the direct solve") {
  std::mt19937_64 rng(42);
  for (int t = 0; t < 20; ++t) {
    const Matrix a = random_spd(5, rng);
    const Vector b = random_matrix(5, 1, rng);
    SolverConfig config;
    config.gradient_tolerance = 1e-12;
    const SolverResult r = minimize(quadratic(a, b), Vector::Zero(5), config);
    const Vector direct = a.ldlt().solve(b);
    CHECK((r.x - direct).norm() <= 1e-6 * direct.norm());
    CHECK(non_increasing(r.value_trace));
  }
}

TEST_CASE("convex quadratics converge within dimension plus five iterations") {
  std::mt19937_64 rng(7);
  for (const int n : {1, 2, 5, 8, 10}) {
    for (int t = 0; t < 10; ++t) {
      const Matrix a = random_spd(n, rng, 0.1);
      const Vector b = random_matrix(n, 1, rng, 3.0);
      const SolverResult r = minimize(quadratic(a, b), Vector::Zero(n));
      CHECK(r.status == SolverStatus::converged);
      CHECK(r.iterations <= n + 5);
      CHECK(r.gradient.cwiseAbs().maxCoeff() <= 1e-6);
    }
  }
}

TEST_CASE("Rosenbrock from the standard start") {
  const Objective f = [](const Vector& x, Vector& g) {
    const double a = 1.0 - x[0];
    const double b = x[1] - x[0] * x[0];
    g[0] = -2.0 * a - 400.0 * x[0] * b;
    g[1] = 200.0 * b;
    return a * a + 100.0 * b * b;
  };
  SolverConfig config;
  config.gradient_tolerance = 1e-9;
  const SolverResult r = minimize(f, vec({-1.2, 1}), config);
  CHECK(r.status == SolverStatus::converged);
  CHECK(std::abs(r.x[0] - 1.0) <= 1e-5);
  CHECK(std::abs(r.x[1] - 1.0) <= 1e-5);
  CHECK(non_increasing(r.value_trace));
}

TEST_CASE("converged status implies a small gradient") {
  const Objective f = [](const Vector& x, Vector& g) {
    g = x.array().sinh().matrix();
    return x.array().cosh().sum();
  };
  const SolverResult r = minimize(f, vec({2, -1, 0.5}));
  REQUIRE(r.status == SolverStatus::converged);
  CHECK(r.gradient.cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("budget exhaustion is reported") {
  std::mt19937_64 rng(1);
  const Matrix a = random_spd(10, rng, 1e-3);
  const Vector b = random_matrix(10, 1, rng);
  SolverConfig config;
  config.max_evaluations = 3;
  const SolverResult r = minimize(quadratic(a, b), Vector::Zero(10), config);
  CHECK(r.status == SolverStatus::budget_exhausted);
  CHECK(r.evaluations <= 3);
}

TEST_CASE("non-finite objective yields numerical failure with the best iterate") {
  const Objective f = [](const Vector& x, Vector& g) {
    if (x[0] > 0.5) {
      g.setConstant(std::numeric_limits<double>::quiet_NaN());
      return std::numeric_limits<double>::quiet_NaN();
    }
    g[0] = -1.0;
    return -x[0];
  };
  const SolverResult r = minimize(f, vec({0.0}));
  CHECK(std::isfinite(r.value));
  CHECK(r.x[0] <= 0.5);
  CHECK(r.status != SolverStatus::converged);

  const Objective bad_start = [](const Vector&, Vector& g) {
    g.setZero();
    return std::numeric_limits<double>::infinity();
  };
  CHECK(minimize(bad_start, vec({1.0})).status == SolverStatus::numerical_failure);
}

TEST_CASE("invalid solver configuration") {
  SolverConfig config;
  config.memory = 0;
  CHECK_THROWS_AS(config.validate(), Error);
  config = {};
  config.gradient_tolerance = 0;
  CHECK_THROWS_AS(config.validate(), Error);
  config = {};
  config.curvature = 1e-5;
  CHECK_THROWS_AS(config.validate(), Error);
}
