#pragma once

#include <functional>

#include "emtl/dataset.hpp"

namespace emtl {

struct SolverConfig {
  double gradient_tolerance = 1e-6;  // on the max-norm of the gradient
  int max_evaluations = 1000;
  int memory = 10;                   // stored curvature pairs
  double sufficient_decrease = 1e-4;
  double curvature = 0.9;

  void validate() const;
};

enum class SolverStatus {
  converged,
  budget_exhausted,
  line_search_failure,
  numerical_failure,
};

const char* to_string(SolverStatus status);

/// Returns f(x) and writes the gradient into `gradient` (already sized).
using Objective = std::function<double(const Vector& x, Vector& gradient)>;

struct SolverResult {
  Vector x;
  double value = 0.0;
  Vector gradient;
  SolverStatus status = SolverStatus::converged;
  int iterations = 0;
  int evaluations = 0;
  std::vector<double> value_trace;  // accepted iterates, starting with x0
};

/// Limited-memory BFGS with a strong-Wolfe line search. Never throws on
/// numerical trouble: a non-finite value or gradient yields
/// numerical_failure together with the best iterate so far.
SolverResult minimize(const Objective& objective, const Vector& x0, const SolverConfig& config = {});

}  // namespace emtl
