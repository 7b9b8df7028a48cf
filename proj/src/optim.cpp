#include "emtl/optim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "emtl/error.hpp"

namespace emtl {

namespace {

struct Probe {
  double alpha = 0.0;
  double value = 0.0;
  double slope = 0.0;  // directional derivative along the search direction
  Vector x;
  Vector gradient;
  bool finite = true;
};

class Evaluator {
 public:
  Evaluator(const Objective& objective, int budget) : objective_(objective), budget_(budget) {}

  bool exhausted() const { return count_ >= budget_; }
  int count() const { return count_; }

  double operator()(const Vector& x, Vector& gradient) {
    ++count_;
    gradient.resize(x.size());
    return objective_(x, gradient);
  }

 private:
  const Objective& objective_;
  int budget_;
  int count_ = 0;
};

// Minimizer of the cubic interpolating (a, fa, da) and (b, fb, db),
// safeguarded to the inner 80% of the bracket.
double interpolate(const Probe& a, const Probe& b) {
  const double lo = std::min(a.alpha, b.alpha);
  const double hi = std::max(a.alpha, b.alpha);
  const double margin = 0.1 * (hi - lo);
  const double d1 = a.slope + b.slope - 3.0 * (a.value - b.value) / (a.alpha - b.alpha);
  const double disc = d1 * d1 - a.slope * b.slope;
  double t = 0.5 * (lo + hi);
  if (disc >= 0.0 && a.finite && b.finite) {
    const double d2 = std::copysign(std::sqrt(disc), b.alpha - a.alpha);
    const double denom = b.slope - a.slope + 2.0 * d2;
    if (denom != 0.0) {
      const double cand = b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / denom;
      if (std::isfinite(cand)) t = cand;
    }
  }
  return std::clamp(t, lo + margin, hi - margin);
}

enum class SearchOutcome { accepted, failed, budget, non_finite };

struct LineSearch {
  Evaluator& eval;
  const SolverConfig& config;
  const Vector& x0;
  const Vector& direction;
  double f0;
  double slope0;

  Probe probe(double alpha) {
    Probe p;
    p.alpha = alpha;
    p.x = x0 + alpha * direction;
    p.value = eval(p.x, p.gradient);
    p.finite = std::isfinite(p.value) && p.gradient.allFinite();
    p.slope = p.finite ? p.gradient.dot(direction) : 0.0;
    return p;
  }

  bool sufficient(const Probe& p) const {
    return p.finite && p.value <= f0 + config.sufficient_decrease * p.alpha * slope0;
  }
  bool curvature_ok(const Probe& p) const {
    return std::abs(p.slope) <= -config.curvature * slope0;
  }

  SearchOutcome zoom(Probe lo, Probe hi, Probe& out) {
    for (int i = 0; i < 40; ++i) {
      if (eval.exhausted()) {
        out = lo;
        return lo.alpha > 0.0 ? SearchOutcome::accepted : SearchOutcome::budget;
      }
      if (std::abs(hi.alpha - lo.alpha) <= 1e-16 * std::max(1.0, lo.alpha)) break;
      Probe p = probe(interpolate(lo, hi));
      if (!sufficient(p) || p.value >= lo.value) {
        hi = p;
      } else {
        if (curvature_ok(p)) {
          out = p;
          return SearchOutcome::accepted;
        }
        if (p.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
        lo = p;
      }
    }
    // Bracket collapsed: take the best decreasing point if there is one.
    out = lo;
    return lo.alpha > 0.0 && lo.value < f0 ? SearchOutcome::accepted : SearchOutcome::failed;
  }

  // One secant step toward the exact line minimizer; exact on quadratics,
  // where it restores the finite termination of conjugate directions.
  void refine(Probe& accepted) {
    const double curvature = accepted.slope - slope0;
    if (!(curvature > 0.0) || std::abs(accepted.slope) <= 1e-12 * std::abs(slope0)) return;
    const double alpha = -accepted.alpha * slope0 / curvature;
    if (!std::isfinite(alpha) || alpha <= 0.0 || eval.exhausted()) return;
    Probe p = probe(alpha);
    if (sufficient(p) && curvature_ok(p) && p.value <= accepted.value) accepted = std::move(p);
  }

  SearchOutcome search(double alpha, Probe& out) {
    const SearchOutcome outcome = run(alpha, out);
    if (outcome == SearchOutcome::accepted) refine(out);
    return outcome;
  }

  SearchOutcome run(double alpha, Probe& out) {
    Probe prev;
    prev.alpha = 0.0;
    prev.value = f0;
    prev.slope = slope0;
    prev.x = x0;
    for (int i = 0; i < 60; ++i) {
      if (eval.exhausted()) return SearchOutcome::budget;
      Probe p = probe(alpha);
      if (!p.finite) {
        // Step into a region the objective cannot evaluate: back off.
        alpha = 0.5 * (prev.alpha + alpha);
        if (alpha - prev.alpha <= 1e-20) return SearchOutcome::non_finite;
        continue;
      }
      if (!sufficient(p) || (i > 0 && p.value >= prev.value)) return zoom(prev, p, out);
      if (curvature_ok(p)) {
        out = p;
        return SearchOutcome::accepted;
      }
      if (p.slope >= 0.0) return zoom(p, prev, out);
      prev = p;
      alpha *= 2.0;
    }
    return SearchOutcome::failed;
  }
};

}  // namespace

void SolverConfig::validate() const {
  if (!(gradient_tolerance > 0.0)) throw Error(ErrorKind::invalid_configuration, "gradient_tolerance must be positive");
  if (max_evaluations < 1) throw Error(ErrorKind::invalid_configuration, "max_evaluations must be positive");
  if (memory < 1) throw Error(ErrorKind::invalid_configuration, "memory must be at least 1");
  if (!(sufficient_decrease > 0.0 && sufficient_decrease < curvature && curvature < 1.0)) {
    throw Error(ErrorKind::invalid_configuration, "line-search constants must satisfy 0 < c1 < c2 < 1");
  }
}

const char* to_string(SolverStatus status) {
  switch (status) {
    case SolverStatus::converged: return "converged";
    case SolverStatus::budget_exhausted: return "budget exhausted";
    case SolverStatus::line_search_failure: return "line search failure";
    case SolverStatus::numerical_failure: return "numerical failure";
  }
  return "unknown";
}

SolverResult minimize(const Objective& objective, const Vector& x0, const SolverConfig& config) {
  config.validate();
  Evaluator eval(objective, config.max_evaluations);
  SolverResult result;
  result.x = x0;
  result.value = eval(result.x, result.gradient);
  if (!std::isfinite(result.value) || !result.gradient.allFinite()) {
    result.status = SolverStatus::numerical_failure;
    result.evaluations = eval.count();
    return result;
  }
  result.value_trace.push_back(result.value);

  std::deque<Vector> s_hist;
  std::deque<Vector> y_hist;
  std::deque<double> rho_hist;
  std::vector<double> coeff;
  Vector direction(x0.size());

  auto finish = [&](SolverStatus status) {
    result.status = status;
    result.evaluations = eval.count();
    return result;
  };

  while (true) {
    if (result.gradient.lpNorm<Eigen::Infinity>() <= config.gradient_tolerance) {
      return finish(SolverStatus::converged);
    }
    if (eval.exhausted()) return finish(SolverStatus::budget_exhausted);

    // Two-loop recursion.
    direction = -result.gradient;
    const std::size_t h = s_hist.size();
    coeff.assign(h, 0.0);
    for (std::size_t i = h; i-- > 0;) {
      coeff[i] = rho_hist[i] * s_hist[i].dot(direction);
      direction -= coeff[i] * y_hist[i];
    }
    if (h > 0) direction *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t i = 0; i < h; ++i) {
      const double b = rho_hist[i] * y_hist[i].dot(direction);
      direction += (coeff[i] - b) * s_hist[i];
    }
    double slope = result.gradient.dot(direction);
    if (!(slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      direction = -result.gradient;
      slope = -result.gradient.squaredNorm();
    }
    const double alpha0 = h == 0 ? std::min(1.0, 1.0 / result.gradient.norm()) : 1.0;

    LineSearch search{eval, config, result.x, direction, result.value, slope};
    Probe accepted;
    const SearchOutcome outcome = search.search(alpha0, accepted);
    if (outcome == SearchOutcome::budget) return finish(SolverStatus::budget_exhausted);
    if (outcome == SearchOutcome::non_finite) return finish(SolverStatus::numerical_failure);
    if (outcome == SearchOutcome::failed) return finish(SolverStatus::line_search_failure);

    Vector s = accepted.x - result.x;
    Vector y = accepted.gradient - result.gradient;
    const double sy = s.dot(y);
    result.x = std::move(accepted.x);
    result.gradient = std::move(accepted.gradient);
    result.value = accepted.value;
    result.value_trace.push_back(result.value);
    ++result.iterations;
    if (sy > 1e-12 * std::sqrt(s.squaredNorm() * y.squaredNorm())) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > config.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
  }
}

}  // namespace emtl
