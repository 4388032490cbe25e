#pragma once

#include <functional>
#include <optional>
#include <utility>

#include "rflab/numerics/types.hpp"

namespace rflab::numerics {

struct ConcaveMaxResult {
  double argmax = 0.0;
  double value = 0.0;
  /// Still increasing after the bracket was doubled out to 2^40 times its
  /// initial upper end.
  bool unbounded = false;
  /// Sampled second differences came out positive somewhere on the bracket.
  bool concavity_warning = false;
  int evaluations = 0;
};

/// Golden-section maximization of a concave function on (lo, hi), with
/// automatic expansion of the bracket toward both ends (lower end halved,
/// upper end doubled) until the maximum is enclosed.
ConcaveMaxResult maximize_concave_1d(const std::function<double(double)>& f,
                                     std::pair<double, double> bracket,
                                     const ToleranceConfig& tol);

/// Minimization over the unit sphere {∫ w² = 1} of a field space.
struct ConstrainedProblem {
  std::function<double(const Field&)> functional;
  /// Riesz gradient with respect to the inner product below.
  std::function<Field(const Field&)> gradient;
  /// Maps any nonzero field back onto the constraint set.
  std::function<Field(const Field&)> normalize;
  std::function<double(const Field&, const Field&)> inner;
  /// Optional preconditioner applied to the gradient (e.g. a Sobolev solve).
  std::function<Field(const Field&)> precondition;
};

struct ConstrainedMinResult {
  Field minimizer;
  double value = 0.0;
  double gradient_norm = 0.0;  // norm of the tangential gradient
  int iterations = 0;
  bool converged = false;
};

/// Projected (optionally preconditioned) gradient descent with Armijo
/// backtracking along the retraction w - αd → normalize. On stagnation the
/// best iterate is returned with converged = false.
ConstrainedMinResult minimize_constrained(const ConstrainedProblem& problem, const Field& w0,
                                          const ToleranceConfig& tol);

}  // namespace rflab::numerics
