#pragma once

#include <span>
#include <vector>

#include "rflab/numerics/linalg.hpp"
#include "rflab/numerics/types.hpp"

namespace rflab::numerics {

struct EigenOptions {
  /// Start vector; the constant field when empty.
  Field initial;
  /// Vectors the iteration is kept orthogonal to (in the measure inner product).
  std::vector<Field> deflation;
};

struct Eigenpair {
  double value = 0.0;
  Field vector;  // unit norm in L2(measure), positive for the ground state
  int iterations = 0;
  double residual = 0.0;
  std::vector<double> residual_history;
};

/// Ground state of a Schrödinger-type operator A = -4Δ + R that is
/// self-adjoint with respect to the diagonal measure.
///
/// Shifted inverse power iteration with shift potential_min - 1, which makes
/// A - shift positive definite whenever -4Δ is nonnegative. Converged when
/// ||A w - λ w|| <= tol.abs_tol; otherwise throws ConvergenceError carrying
/// the residual history.
Eigenpair smallest_eigenpair(const LinearOperator& apply, std::span<const double> measure,
                             double potential_min, const ToleranceConfig& tol,
                             const EigenOptions& options = {});

}  // namespace rflab::numerics
