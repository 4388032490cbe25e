#pragma once

#include <functional>
#include <span>

#include "rflab/numerics/types.hpp"

namespace rflab::numerics {

/// y = A x for a linear operator on fields of fixed size.
using LinearOperator = std::function<void(std::span<const double> x, std::span<double> y)>;

/// Inner product with diagonal weights; the identity weight when empty.
double weighted_dot(std::span<const double> x, std::span<const double> y,
                    std::span<const double> weights);

struct CgResult {
  int iterations = 0;
  double residual = 0.0;  // weighted norm of b - A x
  bool converged = false;
};

/// Conjugate gradients for A x = b where A is self-adjoint and positive in
/// the weighted inner product. x holds the initial guess on entry.
CgResult conjugate_gradient(const LinearOperator& apply, std::span<const double> b,
                            std::span<double> x, std::span<const double> weights,
                            double rel_tol, int max_iter);

}  // namespace rflab::numerics
