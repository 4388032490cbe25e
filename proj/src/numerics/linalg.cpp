#include "rflab/numerics/linalg.hpp"

#include <cmath>
#include <vector>

namespace rflab::numerics {

double weighted_dot(std::span<const double> x, std::span<const double> y,
                    std::span<const double> weights) {
  double s = 0.0;
  if (weights.empty()) {
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  } else {
    for (std::size_t i = 0; i < x.size(); ++i) s += weights[i] * x[i] * y[i];
  }
  return s;
}

CgResult conjugate_gradient(const LinearOperator& apply, std::span<const double> b,
                            std::span<double> x, std::span<const double> weights,
                            double rel_tol, int max_iter) {
  const std::size_t n = b.size();
  std::vector<double> r(n), p(n), ap(n);
  apply(x, ap);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ap[i];
  p = r;

  const double bnorm = std::sqrt(weighted_dot(b, b, weights));
  const double target = rel_tol * (bnorm > 0.0 ? bnorm : 1.0);
  double rr = weighted_dot(r, r, weights);

  CgResult res;
  res.residual = std::sqrt(rr);
  if (res.residual <= target) {
    res.converged = true;
    return res;
  }
  for (int it = 0; it < max_iter; ++it) {
    apply(p, ap);
    const double pap = weighted_dot(p, ap, weights);
    if (!(pap > 0.0)) break;  // lost positivity: stop with the current iterate
    const double alpha = rr / pap;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    const double rr_new = weighted_dot(r, r, weights);
    res.iterations = it + 1;
    res.residual = std::sqrt(rr_new);
    if (res.residual <= target) {
      res.converged = true;
      return res;
    }
    const double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
  }
  return res;
}

}  // namespace rflab::numerics
