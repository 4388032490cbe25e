#include "rflab/numerics/eigen.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rflab::numerics {

namespace {

void orthogonalize(Field& w, const std::vector<Field>& basis, std::span<const double> measure) {
  for (const auto& q : basis) {
    const double qq = weighted_dot(q, q, measure);
    const double c = weighted_dot(w, q, measure) / qq;
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= c * q[i];
  }
}

void normalize(Field& w, std::span<const double> measure) {
  const double nrm = std::sqrt(weighted_dot(w, w, measure));
  if (!(nrm > 0.0)) throw NumericalError("smallest_eigenpair: iterate collapsed to zero");
  for (double& x : w) x /= nrm;
}

}  // namespace

Eigenpair smallest_eigenpair(const LinearOperator& apply, std::span<const double> measure,
                             double potential_min, const ToleranceConfig& tol,
                             const EigenOptions& options) {
  tol.validate();
  const std::size_t n = measure.size();
  if (n == 0) throw std::invalid_argument("smallest_eigenpair: empty measure");
  const double shift = potential_min - 1.0;

  Field w = options.initial.empty() ? Field(n, 1.0) : options.initial;
  if (w.size() != n) throw std::invalid_argument("smallest_eigenpair: initial vector size");
  orthogonalize(w, options.deflation, measure);
  normalize(w, measure);

  const LinearOperator shifted = [&](std::span<const double> x, std::span<double> y) {
    apply(x, y);
    for (std::size_t i = 0; i < x.size(); ++i) y[i] -= shift * x[i];
  };

  Eigenpair out;
  Field aw(n), x(n);
  const int cg_max = static_cast<int>(std::max<std::size_t>(200, 20 * n));
  for (int it = 0; it <= tol.max_iter; ++it) {
    apply(w, aw);
    const double lambda = weighted_dot(w, aw, measure);
    for (std::size_t i = 0; i < n; ++i) aw[i] -= lambda * w[i];
    const double res = std::sqrt(weighted_dot(aw, aw, measure));
    out.residual_history.push_back(res);
    out.value = lambda;
    out.residual = res;
    out.iterations = it;
    if (res <= tol.abs_tol) {
      if (options.deflation.empty() && weighted_dot(w, measure, {}) < 0.0) {
        for (double& v : w) v = -v;
      }
      if (options.deflation.empty() && *std::min_element(w.begin(), w.end()) <= 0.0) {
        throw NumericalError("smallest_eigenpair: ground state is not positive");
      }
      out.vector = std::move(w);
      return out;
    }
    if (it == tol.max_iter) break;
    x = w;  // (A - s)^{-1} w is close to w / (λ - s)
    for (double& v : x) v /= std::max(lambda - shift, 1e-300);
    conjugate_gradient(shifted, w, x, measure, 1e-14, cg_max);
    orthogonalize(x, options.deflation, measure);
    normalize(x, measure);
    w.swap(x);
  }
  std::ostringstream os;
  os << "smallest_eigenpair: no convergence after " << tol.max_iter
     << " iterations (residual " << out.residual << ")";
  throw ConvergenceError(os.str(), out.residual_history);
}

}  // namespace rflab::numerics
