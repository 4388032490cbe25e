#include "rflab/numerics/fd_check.hpp"

#include <cmath>
#include <stdexcept>

namespace rflab::numerics {

FdConvergenceReport fd_report_from_residuals(std::span<const double> h_levels,
                                             std::span<const double> max_residuals,
                                             double exact_tol) {
  if (h_levels.size() != max_residuals.size() || h_levels.empty()) {
    throw std::invalid_argument("fd_report: need one residual per level");
  }
  FdConvergenceReport rep;
  rep.h.assign(h_levels.begin(), h_levels.end());
  rep.max_residual.assign(max_residuals.begin(), max_residuals.end());
  rep.exact = true;
  for (double r : rep.max_residual) {
    if (!(r <= exact_tol)) rep.exact = false;
  }
  bool falling = rep.max_residual.size() > 1;
  for (std::size_t k = 0; k + 1 < rep.h.size(); ++k) {
    const double r0 = rep.max_residual[k], r1 = rep.max_residual[k + 1];
    double order = 0.0;
    if (r0 > 0.0 && r1 > 0.0) order = std::log(r0 / r1) / std::log(rep.h[k] / rep.h[k + 1]);
    rep.orders.push_back(order);
    // a residual that shrinks by less than a fifth of the refinement is not decaying
    if (!(order > 0.2)) falling = false;
  }
  rep.decaying = rep.exact || falling;
  return rep;
}

FdConvergenceReport fd_residual(const std::function<Field(std::size_t)>& lhs,
                                const std::function<Field(std::size_t)>& rhs,
                                std::span<const double> h_levels, double exact_tol) {
  std::vector<double> res;
  for (std::size_t k = 0; k < h_levels.size(); ++k) {
    const Field a = lhs(k), b = rhs(k);
    if (a.size() != b.size()) throw std::invalid_argument("fd_residual: size mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    res.push_back(m);
  }
  return fd_report_from_residuals(h_levels, res, exact_tol);
}

}  // namespace rflab::numerics
