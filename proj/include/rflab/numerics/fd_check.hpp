#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rflab/numerics/types.hpp"

namespace rflab::numerics {

struct FdConvergenceReport {
  std::vector<double> h;              // grid spacing per level
  std::vector<double> max_residual;   // max |lhs - rhs| per level
  std::vector<double> orders;         // log(r_k / r_{k+1}) / log(h_k / h_{k+1})
  bool exact = false;                 // every residual at round-off level
  bool decaying = false;              // residuals fall under refinement
  [[nodiscard]] double final_order() const { return orders.empty() ? 0.0 : orders.back(); }
};

/// Evaluates both sides of a claimed identity on each refinement level and
/// reports the residual decay. Levels are indexed 0..h.size()-1 and the
/// evaluators return fields on the same grid for a given level.
FdConvergenceReport fd_residual(const std::function<Field(std::size_t level)>& lhs,
                                const std::function<Field(std::size_t level)>& rhs,
                                std::span<const double> h_levels, double exact_tol = 1e-13);

/// Same report from residual maxima computed elsewhere.
FdConvergenceReport fd_report_from_residuals(std::span<const double> h_levels,
                                             std::span<const double> max_residuals,
                                             double exact_tol = 1e-13);

}  // namespace rflab::numerics
