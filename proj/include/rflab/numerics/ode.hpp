#pragma once

#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "rflab/numerics/types.hpp"

namespace rflab::numerics {

using State = std::vector<double>;

/// dy/dt = rhs(t, y); writes into dydt, which has the size of y.
using OdeRhs = std::function<void(double t, std::span<const double> y, std::span<double> dydt)>;

enum class OdeStatus { Completed, StepUnderflow, NonFinite, Terminated };

struct OdeOptions {
  ToleranceConfig tol{};
  double initial_step = 0.0;  // 0 picks a step from the RHS scale
  double max_step = std::numeric_limits<double>::infinity();
  /// Times the integrator lands on exactly (sorted internally).
  std::vector<double> stops;
  /// Only the final state is kept when false.
  bool record = true;
  /// Stops integration (status Terminated) when it returns true after an
  /// accepted step.
  std::function<bool(double t, std::span<const double> y)> terminate;
};

/// Accepted steps of an embedded Runge–Kutta run. Between steps the
/// trajectory is the cubic Hermite interpolant built from states and slopes.
struct OdeTrajectory {
  std::vector<double> t;
  std::vector<State> y;
  std::vector<State> dydt;
  OdeStatus status = OdeStatus::Completed;
  double last_valid_time = 0.0;
  std::string diagnostic;
  int rejected_steps = 0;

  [[nodiscard]] bool ok() const { return status == OdeStatus::Completed; }
  [[nodiscard]] const State& final_state() const { return y.back(); }
  [[nodiscard]] State at(double time) const;
  [[nodiscard]] TimeSeries component(std::size_t i) const;
};

/// Dormand–Prince 5(4) with PI step-size control.
///
/// A step whose size falls below a few ulps of t ends the run with
/// StepUnderflow and last_valid_time set; a non-finite stage ends it with
/// NonFinite. Neither throws: blow-up and extinction are outcomes the
/// flow layer interprets.
OdeTrajectory integrate_ode(const OdeRhs& rhs, State y0, double t0, double t1,
                            const OdeOptions& options = {});

/// Cubic Hermite interpolation on [t0, t1] given end values and slopes.
double hermite(double t, double t0, double t1, double y0, double y1, double d0, double d1);
double hermite_derivative(double t, double t0, double t1, double y0, double y1, double d0,
                          double d1);

}  // namespace rflab::numerics
