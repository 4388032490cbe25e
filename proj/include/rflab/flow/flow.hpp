#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rflab/geometry/metric.hpp"
#include "rflab/numerics/ode.hpp"
#include "rflab/numerics/types.hpp"

namespace rflab::flow {

using geometry::CurvatureData;
using geometry::MetricModel;
using geometry::ModelKind;

struct FlowOptions {
  /// ODE tolerances for homogeneous flows.
  ToleranceConfig tol{1e-12, 1e-12, 100000, 1e-4};
  /// Times a homogeneous flow must land on exactly.
  std::vector<double> stops;
  /// Torus time step; 0 picks the largest step not above h²/2 that divides
  /// the window evenly.
  double torus_dt = 0.0;
  /// Keep every k-th torus step as a snapshot (0 keeps at most
  /// max_snapshots).
  int torus_stride = 0;
  int max_snapshots = 256;
  /// Birth time T of a solution that came out of a degenerate metric.
  /// Model spaces compute it; other kinds default to 0.
  std::optional<double> birth_time;
};

/// A Ricci flow g(t) on [t_begin, t_end] for one testbed. Immutable after
/// construction. Blowdowns share the underlying solution and only change
/// how time and the metric are scaled.
class FlowHistory {
 public:
  [[nodiscard]] ModelKind kind() const;
  [[nodiscard]] int dimension() const;
  [[nodiscard]] double t_begin() const;
  [[nodiscard]] double t_end() const;
  [[nodiscard]] double birth_time() const;
  [[nodiscard]] bool extinct() const;
  /// Time where the flow stopped existing (only when extinct()).
  [[nodiscard]] double extinction_time() const;
  [[nodiscard]] double alpha() const { return alpha_; }

  [[nodiscard]] std::vector<double> snapshot_times() const;
  [[nodiscard]] MetricModel metric(double t) const;
  [[nodiscard]] CurvatureData curvature(double t) const;
  [[nodiscard]] double volume(double t) const;
  /// Spatially integrated ∫R dv at time t.
  [[nodiscard]] double total_scalar(double t) const;

  /// Reduced parameters and their time derivative from the flow equation:
  /// (A, B, C) for homogeneous, φ on the torus, the scale a for model spaces.
  void parameters(double t, Field& value, Field& rate) const;
  /// Smallest step the stored solution resolves (torus step, or 0).
  [[nodiscard]] double native_step() const;

  /// g_α(t) = α⁻¹ g(α t). Throws std::invalid_argument unless α > 0.
  [[nodiscard]] FlowHistory blowdown(double alpha) const;

  struct Data;

 private:
  friend FlowHistory evolve(const MetricModel&, double, double, const FlowOptions&);
  friend FlowHistory model_space_flow(const geometry::ModelSpaceMetric&, double, double);
  void require_time(double t) const;
  std::shared_ptr<const Data> data_;
  double alpha_ = 1.0;
};

/// Runs the Ricci flow from m0 at time t0 up to t1. Extinction truncates the
/// history and sets extinct(); it is not an error.
FlowHistory evolve(const MetricModel& m0, double t0, double t1, const FlowOptions& options = {});

/// Model-space flow with scale a(t) = a0 - 2ρ₀(t - t0), valid on [t0, t1].
FlowHistory model_space_flow(const geometry::ModelSpaceMetric& m0, double t0, double t1);

/// V(t) / t^{n/2}. Throws std::invalid_argument for t <= 0.
double scaled_volume(const FlowHistory& h, double t);

struct LowerBoundReport {
  bool ok = true;
  double min_margin = 0.0;  // min over snapshots of min_x R + n/2t
  double worst_time = 0.0;
  double tol = 0.0;
};

/// R + n/(2t) >= -tol at every snapshot time t > 0.
LowerBoundReport check_R_lower_bound(const FlowHistory& h, double tol = 1e-8);

/// Rows (t, parameters..., V, R_min, R_max) at the snapshot times.
std::string history_csv(const FlowHistory& h);

}  // namespace rflab::flow
