#pragma once

#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rflab/flow/flow.hpp"

namespace rflab::reduced {

/// The reduced distance is only available on flows whose geometry the
/// geodesic layer can represent (conformal tori and model spaces).
class UnsupportedModel : public std::invalid_argument {
 public:
  explicit UnsupportedModel(const std::string& what) : std::invalid_argument(what) {}
};

/// Everything the L₊ geodesic equation needs at one space-time point, for a
/// metric c(x, η)(dx² + dy²) in the path coordinates. c = e^{2ψ};
/// κ = -½ ∂_η log c is the Ricci eigenvalue the flow uses (Rc = κ g).
struct SpaceTimeSample {
  double c = 1.0;
  double psi_x = 0.0, psi_y = 0.0;
  double kappa = 0.0;
  double R = 0.0;
  double R_x = 0.0, R_y = 0.0;
  double R_t = 0.0;
};

/// A flow seen from a base time: η = t - base_time is the path parameter.
class ReducedGeometry {
 public:
  virtual ~ReducedGeometry() = default;
  [[nodiscard]] virtual SpaceTimeSample at(double x, double y, double eta) const = 0;
  [[nodiscard]] virtual int dimension() const = 0;
  /// Coordinate periods (torus) or 0 for the radial model coordinate.
  [[nodiscard]] virtual double period_x() const { return 0.0; }
  [[nodiscard]] virtual double period_y() const { return 0.0; }
  /// Bounds of the conformal factor c over the stored space-time region.
  [[nodiscard]] virtual std::pair<double, double> conformal_range() const { return {1.0, 1.0}; }
  /// Lower bound of R over the stored space-time region (-inf if unknown).
  [[nodiscard]] virtual double scalar_min() const { return -std::numeric_limits<double>::infinity(); }
  [[nodiscard]] double base_time() const { return base_time_; }
  [[nodiscard]] double max_eta() const { return max_eta_; }

 protected:
  double base_time_ = 0.0;
  double max_eta_ = 0.0;
};

/// Conformal torus: one space-time interpolant (Catmull–Rom bicubic in
/// space, cubic Hermite in time through the stored snapshots, with rates
/// φ_t and R_t = ΔR + R²). All derivatives the geodesic layer uses are exact
/// derivatives of this interpolant, so conservation laws of the geodesic
/// system hold to ODE tolerance.
class TorusSampler final : public ReducedGeometry {
 public:
  explicit TorusSampler(const flow::FlowHistory& h);
  [[nodiscard]] SpaceTimeSample at(double x, double y, double eta) const override;
  [[nodiscard]] int dimension() const override { return 2; }
  [[nodiscard]] double period_x() const override { return lx_; }
  [[nodiscard]] double period_y() const override { return ly_; }
  [[nodiscard]] std::pair<double, double> conformal_range() const override { return c_range_; }
  [[nodiscard]] double scalar_min() const override { return r_min_; }

 private:
  std::pair<double, double> c_range_{1.0, 1.0};
  double r_min_ = 0.0;
  int nx_ = 0, ny_ = 0;
  double lx_ = 1.0, ly_ = 1.0;
  std::vector<double> times_;
  std::vector<Field> phi_, phi_t_, R_, R_t_;
};

/// Homothetic model space a(t)·ĝ along one fixed ĝ-geodesic; the path
/// coordinate x is ĝ-arclength. a(t) is linear, so the geometry extends
/// analytically down to the base time even before the stored history (the
/// expander vertex).
class ModelSampler final : public ReducedGeometry {
 public:
  ModelSampler(const flow::FlowHistory& h, double base_time);
  [[nodiscard]] SpaceTimeSample at(double x, double y, double eta) const override;
  [[nodiscard]] int dimension() const override { return n_; }
  [[nodiscard]] double scale(double eta) const { return a0_ + slope_ * eta; }
  [[nodiscard]] double unit_ricci() const { return rho_; }
  [[nodiscard]] int sign() const { return sign_; }
  [[nodiscard]] double base_volume() const { return base_volume_; }

 private:
  int n_ = 3;
  int sign_ = -1;
  double rho_ = 0.0;
  double a0_ = 1.0;  // scale at the base time
  double slope_ = 0.0;
  double base_volume_ = 1.0;
};

/// Geometry for paths starting at base_time (which may precede the stored
/// history for model spaces). Throws UnsupportedModel for homogeneous flows.
std::unique_ptr<ReducedGeometry> make_geometry(const flow::FlowHistory& h, double base_time);

}  // namespace rflab::reduced
