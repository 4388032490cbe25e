#pragma once

#include <string>
#include <vector>

#include "rflab/flow/flow.hpp"
#include "rflab/reduced/geodesic.hpp"

namespace rflab::reduced {

/// A target (y, t): y in torus coordinates, or (D, 0) with D the unit-metric
/// distance from the base point on a model space. t is flow time.
struct Target {
  Point y{0.0, 0.0};
  double t = 0.0;
};

struct FieldOptions {
  /// Start offsets. Empty picks {1e-3, 1e-4, 1e-5}/α at a degenerate vertex
  /// (extrapolated to 0; α the blowdown factor) and {0} otherwise.
  std::vector<double> epsilons;
  bool cross_check = true;  // compare every value with the path oracle
  double oracle_tol = 1e-3;
  int oracle_segments = 32;
  double ode_tol = 1e-11;
  double miss_tol = 1e-10;
};

struct FieldPoint {
  Target target;
  double tau = 0.0;  // t - base time
  double ell = 0.0;  // extrapolated to ε = 0 when several ε are used
  double L_bar = 0.0;  // 4τℓ₊
  double K = 0.0;
  double R = 0.0;
  double c = 1.0;
  std::vector<double> ell_by_epsilon;
  double oracle_ell = 0.0;  // at the smallest ε
  double oracle_gap = 0.0;  // (oracle - shooting)/max(1, |ℓ|), worst over ε
  double identity_residual = 0.0;
  int translate_x = 0, translate_y = 0;
  bool from_oracle = false;
};

struct ReducedField {
  Point base{0.0, 0.0};
  double base_time = 0.0;
  int dimension = 0;
  std::vector<double> epsilons;
  std::vector<FieldPoint> points;
  double max_oracle_gap = 0.0;
  double max_identity_residual = 0.0;
  int fallbacks = 0;
  double min_ell = 0.0;
  bool oracle_ok = true;
};

/// True when a model-space flow degenerates exactly at base_time.
bool starts_at_vertex(const flow::FlowHistory& h, double base_time);

/// ε-values used for a base time (see FieldOptions::epsilons).
std::vector<double> default_epsilons(const flow::FlowHistory& h, double base_time);

/// Value at ε = 0 of the quadratic in √ε through three (ε, value) pairs, or
/// the single value when only one ε is given.
double extrapolate_epsilon(const std::vector<double>& eps, const std::vector<double>& values);

/// ℓ₊ = L₊/2√τ at each target, by shooting, cross-checked against the path
/// oracle. Throws UnsupportedModel for homogeneous flows.
ReducedField ell_plus_field(const flow::FlowHistory& h, double base_time, Point base,
                            const std::vector<Target>& targets, const FieldOptions& options = {});

struct ThetaOptions {
  int torus_resolution = 16;  // target grid per side
  int radial_panels = 16;     // 3-point Gauss panels on [0, D_max]
  double tol = 1e-5;          // monotonicity slack
  FieldOptions field{{}, false};
};

struct ThetaSeries {
  std::vector<double> times;
  std::vector<double> tau;
  std::vector<double> theta;
  std::vector<double> lower_bound;  // Ṽ(τ)/(4πe)^{n/2}
  std::vector<double> min_ell;
  bool nonincreasing = true;
  double max_increase = 0.0;
  bool above_bound = true;
  double min_bound_ratio = 0.0;  // min θ₊/bound
  int fallbacks = 0;
  double tol = 0.0;
};

/// Radius of the unit-metric ball whose volume equals the model's base
/// volume (π on the full round 3-sphere of volume 2π²).
double model_ball_radius(int dimension, int sign, double base_volume);

/// Forward reduced volume θ₊(t) = ∫ e^{ℓ₊}/(4πτ)^{n/2} dv at each time. On
/// the torus the integral is a tensor-grid sum; on model spaces ℓ₊ is radial
/// and the integral runs over the ball of equal volume.
ThetaSeries theta_plus(const flow::FlowHistory& h, double base_time, Point base,
                       const std::vector<double>& times, const ThetaOptions& options = {});

struct IdentityOptions {
  double step = 4e-3;       // spatial FD step (coordinate units)
  double time_step = 0.0;   // 0 picks 1e-3·τ
  double tol = 1e-4;
  double smooth_tol = 1e-2;  // relative agreement of second differences at h and 2h
  FieldOptions field{{}, false, 1e-3, 32, 1e-13, 1e-13};
};

struct IdentityRow {
  Target target;
  double tau = 0.0;
  double ell = 0.0, K = 0.0, R = 0.0;
  double grad_sq = 0.0, ell_t = 0.0, lap = 0.0;
  double gradient_identity = 0.0;  // |∇ℓ|² + R - ℓ/τ - K/τ^{3/2}
  double time_identity = 0.0;      // ∂ℓ/∂t - R + K/2τ^{3/2} + ℓ/τ
  double laplacian_bound = 0.0;    // Δℓ - R - n/2τ + K/2τ^{3/2}, ≤ 0
  double supersolution = 0.0;      // ∂ℓ/∂t + Δℓ + |∇ℓ|² - R - n/2τ, ≤ 0
  double heat_supersolution = 0.0;  // (∂/∂t - Δ)(L̄ + 2nτ), ≥ 0
  double v_like = 0.0;             // τ(2Δℓ + |∇ℓ|² - R) - ℓ - n, ≤ 0
  double u_hat_residual = 0.0;     // (∂/∂t + Δ - R)û, ≤ 0
  bool smooth = true;
};

struct IdentityReport {
  std::vector<IdentityRow> rows;
  double excluded_fraction = 0.0;
  double max_gradient_identity = 0.0;
  double max_time_identity = 0.0;
  double max_laplacian_bound = 0.0;  // largest value (should be ≤ tol)
  double max_supersolution = 0.0;
  double min_heat_supersolution = 0.0;
  double max_v_like = 0.0;
  double max_u_hat_residual = 0.0;
  double tol = 0.0;
  bool identities_ok = true;
  bool inequalities_ok = true;
};

/// Finite-difference check of the gradient and time identities and of the
/// Laplacian, supersolution and v₊-like inequalities at the given targets.
/// Points whose stencil crosses the cut locus are excluded (and counted).
IdentityReport check_identities(const flow::FlowHistory& h, double base_time, Point base,
                                const std::vector<Target>& targets,
                                const IdentityOptions& options = {});

struct HessianOptions {
  double step = 2e-3;
  double tol = 1e-3;
  FieldOptions field{{}, false, 1e-3, 32, 1e-13, 1e-13};
};

struct HessianRow {
  Target target;
  Point direction{1.0, 0.0};  // unit in the background (flat or unit-curvature) metric
  double hessian = 0.0;       // ∇²L₊(Y, Y)
  double bound = 0.0;         // |Y|²/√τ + 2√τ Rc(Y, Y)
  double margin = 0.0;        // bound - hessian
};

struct HessianReport {
  bool refused = false;
  std::string reason;
  std::vector<HessianRow> rows;
  double min_margin = 0.0;
  double tol = 0.0;
  bool ok = false;
};

/// FD Hessian of L₊ in the target against |Y|²/√τ + 2√τ Rc(Y, Y). Refuses
/// (refused = true, ok = false) unless every target slice has a nonnegative
/// curvature operator.
HessianReport hessian_check(const flow::FlowHistory& h, double base_time, Point base,
                            const std::vector<Target>& targets, const HessianOptions& options = {});

std::string field_csv(const ReducedField& f);
std::string theta_csv(const ThetaSeries& s);
/// (η, x, y, X_x, X_y, integrand √η(R + |X|²), H) along a geodesic.
std::string geodesic_csv(const ReducedGeometry& g, const GeodesicSolution& sol);

}  // namespace rflab::reduced
