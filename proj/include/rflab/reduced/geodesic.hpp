#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rflab/reduced/sampler.hpp"

namespace rflab::reduced {

using Point = std::array<double, 2>;

/// A path (x(η), η) from the base point. For model spaces only the first
/// coordinate is used (signed arclength along a fixed unit-metric geodesic).
struct PathSample {
  Point base{0.0, 0.0};
  std::vector<double> eta;  // increasing, starts at epsilon
  std::vector<Point> position;
  double epsilon = 0.0;

  void validate() const;
};

/// Forward reduced length ∫√η(R + |γ′|²)dη of a piecewise-linear path. On
/// each segment √η is integrated exactly against the linear interpolant of
/// the rest of the integrand (exact for constant-speed paths on static flat
/// metrics). When ε > 0 the head ∫₀^ε √η R dη is replaced by its lower
/// bound -n√ε from R ≥ -n/2η.
double L_plus_of_path(const ReducedGeometry& g, const PathSample& p);

struct GeodesicSolution {
  PathSample path;
  std::vector<Point> X;         // dx/dη (coordinate components)
  std::vector<Point> momentum;  // √η X, finite at η = 0
  std::vector<double> H;        // traced Harnack expression H(X) along the path
  double tau = 0.0;             // η at the endpoint
  double L_head = 0.0;          // -n√ε
  double L_path = 0.0;          // ∫_ε^τ
  double L_plus = 0.0;          // L_head + L_path
  double K_path = 0.0;          // ∫_ε^τ η^{3/2} H dη
  double K = 0.0;               // effective K with t^{3/2}(R + |X|²) = K + L₊/2 at the endpoint
  double Q_start = 0.0;         // R + |X|² at η = ε
  double Q_end = 0.0;
  double identity_residual = 0.0;  // τ^{3/2}Q(τ) - ε^{3/2}Q(ε) - K_path - L_path/2
  bool ok = false;
  std::string diagnostic;

  [[nodiscard]] Point end() const { return path.position.back(); }
  [[nodiscard]] double ell() const;
};

struct ShootOptions {
  double epsilon = 0.0;
  double tol = 1e-11;  // ODE tolerance
  bool record = true;
};

/// Integrates the L₊-geodesic equation in s = √η from η = ε to η = τ with
/// initial regularized momentum P = √η X. With P the state is
///   x_s = 2P,  P_s = -2Γ(P,P) + s²c⁻¹∇R + 4sκP,
/// which is regular at s = 0 whenever the metric is. L and K are carried as
/// extra components.
GeodesicSolution geodesic_shoot(const ReducedGeometry& g, Point x0, Point momentum, double tau,
                                const ShootOptions& options = {});

/// Endpoint differential dL₊ = 2c·P(τ) in coordinates (so ∇L₊ = 2√τ X).
Point endpoint_differential(const ReducedGeometry& g, const GeodesicSolution& sol);

struct TargetValue {
  Point target{0.0, 0.0};  // as requested
  Point reached{0.0, 0.0};  // covering-space point the geodesic ends at
  double tau = 0.0;
  double L = 0.0;
  double ell = 0.0;
  double K = 0.0;
  double R = 0.0;  // at the target
  double c = 1.0;
  Point momentum{0.0, 0.0};
  Point differential{0.0, 0.0};  // dL₊ at the target
  double miss = 0.0;             // shooting endpoint error
  double identity_residual = 0.0;
  int translate_x = 0, translate_y = 0;
  bool from_oracle = false;
};

struct TargetOptions {
  double epsilon = 0.0;
  double ode_tol = 1e-11;
  double miss_tol = 1e-9;
  int max_newton = 40;
  /// Falls back to the oracle when shooting misses (flagged in the result).
  bool oracle_fallback = true;
};

/// Lattice translates of the target worth shooting at: of the 9 nearest,
/// those whose flat distance could still beat the nearest after accounting
/// for the spread of the conformal factor.
std::vector<Point> candidate_translates(const ReducedGeometry& g, Point x0, Point target);

/// ℓ₊ at one target by Newton shooting on the momentum (2-D FD Jacobian),
/// minimized over the candidate translates.
TargetValue shoot_to(const ReducedGeometry& g, Point x0, Point target, double tau,
                     const TargetOptions& options = {}, const Point* warm_start = nullptr);

struct OracleOptions {
  int segments = 32;
  int random_starts = 5;
  std::uint64_t seed = 20240601;
  bool descend = true;
  int max_iter = 400;
  double epsilon = 0.0;
};

struct OracleResult {
  double L = 0.0;
  double ell = 0.0;
  int iterations = 0;
  Point reached{0.0, 0.0};
};

/// Upper-bound oracle: piecewise-linear paths in s = √η with M equal
/// segments, L = ∫(2s²R + c|x_s|²/2)ds by 3-point Gauss per segment,
/// minimized by preconditioned gradient descent from the constant-speed
/// straight path and randomly perturbed starts, over the candidate translates.
OracleResult path_minimization_oracle(const ReducedGeometry& g, Point x0, Point target, double tau,
                                      const OracleOptions& options = {});

}  // namespace rflab::reduced
