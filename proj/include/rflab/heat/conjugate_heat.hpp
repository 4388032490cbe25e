#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rflab/flow/flow.hpp"

namespace rflab::heat {

/// A positive unit-mass density at one time with its potential f₊ defined
/// by u = e^{-f₊}/(4πσ)^{n/2}.
struct DensityState {
  double t = 0.0;
  double sigma = 1.0;
  Field u;
  Field f_plus;
};

DensityState make_state(double t, Field u, double sigma, int n);
/// u recovered from f₊ and σ; the inverse of the potential in make_state.
Field density_from_potential(const Field& f_plus, double sigma, int n);

struct BackwardOptions {
  /// Solver step; 0 uses the flow's own step (torus) and exact evaluation
  /// elsewhere.
  double dt = 0.0;
  /// Times that must be retained (they are snapped onto the step grid and
  /// must lie within half a step of it).
  std::vector<double> keep_times;
  /// Also retain every k-th step inside the keep window (0 disables).
  int keep_every = 0;
  double keep_from = -1e300;
  double keep_to = 1e300;
  /// Birth time used for σ = t - T in the returned states.
  double birth_time = 0.0;
};

/// Solves ∂u/∂t = -Δu + Ru backward from t_final down to t_stop.
///
/// On the torus the scheme is Crank–Nicolson in the flat-measure density
/// m = u e^{2φ}, which conserves Σ m exactly; the mass is also renormalized
/// after every step. Returned states are ordered by increasing time.
/// Throws NumericalError when positivity is lost.
std::vector<DensityState> solve_conjugate_backward(const flow::FlowHistory& h, double t_final,
                                                   const Field& u_final, double t_stop,
                                                   const BackwardOptions& options = {});

struct ImmortalOptions {
  double tol = 1e-8;
  /// First final time; defaults to twice the window end.
  double first_final_time = 0.0;
  double growth = 2.0;
  /// Times in the window at which densities are kept and compared.
  std::vector<double> sample_times;
  double birth_time = 0.0;
};

struct ImmortalDensity {
  std::pair<double, double> window;
  std::vector<DensityState> states;
  double construction_tail = 0.0;  // last final time used
  double cauchy_gap = 0.0;
  std::vector<double> gap_history;
  bool converged = false;
};

/// Limit of backward solutions from uniform data 1/V(tⁱ) as tⁱ grows,
/// declared converged once successive constructions differ by less than
/// tol in sup norm at the sample times.
ImmortalDensity construct_immortal_density(const flow::FlowHistory& h,
                                           std::pair<double, double> window,
                                           const ImmortalOptions& options);

struct VPlus {
  Field v;
  double integral = 0.0;
};

/// v₊ = [σ(2Δf₊ - |∇f₊|² + R) - f₊ + n] u with σ = t - T.
VPlus v_plus(const DensityState& s, const flow::FlowHistory& h, double birth_time);

struct ResidualReport {
  std::string check;
  double max_residual = 0.0;
  double max_lhs = 0.0;
  double min_rhs = 0.0;  // smallest value of the nonnegative side
  double time = 0.0;     // where the residual was evaluated
  double tol = 0.0;
  bool ok = false;
};

/// Residual of (∂/∂t + Δ - R)v₊ = 2σu|Rc + ∇²f₊ + g/2σ|² at the middle of
/// an odd number (3 or 5) of equally spaced states.
ResidualReport check_harnack_identity(const std::vector<DensityState>& states,
                                      const flow::FlowHistory& h, double birth_time,
                                      double tol);
/// Residual of (∂/∂t + Δ)V = 2|Rc + ∇²f₊|² + 2⟨∇V, ∇f₊⟩ for V = 2Δf₊ - |∇f₊|² + R.
ResidualReport check_v_identity(const std::vector<DensityState>& states,
                                const flow::FlowHistory& h, double tol);
/// Residual of (∂/∂t + Δ - R)v₀ = 2u|Rc + ∇²f|² with e^{-f} = u, v₀ = Vu.
ResidualReport check_steady_harnack(const std::vector<DensityState>& states,
                                    const flow::FlowHistory& h, double tol);
/// Residual of ∂f₊/∂t = -Δf₊ + |∇f₊|² - R - n/2σ.
ResidualReport check_f_plus_evolution(const std::vector<DensityState>& states,
                                      const flow::FlowHistory& h, double birth_time,
                                      double tol);

/// Centered time derivative at the middle of 3 or 5 equally spaced samples.
Field central_time_derivative(const std::vector<Field>& samples, double step);

}  // namespace rflab::heat
