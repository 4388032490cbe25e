#pragma once

#include <functional>
#include <optional>

#include "rflab/geometry/metric.hpp"
#include "rflab/numerics/types.hpp"

namespace rflab::entropy {

using geometry::MetricModel;

/// ∫|∇w|² dv. On the torus this is the flat edge sum, which pairs exactly
/// with the 5-point Laplacian (and is conformally invariant in 2-D).
double dirichlet_energy(const MetricModel& m, const Field& w);

/// F = ∫(|∇u|²/u + Ru) dv with the Fisher term evaluated as 4∫|∇√u|².
double F_functional(const MetricModel& m, const Field& u);

struct NashEntropy {
  double N = 0.0;       // ∫ u log u dv
  double N_plus = 0.0;  // N + (n/2) log 4πσ + n/2
};
NashEntropy nash_entropy(const MetricModel& m, const Field& u, double sigma);

/// Expander entropy ∫[σ(|∇f₊|² + R) - f₊ + n] u dv. Evaluated as
/// σF + N + (n/2) log 4πσ + n, so the decomposition holds to round-off.
double W_plus(const MetricModel& m, const Field& u, double sigma);
/// The same entropy written as ∫[σ(2Δf₊ - |∇f₊|² + R) - f₊ + n] u dv.
/// Agrees with W_plus up to the discretization error of the grid operators.
double W_plus_pointwise(const MetricModel& m, const Field& u, double sigma);

/// ∫ 2σu|Rc + ∇²f₊ + g/2σ|² dv; zero exactly on expanders with vertex offset σ.
double expander_residual_rhs(const MetricModel& m, const Field& u, double sigma);

struct LambdaResult {
  double lambda = 0.0;
  double lambda_bar = 0.0;  // V^{2/n} λ
  Field ground_state;       // w with u = w² the minimizing density
  int iterations = 0;
  double residual = 0.0;
};
/// Smallest eigenvalue of -4Δ + R acting on w = √u.
LambdaResult lambda(const MetricModel& m, const ToleranceConfig& tol = {});
double lambda_bar(const MetricModel& m);

struct MuResult {
  double value = 0.0;
  Field u;  // positive unit-mass minimizer
  bool converged = false;
  double gradient_norm = 0.0;
  int iterations = 0;
};
/// inf of W₊(g, u, σ) over unit-mass u, minimized in w = √u on {∫w² dv = 1}.
/// Starts from the constant and from the λ ground state (or the given
/// start) and keeps the lower value.
MuResult mu_plus(const MetricModel& m, double sigma, const ToleranceConfig& tol = {},
                 const Field& start = {});

struct NuResult {
  bool unbounded = false;  // λ ≥ 0: μ₊ keeps growing in σ
  double value = 0.0;
  double sigma = 0.0;
  Field u;
  double lambda = 0.0;
  bool concavity_warning = false;
  int evaluations = 0;
};
/// sup over σ > 0 of μ₊(g, σ).
NuResult nu_plus(const MetricModel& m, const ToleranceConfig& tol = {});

}  // namespace rflab::entropy
