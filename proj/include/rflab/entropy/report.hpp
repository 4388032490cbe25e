#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "rflab/flow/flow.hpp"
#include "rflab/heat/conjugate_heat.hpp"

namespace rflab::entropy {

/// Unit-mass conjugate heat density at a given time.
using DensityProvider = std::function<Field(double t)>;

/// u = 1/V(t); the immortal density on homogeneous and model flows.
DensityProvider uniform_density(const flow::FlowHistory& h);
/// Looks states up by time (to 1e-9 relative); throws std::out_of_range
/// for times that were not retained.
DensityProvider sampled_density(std::vector<heat::DensityState> states);

struct EntropyRow {
  double t = 0.0;
  double sigma = 0.0;
  double F = 0.0;
  double F_plus = 0.0;  // F + n/2σ
  double N = 0.0;
  double N_plus = 0.0;
  double W_plus = 0.0;
  double dW_dt = 0.0;  // centered difference between neighbouring rows (one-sided at the ends)
  double rhs = 0.0;    // ∫ 2σu|Rc + ∇²f₊ + g/2σ|² dv
  double lambda = 0.0;
  double lambda_bar = 0.0;
  double v_tilde = 0.0;  // V/t^{n/2}, 0 when t ≤ 0
};

struct Verdict {
  std::string check;
  bool ok = true;
  double worst = 0.0;  // smallest margin (negative when violated)
  double tol = 0.0;
};

struct EntropyOptions {
  double birth_time = 0.0;  // σ = t - birth_time
  double tol = 1e-8;
  bool with_lambda = true;
};

struct EntropyReport {
  std::vector<EntropyRow> rows;
  std::vector<Verdict> verdicts;
  [[nodiscard]] bool all_ok() const;
  [[nodiscard]] const Verdict& verdict(const std::string& check) const;
};

/// Rows at the given increasing times, with verdicts: W₊, N₊ and λ̄
/// nondecreasing, Ṽ nonincreasing, -n/2t ≤ F ≤ 0, F₊ ≥ 0 and
/// dF/dt ≥ (2/n)F² (difference quotients), W₊ = σF₊ + N₊.
EntropyReport entropy_report(const flow::FlowHistory& h, const DensityProvider& density,
                             const std::vector<double>& times, const EntropyOptions& options = {});

struct DerivativePoint {
  double t = 0.0;
  double fd = 0.0;   // five-point difference of W₊
  double rhs = 0.0;  // the monotonicity integrand at t
};
struct DerivativeCheck {
  std::vector<DerivativePoint> points;
  double max_residual = 0.0;
  double tol = 0.0;
  bool ok = false;
};
/// |dW₊/dt - ∫2σu|Rc + ∇²f₊ + g/2σ|²| at each time with step δ.
/// flip_rhs_sign negates the right-hand side (a negative control).
DerivativeCheck check_entropy_derivative(const flow::FlowHistory& h, const DensityProvider& density,
                                         const std::vector<double>& times, double step,
                                         double birth_time, double tol, bool flip_rhs_sign = false);

/// y ≈ limit + a/t + b/t² by least squares.
struct TailFit {
  double limit = 0.0;
  double a = 0.0;
  double b = 0.0;
  double rms = 0.0;
};
TailFit fit_tail(const std::vector<double>& t, const std::vector<double>& y);

struct AsymptoticsReport {
  std::vector<EntropyRow> rows;  // last decade of [t_end/10, t_end]
  double volume_exponent = 0.0;  // d log Ṽ / d log t over the decade
  bool collapsing = false;       // Ṽ∞ = 0
  double v_tilde_limit = 0.0;
  TailFit w_plus;
  TailFit lambda_bar;
  TailFit t_lambda;
  double w_plus_predicted = 0.0;  // -log Ṽ∞ + (n/2)(1 + log 4π), +∞ when collapsing
  double lambda_bar_predicted = 0.0;
  double t_lambda_predicted = 0.0;
};
/// Tail fits of W₊ (σ = t), λ̄ and tλ over the last decade before t_end.
AsymptoticsReport asymptotics_report(const flow::FlowHistory& h, const DensityProvider& density,
                                     double t_end, int samples = 21);

struct RescaledIntegral {
  std::vector<double> log_times;
  std::vector<double> integrand;  // t²∫u|Rc + ∇²f₊ + g/2t|² dv
  double integral = 0.0;          // over log t
  double decay_exponent = 0.0;    // slope of log(integrand) vs log t at the tail
};
/// Space-time integral of the rescaled soliton defect in the log-time
/// variable over [t_lo, t_hi] (composite Simpson, odd sample count).
RescaledIntegral rescaled_defect_integral(const flow::FlowHistory& h, const DensityProvider& density,
                                          std::pair<double, double> t_range, int samples = 65);

}  // namespace rflab::entropy
