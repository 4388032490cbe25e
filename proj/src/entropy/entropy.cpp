#include "rflab/entropy/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "rflab/numerics/eigen.hpp"
#include "rflab/numerics/linalg.hpp"
#include "rflab/numerics/optimize.hpp"

namespace rflab::entropy {

using geometry::ConformalTorusMetric;

namespace {

constexpr double kFourPi = 4.0 * std::numbers::pi;

void require_density(const MetricModel& m, const Field& u, const char* who) {
  if (u.size() != geometry::field_size(m)) {
    throw std::invalid_argument(std::string(who) + ": density does not match the model");
  }
  for (double v : u) {
    if (!(v > 0.0)) throw std::invalid_argument(std::string(who) + ": density must be positive");
  }
  const double mass = weighted_sum(u, geometry::measure(m));
  if (std::abs(mass - 1.0) > 1e-8) {
    throw std::invalid_argument(std::string(who) + ": density must have unit mass");
  }
}

void require_sigma(double sigma, const char* who) {
  if (!(sigma > 0.0)) throw std::invalid_argument(std::string(who) + ": sigma must be positive");
}

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

// -Δ_g w, the operator part of -4Δ + R
Field minus_laplacian(const MetricModel& m, const Field& w) {
  Field out = geometry::laplacian(m, w);
  for (double& v : out) v = -v;
  return out;
}

double constant_mu(const MetricModel& m, double sigma) {
  const int n = geometry::dimension(m);
  const double R = geometry::curvature(m).scalar[0];
  return sigma * R - std::log(geometry::volume(m)) + 0.5 * n * std::log(kFourPi * sigma) + n;
}

}  // namespace

double dirichlet_energy(const MetricModel& m, const Field& w) {
  if (const auto* t = std::get_if<ConformalTorusMetric>(&m)) {
    Field e(w.size());
    t->grid.edge_gradient_sq(w, e);
    return ordered_sum(e) * t->grid.cell_area();
  }
  return 0.0;
}

double F_functional(const MetricModel& m, const Field& u) {
  require_density(m, u, "F_functional");
  Field w(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) w[k] = std::sqrt(u[k]);
  const auto curv = geometry::curvature(m);
  Field ru(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) ru[k] = curv.scalar[k] * u[k];
  return 4.0 * dirichlet_energy(m, w) + weighted_sum(ru, geometry::measure(m));
}

NashEntropy nash_entropy(const MetricModel& m, const Field& u, double sigma) {
  require_density(m, u, "nash_entropy");
  require_sigma(sigma, "nash_entropy");
  const int n = geometry::dimension(m);
  Field ulogu(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) ulogu[k] = xlogx(u[k]);
  NashEntropy out;
  out.N = weighted_sum(ulogu, geometry::measure(m));
  out.N_plus = out.N + 0.5 * n * std::log(kFourPi * sigma) + 0.5 * n;
  return out;
}

double W_plus(const MetricModel& m, const Field& u, double sigma) {
  const int n = geometry::dimension(m);
  const double F = F_functional(m, u);
  const auto N = nash_entropy(m, u, sigma);
  return sigma * F + N.N + 0.5 * n * std::log(kFourPi * sigma) + n;
}

double W_plus_pointwise(const MetricModel& m, const Field& u, double sigma) {
  require_density(m, u, "W_plus_pointwise");
  require_sigma(sigma, "W_plus_pointwise");
  const int n = geometry::dimension(m);
  const double c = 0.5 * n * std::log(kFourPi * sigma);
  Field f(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) f[k] = -std::log(u[k]) - c;
  const Field lap = geometry::laplacian(m, f);
  const Field g2 = geometry::gradient_norm_sq(m, f);
  const auto curv = geometry::curvature(m);
  Field v(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) {
    v[k] = (sigma * (2.0 * lap[k] - g2[k] + curv.scalar[k]) - f[k] + n) * u[k];
  }
  return weighted_sum(v, geometry::measure(m));
}

double expander_residual_rhs(const MetricModel& m, const Field& u, double sigma) {
  require_density(m, u, "expander_residual_rhs");
  require_sigma(sigma, "expander_residual_rhs");
  const int n = geometry::dimension(m);
  const double c = 0.5 * n * std::log(kFourPi * sigma);
  Field f(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) f[k] = -std::log(u[k]) - c;
  const auto curv = geometry::curvature(m);
  Field s = geometry::soliton_norm_sq(m, curv, f, 0.5 / sigma);
  for (std::size_t k = 0; k < s.size(); ++k) s[k] *= 2.0 * sigma * u[k];
  return weighted_sum(s, geometry::measure(m));
}

LambdaResult lambda(const MetricModel& m, const ToleranceConfig& tol) {
  geometry::validate(m);
  const auto curv = geometry::curvature(m);
  const int n = geometry::dimension(m);
  const double V = geometry::volume(m);
  LambdaResult out;
  if (!std::holds_alternative<ConformalTorusMetric>(m)) {
    // constants are the only fields: the quotient is R itself
    out.lambda = curv.scalar[0];
    out.ground_state = {1.0 / std::sqrt(V)};
  } else {
    const Field mu = geometry::measure(m);
    const Field& R = curv.scalar;
    const numerics::LinearOperator op = [&](std::span<const double> x, std::span<double> y) {
      const Field xf(x.begin(), x.end());
      const Field lap = geometry::laplacian(m, xf);
      for (std::size_t k = 0; k < x.size(); ++k) y[k] = -4.0 * lap[k] + R[k] * x[k];
    };
    const auto eig = numerics::smallest_eigenpair(op, mu, *std::min_element(R.begin(), R.end()), tol);
    out.lambda = eig.value;
    out.ground_state = eig.vector;
    out.iterations = eig.iterations;
    out.residual = eig.residual;
  }
  out.lambda_bar = std::pow(V, 2.0 / n) * out.lambda;
  return out;
}

double lambda_bar(const MetricModel& m) { return lambda(m).lambda_bar; }

MuResult mu_plus(const MetricModel& m, double sigma, const ToleranceConfig& tol,
                 const Field& start) {
  require_sigma(sigma, "mu_plus");
  geometry::validate(m);
  tol.validate();
  MuResult out;
  const double V = geometry::volume(m);
  if (!std::holds_alternative<ConformalTorusMetric>(m)) {
    out.value = constant_mu(m, sigma);
    out.u = {1.0 / V};
    out.converged = true;
    return out;
  }

  const int n = geometry::dimension(m);
  const Field mu = geometry::measure(m);
  const Field R = geometry::curvature(m).scalar;
  const double shift = 0.5 * n * std::log(kFourPi * sigma) + n;
  const std::size_t np = mu.size();

  numerics::ConstrainedProblem p;
  p.inner = [&](const Field& a, const Field& b) { return numerics::weighted_dot(a, b, mu); };
  p.normalize = [&](const Field& w) {
    Field x = w;
    const double nrm = std::sqrt(numerics::weighted_dot(x, x, mu));
    for (double& v : x) v /= nrm;
    return x;
  };
  p.functional = [&](const Field& w) {
    Field dens(np);
    for (std::size_t k = 0; k < np; ++k) {
      const double u = w[k] * w[k];
      dens[k] = sigma * R[k] * u + xlogx(u);
    }
    return sigma * 4.0 * dirichlet_energy(m, w) + weighted_sum(dens, mu) + shift;
  };
  Field last_w;  // iterate whose gradient is being preconditioned
  p.gradient = [&](const Field& w) {
    last_w = w;
    Field g = minus_laplacian(m, w);
    for (std::size_t k = 0; k < np; ++k) {
      const double u = w[k] * w[k];
      const double ent = u > 0.0 ? 2.0 * w[k] * (std::log(u) + 1.0) : 0.0;
      g[k] = sigma * (8.0 * g[k] + 2.0 * R[k] * w[k]) + ent;
    }
    return g;
  };
  // Newton-type preconditioner: the Hessian on the sphere,
  // 8σ(-Δ) + 2σR + 2 log w² + 6 - ν with ν = ⟨G, w⟩ the multiplier. It is
  // positive definite near the minimizer (strict convexity in u); away from
  // it a constant-coefficient Sobolev solve is the fallback.
  const double c0 = std::max(1.0, 2.0 * (std::log(1.0 / V) + 3.0) +
                                      2.0 * sigma * *std::min_element(R.begin(), R.end()));
  p.precondition = [&](const Field& g) {
    const Field grad = p.gradient(last_w);
    const double nu = numerics::weighted_dot(grad, last_w, mu);
    Field diag(np);
    for (std::size_t k = 0; k < np; ++k) {
      const double u = std::max(last_w[k] * last_w[k], 1e-300);
      diag[k] = 2.0 * sigma * R[k] + 2.0 * std::log(u) + 6.0 - nu;
    }
    auto solve = [&](const Field& dg) {
      const numerics::LinearOperator op = [&](std::span<const double> x, std::span<double> y) {
        const Field lap = minus_laplacian(m, Field(x.begin(), x.end()));
        for (std::size_t k = 0; k < np; ++k) y[k] = 8.0 * sigma * lap[k] + dg[k] * x[k];
      };
      Field d(np, 0.0);
      const auto cg = numerics::conjugate_gradient(op, g, d, mu, 1e-10, 2000);
      return std::make_pair(d, cg.converged);
    };
    auto [d, ok] = solve(diag);
    if (!ok || !(numerics::weighted_dot(d, g, mu) > 0.0)) {
      d = solve(Field(np, c0)).first;
    }
    return d;
  };

  std::vector<Field> starts;
  if (!start.empty()) {
    if (start.size() != np) throw std::invalid_argument("mu_plus: start does not match the model");
    Field w(np);
    for (std::size_t k = 0; k < np; ++k) w[k] = std::sqrt(std::abs(start[k]));
    starts.push_back(std::move(w));
  } else {
    starts.push_back(Field(np, 1.0));
    starts.push_back(lambda(m).ground_state);
  }

  bool have = false;
  for (const auto& w0 : starts) {
    const auto r = numerics::minimize_constrained(p, w0, tol);
    if (!have || r.value < out.value) {
      have = true;
      out.value = r.value;
      out.converged = r.converged;
      out.gradient_norm = r.gradient_norm;
      out.iterations = r.iterations;
      out.u.resize(np);
      for (std::size_t k = 0; k < np; ++k) out.u[k] = r.minimizer[k] * r.minimizer[k];
    }
  }
  for (double v : out.u) {
    if (!(v > 0.0)) throw NumericalError("mu_plus: minimizer is not positive");
  }
  const double mass = weighted_sum(out.u, mu);
  for (double& v : out.u) v /= mass;
  return out;
}

NuResult nu_plus(const MetricModel& m, const ToleranceConfig& tol) {
  const int n = geometry::dimension(m);
  NuResult out;
  out.lambda = lambda(m).lambda;
  if (out.lambda >= -1e-12) {
    out.unbounded = true;
    return out;
  }
  // for constant curvature the maximum sits at σ = n / 2|λ|
  const double s0 = 0.5 * n / -out.lambda;
  ToleranceConfig inner = tol;
  ToleranceConfig outer = tol;
  outer.abs_tol = 1e-6 * s0;
  Field warm;
  auto f = [&](double s) {
    auto r = mu_plus(m, s, inner, warm);
    if (std::holds_alternative<ConformalTorusMetric>(m)) warm = r.u;
    return r.value;
  };
  const auto best = numerics::maximize_concave_1d(f, {0.25 * s0, 4.0 * s0}, outer);
  out.evaluations = best.evaluations;
  out.concavity_warning = best.concavity_warning;
  if (best.unbounded) {
    out.unbounded = true;
    return out;
  }
  out.sigma = best.argmax;
  const auto r = mu_plus(m, best.argmax, inner);
  out.value = r.value;
  out.u = r.u;
  return out;
}

}  // namespace rflab::entropy
