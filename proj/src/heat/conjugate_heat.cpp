#include "rflab/heat/conjugate_heat.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

#include "rflab/numerics/linalg.hpp"

namespace rflab::heat {

using geometry::ConformalTorusMetric;
using geometry::MetricModel;

namespace {

double log_gauss(double sigma, int n) { return 0.5 * n * std::log(4.0 * std::numbers::pi * sigma); }

double mass(const Field& u, const Field& w) { return weighted_sum(u, w); }

Field uniform_density(const MetricModel& m) {
  return Field(geometry::field_size(m), 1.0 / geometry::volume(m));
}

}  // namespace

DensityState make_state(double t, Field u, double sigma, int n) {
  if (!(sigma > 0.0)) throw std::invalid_argument("density state: sigma must be positive");
  DensityState s;
  s.t = t;
  s.sigma = sigma;
  s.f_plus.resize(u.size());
  const double c = log_gauss(sigma, n);
  for (std::size_t k = 0; k < u.size(); ++k) {
    if (!(u[k] > 0.0)) throw NumericalError("density state: u must be positive");
    s.f_plus[k] = -std::log(u[k]) - c;
  }
  s.u = std::move(u);
  return s;
}

Field density_from_potential(const Field& f_plus, double sigma, int n) {
  const double c = log_gauss(sigma, n);
  Field u(f_plus.size());
  for (std::size_t k = 0; k < u.size(); ++k) u[k] = std::exp(-f_plus[k] - c);
  return u;
}

std::vector<DensityState> solve_conjugate_backward(const flow::FlowHistory& h, double t_final,
                                                   const Field& u_final, double t_stop,
                                                   const BackwardOptions& options) {
  if (!(t_final > t_stop)) throw std::invalid_argument("conjugate solve: require t_final > t_stop");
  const MetricModel m_final = h.metric(t_final);
  (void)h.metric(t_stop);
  if (u_final.size() != geometry::field_size(m_final)) {
    throw std::invalid_argument("conjugate solve: final data does not match the model");
  }
  for (double v : u_final) {
    if (!(v > 0.0)) throw std::invalid_argument("conjugate solve: final data must be positive");
  }
  const int n = h.dimension();
  const bool torus = h.kind() == geometry::ModelKind::ConformalTorus;
  const double span = t_final - t_stop;

  double dt = options.dt > 0.0 ? options.dt : (torus ? h.native_step() : span);
  long steps = std::max(1L, std::lround(span / dt));
  if (std::abs(static_cast<double>(steps) * dt - span) > 1e-9 * span) {
    steps = std::max(1L, static_cast<long>(std::ceil(span / dt)));
  }
  dt = span / static_cast<double>(steps);
  auto time_of = [&](long k) { return k == steps ? t_stop : t_final - static_cast<double>(k) * dt; };

  std::set<long> keep{0, steps};
  for (double t : options.keep_times) {
    if (t < t_stop - 0.5 * dt || t > t_final + 0.5 * dt) {
      throw std::invalid_argument("conjugate solve: keep time outside the window");
    }
    keep.insert(std::clamp(std::lround((t_final - t) / dt), 0L, steps));
  }
  auto retained = [&](long k) {
    if (keep.count(k)) return true;
    if (options.keep_every <= 0 || k % options.keep_every != 0) return false;
    const double t = time_of(k);
    return t >= options.keep_from && t <= options.keep_to;
  };
  auto emit = [&](std::vector<DensityState>& out, long k, Field u) {
    const double t = time_of(k);
    out.push_back(make_state(t, std::move(u), t - options.birth_time, n));
  };

  std::vector<DensityState> out;
  if (!torus) {
    // spatially constant densities stay 1/V(t) under the conjugate equation
    for (long k = 0; k <= steps; ++k) {
      if (!retained(k)) continue;
      emit(out, k, uniform_density(h.metric(time_of(k))));
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

  const auto& grid = std::get<ConformalTorusMetric>(m_final).grid;
  const std::size_t np = grid.size();
  Field phi, rate, phi_next;
  h.parameters(t_final, phi, rate);
  Field u = u_final;
  {
    const double mfin = mass(u, geometry::measure(m_final));
    if (std::abs(mfin - 1.0) > 1e-6) {
      throw std::invalid_argument("conjugate solve: final data must have unit mass");
    }
    for (double& v : u) v /= mfin;
  }
  if (retained(0)) emit(out, 0, u);

  Field diag(np), rhs(np), lap(np), next(np), w(np);
  const numerics::LinearOperator op = [&](std::span<const double> x, std::span<double> y) {
    grid.laplacian(x, lap);
    for (std::size_t i = 0; i < np; ++i) y[i] = diag[i] * x[i] - 0.5 * dt * lap[i];
  };
  const double area = grid.cell_area();
  for (long k = 1; k <= steps; ++k) {
    const double t = time_of(k);
    h.parameters(t, phi_next, rate);
    grid.laplacian(u, lap);
    for (std::size_t i = 0; i < np; ++i) {
      rhs[i] = std::exp(2.0 * phi[i]) * u[i] + 0.5 * dt * lap[i];
      diag[i] = std::exp(2.0 * phi_next[i]);
    }
    next = u;
    const auto cg = numerics::conjugate_gradient(op, rhs, next, {}, 1e-14, 1000);
    if (!cg.converged && cg.residual > 1e-10) {
      std::ostringstream os;
      os << "conjugate solve: linear solve stalled at t=" << t << " (residual " << cg.residual
         << ")";
      throw NumericalError(os.str());
    }
    double mtot = 0.0;
    for (std::size_t i = 0; i < np; ++i) {
      w[i] = diag[i] * area;
      mtot += w[i] * next[i];
    }
    for (std::size_t i = 0; i < np; ++i) {
      next[i] /= mtot;
      if (!(next[i] > 0.0)) {
        std::ostringstream os;
        os << "conjugate solve: positivity lost at step " << k << " (t=" << t << ")";
        throw NumericalError(os.str());
      }
    }
    u.swap(next);
    phi.swap(phi_next);
    if (retained(k)) emit(out, k, u);
  }
  std::reverse(out.begin(), out.end());
  return out;
}

ImmortalDensity construct_immortal_density(const flow::FlowHistory& h,
                                           std::pair<double, double> window,
                                           const ImmortalOptions& options) {
  auto [ta, tb] = window;
  if (!(tb >= ta) || ta < h.t_begin()) throw std::invalid_argument("immortal density: bad window");
  const double step = h.native_step();
  auto snap = [&](double t) {
    if (!(step > 0.0)) return t;
    return h.t_begin() + std::round((t - h.t_begin()) / step) * step;
  };
  std::vector<double> samples = options.sample_times;
  if (samples.empty()) samples = {ta, 0.5 * (ta + tb), tb};
  for (double& s : samples) s = snap(s);
  std::sort(samples.begin(), samples.end());
  samples.erase(std::unique(samples.begin(), samples.end()), samples.end());
  const double t_lo = samples.front();

  ImmortalDensity out;
  out.window = {ta, tb};
  double ti = options.first_final_time > 0.0 ? options.first_final_time : 2.0 * tb;
  const double slack = 1e-12 * std::max(1.0, h.t_end());
  std::vector<DensityState> prev;
  while (snap(ti) <= h.t_end() + slack) {
    const double tf = std::min(snap(ti), h.t_end());
    // final times must lie beyond every sample
    if (!(tf > t_lo) || tf < samples.back()) {
      ti *= options.growth;
      continue;
    }
    const Field uf = uniform_density(h.metric(tf));
    BackwardOptions bo;
    bo.keep_times = samples;
    bo.birth_time = options.birth_time;
    auto all = solve_conjugate_backward(h, tf, uf, t_lo, bo);
    std::vector<DensityState> cur;
    for (auto& s : all) {
      for (double ts : samples) {
        if (std::abs(s.t - ts) <= 1e-9 * std::max(1.0, std::abs(ts))) {
          cur.push_back(std::move(s));
          break;
        }
      }
    }
    out.construction_tail = tf;
    if (!prev.empty() && prev.size() == cur.size()) {
      double gap = 0.0;
      for (std::size_t k = 0; k < cur.size(); ++k) {
        for (std::size_t i = 0; i < cur[k].u.size(); ++i) {
          gap = std::max(gap, std::abs(cur[k].u[i] - prev[k].u[i]));
        }
      }
      out.gap_history.push_back(gap);
      out.cauchy_gap = gap;
      if (gap < options.tol) {
        out.converged = true;
        out.states = std::move(cur);
        return out;
      }
    }
    prev = std::move(cur);
    ti *= options.growth;
  }
  out.states = std::move(prev);
  out.converged = false;
  return out;
}

VPlus v_plus(const DensityState& s, const flow::FlowHistory& h, double birth_time) {
  const double sigma = s.t - birth_time;
  if (!(sigma > 0.0)) throw std::invalid_argument("v_plus: require t > T");
  const MetricModel m = h.metric(s.t);
  const int n = geometry::dimension(m);
  const auto curv = geometry::curvature(m);
  const Field f = make_state(s.t, s.u, sigma, n).f_plus;
  const Field lap = geometry::laplacian(m, f);
  const Field g2 = geometry::gradient_norm_sq(m, f);
  VPlus out;
  out.v.resize(s.u.size());
  for (std::size_t k = 0; k < s.u.size(); ++k) {
    out.v[k] = (sigma * (2.0 * lap[k] - g2[k] + curv.scalar[k]) - f[k] + n) * s.u[k];
  }
  out.integral = weighted_sum(out.v, geometry::measure(m));
  return out;
}

Field central_time_derivative(const std::vector<Field>& samples, double step) {
  const std::size_t n = samples.front().size();
  Field d(n);
  if (samples.size() == 3) {
    for (std::size_t i = 0; i < n; ++i) d[i] = (samples[2][i] - samples[0][i]) / (2.0 * step);
  } else if (samples.size() == 5) {
    for (std::size_t i = 0; i < n; ++i) {
      d[i] = (samples[0][i] - 8.0 * samples[1][i] + 8.0 * samples[3][i] - samples[4][i]) /
             (12.0 * step);
    }
  } else {
    throw std::invalid_argument("central_time_derivative: need 3 or 5 samples");
  }
  return d;
}

namespace {

struct Window {
  double step = 0.0;
  std::size_t mid = 0;
};

Window check_window(const std::vector<DensityState>& states) {
  if (states.size() != 3 && states.size() != 5) {
    throw std::invalid_argument("identity check: need 3 or 5 consecutive states");
  }
  Window w;
  w.step = states[1].t - states[0].t;
  for (std::size_t k = 1; k < states.size(); ++k) {
    const double d = states[k].t - states[k - 1].t;
    if (!(w.step > 0.0) || std::abs(d - w.step) > 1e-6 * w.step) {
      throw std::invalid_argument("identity check: states must be equally spaced in time");
    }
  }
  w.mid = states.size() / 2;
  return w;
}

ResidualReport finish(std::string name, const Field& lhs, const Field& rhs, double t, double tol) {
  ResidualReport r;
  r.check = std::move(name);
  r.time = t;
  r.tol = tol;
  r.min_rhs = rhs.empty() ? 0.0 : rhs[0];
  for (std::size_t i = 0; i < lhs.size(); ++i) {
    r.max_residual = std::max(r.max_residual, std::abs(lhs[i] - rhs[i]));
    r.max_lhs = std::max(r.max_lhs, std::abs(lhs[i]));
    r.min_rhs = std::min(r.min_rhs, rhs[i]);
  }
  r.ok = r.max_residual <= tol;
  return r;
}

// V = 2Δf - |∇f|² + R for the potential f on metric m.
Field harnack_v(const MetricModel& m, const geometry::CurvatureData& c, const Field& f) {
  const Field lap = geometry::laplacian(m, f);
  const Field g2 = geometry::gradient_norm_sq(m, f);
  Field v(f.size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = 2.0 * lap[k] - g2[k] + c.scalar[k];
  return v;
}

Field steady_potential(const Field& u) {
  Field f(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) f[k] = -std::log(u[k]);
  return f;
}

}  // namespace

ResidualReport check_harnack_identity(const std::vector<DensityState>& states,
                                      const flow::FlowHistory& h, double birth_time,
                                      double tol) {
  const Window w = check_window(states);
  std::vector<Field> vs;
  for (const auto& s : states) vs.push_back(v_plus(s, h, birth_time).v);
  const Field dv = central_time_derivative(vs, w.step);
  const auto& sc = states[w.mid];
  const MetricModel m = h.metric(sc.t);
  const auto curv = geometry::curvature(m);
  const Field lap = geometry::laplacian(m, vs[w.mid]);
  const double sigma = sc.t - birth_time;
  const Field sol = geometry::soliton_norm_sq(m, curv, sc.f_plus, 0.5 / sigma);
  Field lhs(dv.size()), rhs(dv.size());
  for (std::size_t k = 0; k < dv.size(); ++k) {
    lhs[k] = dv[k] + lap[k] - curv.scalar[k] * vs[w.mid][k];
    rhs[k] = 2.0 * sigma * sc.u[k] * sol[k];
  }
  return finish("harnack", lhs, rhs, sc.t, tol);
}

ResidualReport check_v_identity(const std::vector<DensityState>& states,
                                const flow::FlowHistory& h, double tol) {
  const Window w = check_window(states);
  std::vector<Field> vs;
  for (const auto& s : states) {
    const MetricModel m = h.metric(s.t);
    vs.push_back(harnack_v(m, geometry::curvature(m), s.f_plus));
  }
  const Field dv = central_time_derivative(vs, w.step);
  const auto& sc = states[w.mid];
  const MetricModel m = h.metric(sc.t);
  const auto curv = geometry::curvature(m);
  const Field lap = geometry::laplacian(m, vs[w.mid]);
  const Field sol = geometry::soliton_norm_sq(m, curv, sc.f_plus, 0.0);
  const Field cross = geometry::gradient_dot(m, vs[w.mid], sc.f_plus);
  Field lhs(dv.size()), rhs(dv.size());
  for (std::size_t k = 0; k < dv.size(); ++k) {
    lhs[k] = dv[k] + lap[k];
    rhs[k] = 2.0 * sol[k] + 2.0 * cross[k];
  }
  auto r = finish("v_identity", lhs, rhs, sc.t, tol);
  r.min_rhs = 0.0;  // the cross term has no sign
  return r;
}

ResidualReport check_steady_harnack(const std::vector<DensityState>& states,
                                    const flow::FlowHistory& h, double tol) {
  const Window w = check_window(states);
  std::vector<Field> vs;
  for (const auto& s : states) {
    const MetricModel m = h.metric(s.t);
    const Field f = steady_potential(s.u);
    Field v = harnack_v(m, geometry::curvature(m), f);
    for (std::size_t k = 0; k < v.size(); ++k) v[k] *= s.u[k];
    vs.push_back(std::move(v));
  }
  const Field dv = central_time_derivative(vs, w.step);
  const auto& sc = states[w.mid];
  const MetricModel m = h.metric(sc.t);
  const auto curv = geometry::curvature(m);
  const Field lap = geometry::laplacian(m, vs[w.mid]);
  const Field sol = geometry::soliton_norm_sq(m, curv, steady_potential(sc.u), 0.0);
  Field lhs(dv.size()), rhs(dv.size());
  for (std::size_t k = 0; k < dv.size(); ++k) {
    lhs[k] = dv[k] + lap[k] - curv.scalar[k] * vs[w.mid][k];
    rhs[k] = 2.0 * sc.u[k] * sol[k];
  }
  return finish("steady_harnack", lhs, rhs, sc.t, tol);
}

ResidualReport check_f_plus_evolution(const std::vector<DensityState>& states,
                                      const flow::FlowHistory& h, double birth_time,
                                      double tol) {
  const Window w = check_window(states);
  const int n = h.dimension();
  std::vector<Field> fs;
  for (const auto& s : states) {
    // recompute with σ = t - T so the potential matches the identity being tested
    fs.push_back(make_state(s.t, s.u, s.t - birth_time, n).f_plus);
  }
  const Field df = central_time_derivative(fs, w.step);
  const auto& sc = states[w.mid];
  const MetricModel m = h.metric(sc.t);
  const auto curv = geometry::curvature(m);
  const Field& f = fs[w.mid];
  const Field lap = geometry::laplacian(m, f);
  const Field g2 = geometry::gradient_norm_sq(m, f);
  const double sigma = sc.t - birth_time;
  Field rhs(df.size());
  for (std::size_t k = 0; k < df.size(); ++k) {
    rhs[k] = -lap[k] + g2[k] - curv.scalar[k] - 0.5 * n / sigma;
  }
  auto r = finish("f_plus_evolution", df, rhs, sc.t, tol);
  r.min_rhs = 0.0;
  return r;
}

}  // namespace rflab::heat
