#include "rflab/flow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "rflab/numerics/linalg.hpp"

namespace rflab::flow {

using geometry::ConformalTorusMetric;
using geometry::Grid2;
using geometry::HomogeneousMetric;
using geometry::ModelSpaceMetric;

struct FlowHistory::Data {
  ModelKind kind = ModelKind::ModelSpace;
  int n = 3;
  double t0 = 0.0;
  double t1 = 0.0;
  bool extinct = false;
  double birth = 0.0;

  HomogeneousMetric homogeneous;
  numerics::OdeTrajectory trajectory;

  Grid2 grid;
  std::vector<double> times;
  std::vector<Field> phi;
  std::vector<Field> phi_rate;
  double dt = 0.0;

  ModelSpaceMetric model;  // scale holds a(t0)
};

namespace {

Field torus_rate(const Grid2& g, const Field& phi) {
  Field r = g.laplacian(phi);
  for (std::size_t k = 0; k < r.size(); ++k) r[k] *= std::exp(-2.0 * phi[k]);
  return r;
}

// One implicit trapezoidal step for the area density w = e^{2φ}, which obeys
// w_t = Δ₀ log w = 2Δ₀φ. Stepping w rather than φ keeps Σ w (the area) fixed
// to solver precision. The implicit equation
//   e^{2φ} - dt Δ₀φ = e^{2φⁿ} + dt Δ₀φⁿ
// is solved by Newton's method; every linearization is the SPD system
// (2e^{2φ*} - dt Δ₀) δ = residual.
Field torus_step(const Grid2& g, const Field& phi, const Field& rate, const Field& rate_prev,
                 double dt) {
  const std::size_t n = phi.size();
  Field rhs(n), guess(n), diag(n), res(n), lap(n), delta(n);
  g.laplacian(phi, lap);
  for (std::size_t k = 0; k < n; ++k) {
    rhs[k] = std::exp(2.0 * phi[k]) + dt * lap[k];
    // second-order predictor from the previous rate when there is one
    const double accel = rate_prev.empty() ? 0.0 : rate[k] - rate_prev[k];
    guess[k] = phi[k] + dt * rate[k] + 0.5 * dt * accel;
  }
  Field lap_x(n);
  const numerics::LinearOperator op = [&](std::span<const double> x, std::span<double> y) {
    g.laplacian(x, lap_x);
    for (std::size_t k = 0; k < n; ++k) y[k] = diag[k] * x[k] - dt * lap_x[k];
  };
  const double scale = 1.0 + max_abs(phi);
  std::vector<double> history;
  for (int it = 0; it < 30; ++it) {
    g.laplacian(guess, lap);
    for (std::size_t k = 0; k < n; ++k) {
      const double e = std::exp(2.0 * guess[k]);
      res[k] = rhs[k] - (e - dt * lap[k]);
      diag[k] = 2.0 * e;
    }
    std::fill(delta.begin(), delta.end(), 0.0);
    (void)numerics::conjugate_gradient(op, res, delta, {}, 1e-14, 500);
    const double change = max_abs(delta);
    for (std::size_t k = 0; k < n; ++k) guess[k] += delta[k];
    history.push_back(change);
    // quadratic convergence: the error left after a correction of size c is O(c²)
    if (change <= 1e-8 * scale) return guess;
  }
  throw ConvergenceError("torus flow: Newton iteration did not settle", history);
}

double src_time(double t, double alpha) { return t * alpha; }

}  // namespace

void FlowHistory::require_time(double t) const {
  const double lo = t_begin(), hi = t_end();
  const double slack = 1e-12 * std::max(1.0, std::abs(hi));
  if (t < lo - slack || t > hi + slack) {
    std::ostringstream os;
    os << "flow history: time " << t << " outside [" << lo << ", " << hi << "]";
    throw std::out_of_range(os.str());
  }
}

ModelKind FlowHistory::kind() const { return data_->kind; }
int FlowHistory::dimension() const { return data_->n; }
double FlowHistory::t_begin() const { return data_->t0 / alpha_; }
double FlowHistory::t_end() const { return data_->t1 / alpha_; }
double FlowHistory::birth_time() const { return data_->birth / alpha_; }
bool FlowHistory::extinct() const { return data_->extinct; }
double FlowHistory::extinction_time() const { return data_->t1 / alpha_; }
double FlowHistory::native_step() const { return data_->dt / alpha_; }

std::vector<double> FlowHistory::snapshot_times() const {
  std::vector<double> out;
  switch (data_->kind) {
    case ModelKind::Homogeneous:
      out = data_->trajectory.t;
      break;
    case ModelKind::ConformalTorus:
      out = data_->times;
      break;
    case ModelKind::ModelSpace: {
      const int m = 64;
      for (int k = 0; k <= m; ++k) out.push_back(data_->t0 + (data_->t1 - data_->t0) * k / m);
      break;
    }
  }
  for (double& t : out) t /= alpha_;
  return out;
}

void FlowHistory::parameters(double t, Field& value, Field& rate) const {
  require_time(t);
  const Data& d = *data_;
  const double s = std::clamp(src_time(t, alpha_), d.t0, d.t1);
  switch (d.kind) {
    case ModelKind::Homogeneous: {
      value = d.trajectory.at(s);
      HomogeneousMetric m = d.homogeneous;
      for (int i = 0; i < 3; ++i) m.diag[i] = value[i];
      const auto r = geometry::curvature_homogeneous(m).principal[0];
      rate.assign(3, 0.0);
      for (int i = 0; i < 3; ++i) {
        rate[i] = -2.0 * r[i] * value[i];
        value[i] /= alpha_;
      }
      return;
    }
    case ModelKind::ConformalTorus: {
      const auto& ts = d.times;
      auto it = std::upper_bound(ts.begin(), ts.end(), s);
      std::size_t k = it == ts.begin() ? 0 : static_cast<std::size_t>(it - ts.begin()) - 1;
      const double shift = -0.5 * std::log(alpha_);
      if (k + 1 >= ts.size() || s == ts[k]) {
        k = std::min(k, ts.size() - 1);
        value = d.phi[k];
        rate = d.phi_rate[k];
      } else {
        const std::size_t n = d.phi[k].size();
        value.resize(n);
        rate.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
          value[i] = numerics::hermite(s, ts[k], ts[k + 1], d.phi[k][i], d.phi[k + 1][i],
                                       d.phi_rate[k][i], d.phi_rate[k + 1][i]);
          rate[i] = numerics::hermite_derivative(s, ts[k], ts[k + 1], d.phi[k][i],
                                                 d.phi[k + 1][i], d.phi_rate[k][i],
                                                 d.phi_rate[k + 1][i]);
        }
      }
      if (alpha_ != 1.0) {
        for (double& v : value) v += shift;
        for (double& r : rate) r *= alpha_;
      }
      return;
    }
    case ModelKind::ModelSpace: {
      const double slope = -2.0 * d.model.unit_ricci();
      value = {(d.model.scale + slope * (s - d.t0)) / alpha_};
      rate = {slope};
      return;
    }
  }
}

MetricModel FlowHistory::metric(double t) const {
  Field value, rate;
  parameters(t, value, rate);
  const Data& d = *data_;
  switch (d.kind) {
    case ModelKind::Homogeneous: {
      HomogeneousMetric m = d.homogeneous;
      for (int i = 0; i < 3; ++i) m.diag[i] = value[i];
      return m;
    }
    case ModelKind::ConformalTorus:
      return ConformalTorusMetric{d.grid, std::move(value)};
    case ModelKind::ModelSpace: {
      ModelSpaceMetric m = d.model;
      m.scale = value[0];
      if (!(m.scale > 0.0)) throw std::out_of_range("flow history: model scale vanished");
      return m;
    }
  }
  throw std::logic_error("flow history: unknown kind");
}

CurvatureData FlowHistory::curvature(double t) const { return geometry::curvature(metric(t)); }

double FlowHistory::volume(double t) const { return geometry::volume(metric(t)); }

double FlowHistory::total_scalar(double t) const {
  const MetricModel m = metric(t);
  const auto c = geometry::curvature(m);
  return weighted_sum(c.scalar, geometry::measure(m));
}

FlowHistory FlowHistory::blowdown(double alpha) const {
  if (!(alpha > 0.0)) throw std::invalid_argument("blowdown: alpha must be positive");
  FlowHistory out = *this;
  out.alpha_ = alpha_ * alpha;
  return out;
}

FlowHistory model_space_flow(const ModelSpaceMetric& m0, double t0, double t1) {
  m0.validate();
  if (!(t1 > t0)) throw std::invalid_argument("evolve: require t1 > t0");
  auto d = std::make_shared<FlowHistory::Data>();
  d->kind = ModelKind::ModelSpace;
  d->n = m0.dimension;
  d->model = m0;
  d->t0 = t0;
  d->t1 = t1;
  const double rho = m0.unit_ricci();
  if (rho != 0.0) {
    // a(t) = a0 - 2ρ(t - t0) vanishes here
    const double zero = t0 + m0.scale / (2.0 * rho);
    if (rho < 0.0) d->birth = zero;
    if (rho > 0.0 && zero <= t1) {
      d->t1 = zero;
      d->extinct = true;
    }
  }
  FlowHistory h;
  h.data_ = std::move(d);
  return h;
}

FlowHistory evolve(const MetricModel& m0, double t0, double t1, const FlowOptions& options) {
  geometry::validate(m0);
  if (!(t1 > t0)) throw std::invalid_argument("evolve: require t1 > t0");
  if (t0 < 0.0) throw std::invalid_argument("evolve: require t0 >= 0");

  if (const auto* s = std::get_if<ModelSpaceMetric>(&m0)) {
    FlowHistory h = model_space_flow(*s, t0, t1);
    if (options.birth_time) {
      auto d = std::make_shared<FlowHistory::Data>(*h.data_);
      d->birth = *options.birth_time;
      h.data_ = std::move(d);
    }
    return h;
  }

  auto d = std::make_shared<FlowHistory::Data>();
  d->t0 = t0;
  d->birth = options.birth_time.value_or(0.0);

  if (const auto* hm = std::get_if<HomogeneousMetric>(&m0)) {
    d->kind = ModelKind::Homogeneous;
    d->n = 3;
    d->homogeneous = *hm;
    const HomogeneousMetric frame = *hm;
    const double floor = 1e-10 * std::max({hm->diag[0], hm->diag[1], hm->diag[2]});
    const numerics::OdeRhs rhs = [frame](double, std::span<const double> y,
                                         std::span<double> dy) {
      HomogeneousMetric m = frame;
      for (int i = 0; i < 3; ++i) m.diag[i] = y[i];
      if (!(y[0] > 0.0 && y[1] > 0.0 && y[2] > 0.0)) {
        for (int i = 0; i < 3; ++i) dy[i] = std::nan("");
        return;
      }
      const auto r = geometry::curvature_homogeneous(m).principal[0];
      for (int i = 0; i < 3; ++i) dy[i] = -2.0 * r[i] * y[i];
    };
    numerics::OdeOptions opt;
    opt.tol = options.tol;
    opt.stops = options.stops;
    opt.terminate = [floor](double, std::span<const double> y) {
      return std::min({y[0], y[1], y[2]}) < floor;
    };
    d->trajectory = numerics::integrate_ode(
        rhs, numerics::State(hm->diag.begin(), hm->diag.end()), t0, t1, opt);
    d->t1 = d->trajectory.t.back();
    d->extinct = !d->trajectory.ok();
    FlowHistory h;
    h.data_ = std::move(d);
    return h;
  }

  const auto& tm = std::get<ConformalTorusMetric>(m0);
  d->kind = ModelKind::ConformalTorus;
  d->n = 2;
  d->grid = tm.grid;
  const double h = std::min(tm.grid.hx(), tm.grid.hy());
  const double cap = options.torus_dt > 0.0 ? options.torus_dt : 0.5 * h * h;
  const long steps = std::max(1L, static_cast<long>(std::ceil((t1 - t0) / cap - 1e-9)));
  d->dt = (t1 - t0) / static_cast<double>(steps);
  const long stride =
      options.torus_stride > 0
          ? options.torus_stride
          : std::max(1L, static_cast<long>(std::ceil(static_cast<double>(steps) /
                                                     std::max(1, options.max_snapshots))));
  d->t1 = t1;

  Field phi = tm.phi;
  Field rate = torus_rate(tm.grid, phi);
  d->times.push_back(t0);
  d->phi.push_back(phi);
  d->phi_rate.push_back(rate);
  Field rate_prev;
  for (long k = 1; k <= steps; ++k) {
    phi = torus_step(tm.grid, phi, rate, rate_prev, d->dt);
    rate_prev.swap(rate);
    rate = torus_rate(tm.grid, phi);
    if (k % stride == 0 || k == steps) {
      d->times.push_back(k == steps ? t1 : t0 + static_cast<double>(k) * d->dt);
      d->phi.push_back(phi);
      d->phi_rate.push_back(rate);
    }
  }
  FlowHistory out;
  out.data_ = std::move(d);
  return out;
}

double scaled_volume(const FlowHistory& h, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("scaled_volume: t must be positive");
  return h.volume(t) / std::pow(t, 0.5 * h.dimension());
}

LowerBoundReport check_R_lower_bound(const FlowHistory& h, double tol) {
  LowerBoundReport rep;
  rep.tol = tol;
  bool first = true;
  for (double t : h.snapshot_times()) {
    if (!(t > 0.0)) continue;
    const auto c = h.curvature(t);
    const double rmin = *std::min_element(c.scalar.begin(), c.scalar.end());
    const double margin = rmin + 0.5 * h.dimension() / t;
    if (first || margin < rep.min_margin) {
      rep.min_margin = margin;
      rep.worst_time = t;
      first = false;
    }
  }
  rep.ok = rep.min_margin >= -tol;
  return rep;
}

std::string history_csv(const FlowHistory& h) {
  std::ostringstream os;
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  switch (h.kind()) {
    case ModelKind::Homogeneous:
      os << "t,A,B,C,V,R_min,R_max\n";
      break;
    case ModelKind::ConformalTorus:
      os << "t,phi_min,phi_max,V,R_min,R_max\n";
      break;
    case ModelKind::ModelSpace:
      os << "t,a,V,R_min,R_max\n";
      break;
  }
  for (double t : h.snapshot_times()) {
    Field value, rate;
    h.parameters(t, value, rate);
    const auto c = h.curvature(t);
    const auto [rmin, rmax] = std::minmax_element(c.scalar.begin(), c.scalar.end());
    os << num(t);
    if (h.kind() == ModelKind::ConformalTorus) {
      const auto [pmin, pmax] = std::minmax_element(value.begin(), value.end());
      os << ',' << num(*pmin) << ',' << num(*pmax);
    } else {
      for (double v : value) os << ',' << num(v);
    }
    os << ',' << num(h.volume(t)) << ',' << num(*rmin) << ',' << num(*rmax) << '\n';
  }
  return os.str();
}

}  // namespace rflab::flow
