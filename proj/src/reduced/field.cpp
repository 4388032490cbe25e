#include "rflab/reduced/field.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace rflab::reduced {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kGaussX[3] = {-0.7745966692414834, 0.0, 0.7745966692414834};
constexpr double kGaussW[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};

bool is_model(const ReducedGeometry& g) { return g.period_x() == 0.0; }

double sn(int sign, double r) {
  if (sign > 0) return std::sin(r);
  if (sign < 0) return std::sinh(r);
  return r;
}

// (n-1)·cot_k(r) ℓ′, with the r → 0 limit handled by the caller
double cot_k(int sign, double r) {
  if (sign > 0) return std::cos(r) / std::sin(r);
  if (sign < 0) return std::cosh(r) / std::sinh(r);
  return 1.0 / r;
}

double sphere_area(int n) {  // area of the unit S^{n-1}
  return 2.0 * std::pow(kPi, 0.5 * n) / std::tgamma(0.5 * n);
}

double ball_volume(int n, int sign, double r) {
  // composite Simpson; the integrand is smooth and r is O(1)
  const int m = 400;
  const double h = r / m;
  double s = 0.0;
  for (int i = 0; i <= m; ++i) {
    const double w = (i == 0 || i == m) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    s += w * std::pow(sn(sign, i * h), n - 1);
  }
  return sphere_area(n) * s * h / 3.0;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ℓ₊ at one target over the ε list
struct EllValue {
  double ell = 0.0, K = 0.0, R = 0.0, c = 1.0;
  std::vector<double> ell_eps;
  double identity_residual = 0.0;
  int tx = 0, ty = 0;
  bool from_oracle = false;
  Point momentum{0.0, 0.0};
  Point differential{0.0, 0.0};
};

struct Evaluator {
  const flow::FlowHistory& h;
  double base_time;
  Point base;
  std::vector<double> eps;
  FieldOptions opt;
  std::vector<std::unique_ptr<ReducedGeometry>> geo;

  Evaluator(const flow::FlowHistory& h_, double base_time_, Point base_, const FieldOptions& o)
      : h(h_), base_time(base_time_), base(base_), opt(o) {
    eps = o.epsilons.empty() ? default_epsilons(h, base_time) : o.epsilons;
    if (eps.empty()) eps = {0.0};
    geo.push_back(make_geometry(h, base_time));
    if (is_model(*geo.front())) base = {0.0, 0.0};
    for (double e : eps) {
      if (e < 0.0) throw std::invalid_argument("reduced field: epsilon must be nonnegative");
      if (e == 0.0 && starts_at_vertex(h, base_time)) {
        throw std::invalid_argument("reduced field: a degenerate vertex needs epsilon > 0");
      }
    }
  }

  [[nodiscard]] const ReducedGeometry& g() const { return *geo.front(); }

  EllValue value(Point y, double t, const Point* warm = nullptr) const {
    const double tau = t - base_time;
    if (!(tau > 0.0)) throw std::invalid_argument("reduced field: target time must follow the base time");
    EllValue v;
    std::vector<double> Ks;
    for (double e : eps) {
      TargetOptions to;
      to.epsilon = e;
      to.ode_tol = opt.ode_tol;
      to.miss_tol = opt.miss_tol;
      const auto tv = shoot_to(g(), base, y, tau, to, eps.size() == 1 ? warm : nullptr);
      v.ell_eps.push_back(tv.ell);
      Ks.push_back(tv.K);
      v.R = tv.R;
      v.c = tv.c;
      v.tx = tv.translate_x;
      v.ty = tv.translate_y;
      v.momentum = tv.momentum;
      v.differential = tv.differential;
      v.from_oracle = v.from_oracle || tv.from_oracle;
      if (std::isfinite(tv.identity_residual)) {
        v.identity_residual = std::max(v.identity_residual, std::abs(tv.identity_residual));
      }
    }
    v.ell = extrapolate_epsilon(eps, v.ell_eps);
    v.K = extrapolate_epsilon(eps, Ks);
    return v;
  }
};

}  // namespace

bool starts_at_vertex(const flow::FlowHistory& h, double base_time) {
  if (h.kind() != geometry::ModelKind::ModelSpace) return false;
  const ModelSampler m(h, base_time);
  return m.scale(0.0) == 0.0;
}

std::vector<double> default_epsilons(const flow::FlowHistory& h, double base_time) {
  // in the time units of the unscaled flow, so blowdowns use matching offsets
  const double a = h.alpha();
  if (starts_at_vertex(h, base_time)) return {1e-3 / a, 1e-4 / a, 1e-5 / a};
  return {0.0};
}

double extrapolate_epsilon(const std::vector<double>& eps, const std::vector<double>& values) {
  if (eps.size() != values.size() || eps.empty()) {
    throw std::invalid_argument("extrapolate: need one value per epsilon");
  }
  const std::size_t m = std::min<std::size_t>(eps.size(), 3);
  if (m == 1) return values.front();
  Eigen::MatrixXd A(eps.size(), m);
  Eigen::VectorXd b(eps.size());
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const double x = std::sqrt(eps[i]);
    for (std::size_t j = 0; j < m; ++j) A(i, j) = std::pow(x, static_cast<double>(j));
    b(i) = values[i];
  }
  return A.colPivHouseholderQr().solve(b)(0);
}

ReducedField ell_plus_field(const flow::FlowHistory& h, double base_time, Point base,
                            const std::vector<Target>& targets, const FieldOptions& options) {
  const Evaluator ev(h, base_time, base, options);
  ReducedField f;
  f.base = ev.base;
  f.base_time = base_time;
  f.dimension = ev.g().dimension();
  f.epsilons = ev.eps;
  f.min_ell = std::numeric_limits<double>::infinity();
  const Point* warm = nullptr;
  Point last{0.0, 0.0};
  for (const auto& tg : targets) {
    const auto v = ev.value(tg.y, tg.t, warm);
    FieldPoint p;
    p.target = tg;
    p.tau = tg.t - base_time;
    p.ell = v.ell;
    p.L_bar = 4.0 * p.tau * v.ell;
    p.K = v.K;
    p.R = v.R;
    p.c = v.c;
    p.ell_by_epsilon = v.ell_eps;
    p.identity_residual = v.identity_residual;
    p.translate_x = v.tx;
    p.translate_y = v.ty;
    p.from_oracle = v.from_oracle;
    if (options.cross_check) {
      for (std::size_t i = 0; i < ev.eps.size(); ++i) {
        OracleOptions oo;
        oo.epsilon = ev.eps[i];
        oo.segments = options.oracle_segments;
        const auto o = path_minimization_oracle(ev.g(), ev.base, tg.y, p.tau, oo);
        const double gap = (o.ell - v.ell_eps[i]) / std::max(1.0, std::abs(v.ell_eps[i]));
        p.oracle_gap = std::abs(gap) > std::abs(p.oracle_gap) ? gap : p.oracle_gap;
        p.oracle_ell = o.ell;
      }
    }
    last = v.momentum;
    warm = v.from_oracle ? nullptr : &last;
    f.max_oracle_gap = std::max(f.max_oracle_gap, std::abs(p.oracle_gap));
    f.max_identity_residual = std::max(f.max_identity_residual, p.identity_residual);
    f.fallbacks += p.from_oracle ? 1 : 0;
    f.min_ell = std::min(f.min_ell, p.ell);
    f.points.push_back(std::move(p));
  }
  f.oracle_ok = f.max_oracle_gap <= options.oracle_tol;
  return f;
}

double model_ball_radius(int dimension, int sign, double base_volume) {
  if (!(base_volume > 0.0)) throw std::invalid_argument("ball radius: volume must be positive");
  if (sign > 0) {
    const double full = ball_volume(dimension, sign, kPi);
    if (base_volume >= full * (1.0 - 1e-8)) return kPi;
  }
  double lo = 0.0, hi = 1.0;
  while (ball_volume(dimension, sign, hi) < base_volume) {
    lo = hi;
    hi *= 2.0;
    if (sign > 0 && hi >= kPi) {
      hi = kPi;
      break;
    }
  }
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (ball_volume(dimension, sign, mid) < base_volume ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

ThetaSeries theta_plus(const flow::FlowHistory& h, double base_time, Point base,
                       const std::vector<double>& times, const ThetaOptions& options) {
  if (!std::is_sorted(times.begin(), times.end())) {
    throw std::invalid_argument("theta: times must increase");
  }
  const Evaluator ev(h, base_time, base, options.field);
  const auto& g = ev.g();
  const int n = g.dimension();
  ThetaSeries out;
  out.tol = options.tol;
  out.min_bound_ratio = std::numeric_limits<double>::infinity();
  for (double t : times) {
    const double tau = t - base_time;
    double sum = 0.0, min_ell = std::numeric_limits<double>::infinity();
    if (!is_model(g)) {
      const int m = options.torus_resolution;
      const double hx = g.period_x() / m, hy = g.period_y() / m;
      Point warm{0.0, 0.0};
      bool have_warm = false;
      for (int j = 0; j < m; ++j) {
        for (int i = 0; i < m; ++i) {
          const auto v = ev.value({i * hx, j * hy}, t, have_warm ? &warm : nullptr);
          warm = v.momentum;
          have_warm = !v.from_oracle;
          out.fallbacks += v.from_oracle ? 1 : 0;
          min_ell = std::min(min_ell, v.ell);
          sum += std::exp(v.ell) * v.c * hx * hy;
        }
      }
    } else {
      const auto& ms = dynamic_cast<const ModelSampler&>(g);
      const double Dmax = model_ball_radius(n, ms.sign(), ms.base_volume());
      const double a = ms.scale(tau);
      const int P = options.radial_panels;
      const double hD = Dmax / P;
      for (int k = 0; k < P; ++k) {
        for (int q = 0; q < 3; ++q) {
          const double D = hD * (k + 0.5 * (1.0 + kGaussX[q]));
          const auto v = ev.value({D, 0.0}, t);
          out.fallbacks += v.from_oracle ? 1 : 0;
          min_ell = std::min(min_ell, v.ell);
          sum += 0.5 * hD * kGaussW[q] * std::exp(v.ell) * std::pow(sn(ms.sign(), D), n - 1);
        }
      }
      sum *= std::pow(a, 0.5 * n) * sphere_area(n);
    }
    const double theta = sum / std::pow(4.0 * kPi * tau, 0.5 * n);
    const double vt = h.volume(t) / std::pow(tau, 0.5 * n);
    const double bound = vt / std::pow(4.0 * kPi * std::numbers::e, 0.5 * n);
    out.times.push_back(t);
    out.tau.push_back(tau);
    out.theta.push_back(theta);
    out.lower_bound.push_back(bound);
    out.min_ell.push_back(min_ell);
    out.min_bound_ratio = std::min(out.min_bound_ratio, theta / bound);
  }
  for (std::size_t k = 1; k < out.theta.size(); ++k) {
    out.max_increase = std::max(out.max_increase, out.theta[k] - out.theta[k - 1]);
  }
  out.nonincreasing = out.max_increase <= options.tol;
  out.above_bound = out.min_bound_ratio >= 1.0 - 1e-12;
  return out;
}

namespace {

double d1(double fm2, double fm1, double fp1, double fp2, double h) {
  return (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * h);
}
double d2(double fm2, double fm1, double f0, double fp1, double fp2, double h) {
  return (-fm2 + 16.0 * fm1 - 30.0 * f0 + 16.0 * fp1 - fp2) / (12.0 * h * h);
}
bool smooth_second(double fm2, double fm1, double f0, double fp1, double fp2, double h,
                   double tol) {
  const double a = (fm1 - 2.0 * f0 + fp1) / (h * h);
  const double b = (fm2 - 2.0 * f0 + fp2) / (4.0 * h * h);
  return std::abs(a - b) <= tol * std::max(1.0, std::abs(a));
}

}  // namespace

IdentityReport check_identities(const flow::FlowHistory& h, double base_time, Point base,
                                const std::vector<Target>& targets,
                                const IdentityOptions& options) {
  const Evaluator ev(h, base_time, base, options.field);
  const auto& g = ev.g();
  const int n = g.dimension();
  const double t_hi = base_time + g.max_eta();
  IdentityReport rep;
  rep.tol = options.tol;
  rep.min_heat_supersolution = std::numeric_limits<double>::infinity();
  int excluded = 0;
  for (const auto& tg : targets) {
    const double tau = tg.t - base_time;
    const double dt = options.time_step > 0.0 ? options.time_step : 1e-3 * tau;
    if (tg.t + 2.0 * dt > t_hi || tau - 2.0 * dt <= 0.0) {
      throw std::invalid_argument("identities: time stencil leaves the history");
    }
    const double hs = options.step;
    const auto c0 = ev.value(tg.y, tg.t);
    const Point* warm = &c0.momentum;
    bool smooth = !c0.from_oracle;
    auto same = [&](const EllValue& v) {
      smooth = smooth && !v.from_oracle && v.tx == c0.tx && v.ty == c0.ty;
      return v.ell;
    };
    // time stencil
    double ft[4];
    {
      const double off[4] = {-2, -1, 1, 2};
      for (int k = 0; k < 4; ++k) ft[k] = same(ev.value(tg.y, tg.t + off[k] * dt, warm));
    }
    const double ell_t = d1(ft[0], ft[1], ft[2], ft[3], dt);
    double grad_sq = 0.0, lap = 0.0;
    const auto S = g.at(tg.y[0], tg.y[1], tau);
    if (!is_model(g)) {
      for (int d = 0; d < 2; ++d) {
        double f[5];
        for (int k = -2; k <= 2; ++k) {
          if (k == 0) {
            f[2] = c0.ell;
            continue;
          }
          Point y = tg.y;
          y[d] += k * hs;
          f[k + 2] = same(ev.value(y, tg.t, warm));
        }
        const double g1 = d1(f[0], f[1], f[3], f[4], hs);
        grad_sq += g1 * g1 / c0.c;
        lap += d2(f[0], f[1], f[2], f[3], f[4], hs) / c0.c;
        smooth = smooth && smooth_second(f[0], f[1], f[2], f[3], f[4], hs, options.smooth_tol);
      }
    } else {
      const auto& ms = dynamic_cast<const ModelSampler&>(g);
      const double D = tg.y[0];
      const double a = ms.scale(tau);
      double f[5];
      for (int k = -2; k <= 2; ++k) {
        f[k + 2] = k == 0 ? c0.ell : same(ev.value({D + k * hs, 0.0}, tg.t));
      }
      const double l1 = d1(f[0], f[1], f[3], f[4], hs);
      const double l2 = d2(f[0], f[1], f[2], f[3], f[4], hs);
      grad_sq = l1 * l1 / a;
      lap = (D == 0.0 ? n * l2 : l2 + (n - 1) * cot_k(ms.sign(), D) * l1) / a;
      smooth = smooth && smooth_second(f[0], f[1], f[2], f[3], f[4], hs, options.smooth_tol);
    }
    IdentityRow r;
    r.target = tg;
    r.tau = tau;
    r.ell = c0.ell;
    r.K = c0.K;
    r.R = S.R;
    r.grad_sq = grad_sq;
    r.ell_t = ell_t;
    r.lap = lap;
    const double t32 = std::pow(tau, 1.5);
    r.gradient_identity = grad_sq + r.R - r.ell / tau - r.K / t32;
    r.time_identity = ell_t - r.R + r.K / (2.0 * t32) + r.ell / tau;
    r.laplacian_bound = lap - r.R - 0.5 * n / tau + r.K / (2.0 * t32);
    r.supersolution = ell_t + lap + grad_sq - r.R - 0.5 * n / tau;
    r.heat_supersolution = 4.0 * r.ell + 4.0 * tau * ell_t + 2.0 * n - 4.0 * tau * lap;
    r.v_like = tau * (2.0 * lap + grad_sq - r.R) - r.ell - n;
    r.u_hat_residual = r.supersolution * std::exp(r.ell) / std::pow(4.0 * kPi * tau, 0.5 * n);
    r.smooth = smooth;
    if (smooth) {
      rep.max_gradient_identity = std::max(rep.max_gradient_identity, std::abs(r.gradient_identity));
      rep.max_time_identity = std::max(rep.max_time_identity, std::abs(r.time_identity));
      rep.max_laplacian_bound = std::max(rep.max_laplacian_bound, r.laplacian_bound);
      rep.max_supersolution = std::max(rep.max_supersolution, r.supersolution);
      rep.min_heat_supersolution = std::min(rep.min_heat_supersolution, r.heat_supersolution);
      rep.max_v_like = std::max(rep.max_v_like, r.v_like);
      rep.max_u_hat_residual = std::max(rep.max_u_hat_residual, r.u_hat_residual);
    } else {
      ++excluded;
    }
    rep.rows.push_back(r);
  }
  if (excluded == static_cast<int>(targets.size())) rep.min_heat_supersolution = 0.0;
  rep.excluded_fraction = targets.empty() ? 0.0 : static_cast<double>(excluded) / targets.size();
  rep.identities_ok = rep.max_gradient_identity <= options.tol && rep.max_time_identity <= options.tol;
  rep.inequalities_ok = rep.max_laplacian_bound <= options.tol &&
                        rep.max_supersolution <= options.tol &&
                        rep.min_heat_supersolution >= -options.tol && rep.max_v_like <= options.tol;
  return rep;
}

HessianReport hessian_check(const flow::FlowHistory& h, double base_time, Point base,
                            const std::vector<Target>& targets, const HessianOptions& options) {
  HessianReport rep;
  rep.tol = options.tol;
  for (const auto& tg : targets) {
    if (!geometry::curvature_operator_nonneg(h.metric(tg.t), 1e-10)) {
      rep.refused = true;
      std::ostringstream os;
      os << "precondition not met: curvature operator is not nonnegative at t=" << tg.t;
      rep.reason = os.str();
      return rep;
    }
  }
  const Evaluator ev(h, base_time, base, options.field);
  const auto& g = ev.g();
  const double hs = options.step;
  const double r2 = std::sqrt(0.5);
  const std::vector<Point> dirs{{1.0, 0.0}, {0.0, 1.0}, {r2, r2}};
  rep.min_margin = std::numeric_limits<double>::infinity();
  for (const auto& tg : targets) {
    const double tau = tg.t - base_time;
    const double st = std::sqrt(tau);
    const auto c0 = ev.value(tg.y, tg.t);
    const double L0 = c0.ell * 2.0 * st;
    for (const auto& Y : dirs) {
      HessianRow row;
      row.target = tg;
      row.direction = Y;
      double f[5];
      if (!is_model(g)) {
        for (int k = -2; k <= 2; ++k) {
          f[k + 2] = k == 0 ? L0
                            : 2.0 * st *
                                  ev.value({tg.y[0] + k * hs * Y[0], tg.y[1] + k * hs * Y[1]}, tg.t,
                                           &c0.momentum)
                                      .ell;
        }
        const auto S = g.at(tg.y[0], tg.y[1], tau);
        // covariant correction: Γ(Y,Y)^k = 2Y^k(∇ψ·Y) - |Y|²∂_kψ for c = e^{2ψ}
        const double psiY = S.psi_x * Y[0] + S.psi_y * Y[1];
        const double gam0 = 2.0 * Y[0] * psiY - S.psi_x, gam1 = 2.0 * Y[1] * psiY - S.psi_y;
        row.hessian = d2(f[0], f[1], f[2], f[3], f[4], hs) -
                      (gam0 * c0.differential[0] + gam1 * c0.differential[1]);
        row.bound = S.c / st + 2.0 * st * 0.5 * S.R * S.c;
      } else {
        const auto& ms = dynamic_cast<const ModelSampler&>(g);
        const double D = tg.y[0];
        // target q and direction Y in the model's embedding (flat or round)
        // distance from the base after moving u along Y from the target; on the
        // round model q = (cos D, sin D, ·) and Y = Y_r e_r + Y_t e_t, so only
        // the first embedding coordinate matters
        auto dist = [&](double u) {
          if (ms.sign() == 0) return std::hypot(D + u * Y[0], u * Y[1]);
          const double p0 = std::cos(u) * std::cos(D) - std::sin(u) * std::sin(D) * Y[0];
          return std::acos(std::clamp(p0, -1.0, 1.0));
        };
        if (ms.sign() < 0) throw std::logic_error("hyperbolic models are refused above");
        for (int k = -2; k <= 2; ++k) {
          f[k + 2] = k == 0 ? L0 : 2.0 * st * ev.value({dist(k * hs), 0.0}, tg.t).ell;
        }
        row.hessian = d2(f[0], f[1], f[2], f[3], f[4], hs);
        row.bound = ms.scale(tau) / st + 2.0 * st * ms.unit_ricci();
      }
      row.margin = row.bound - row.hessian;
      rep.min_margin = std::min(rep.min_margin, row.margin);
      rep.rows.push_back(row);
    }
  }
  if (rep.rows.empty()) rep.min_margin = 0.0;
  rep.ok = rep.min_margin >= -options.tol;
  return rep;
}

std::string field_csv(const ReducedField& f) {
  std::ostringstream os;
  os << "t,tau,y0,y1,ell,L_bar,K,R,oracle_ell,oracle_gap,from_oracle\n";
  for (const auto& p : f.points) {
    os << fmt(p.target.t) << ',' << fmt(p.tau) << ',' << fmt(p.target.y[0]) << ','
       << fmt(p.target.y[1]) << ',' << fmt(p.ell) << ',' << fmt(p.L_bar) << ',' << fmt(p.K) << ','
       << fmt(p.R) << ',' << fmt(p.oracle_ell) << ',' << fmt(p.oracle_gap) << ','
       << (p.from_oracle ? 1 : 0) << '\n';
  }
  return os.str();
}

std::string theta_csv(const ThetaSeries& s) {
  std::ostringstream os;
  os << "t,tau,theta_plus,lower_bound,min_ell\n";
  for (std::size_t k = 0; k < s.times.size(); ++k) {
    os << fmt(s.times[k]) << ',' << fmt(s.tau[k]) << ',' << fmt(s.theta[k]) << ','
       << fmt(s.lower_bound[k]) << ',' << fmt(s.min_ell[k]) << '\n';
  }
  return os.str();
}

std::string geodesic_csv(const ReducedGeometry& g, const GeodesicSolution& sol) {
  std::ostringstream os;
  os << "eta,x,y,X_x,X_y,integrand,H\n";
  for (std::size_t k = 0; k < sol.path.eta.size(); ++k) {
    const double eta = sol.path.eta[k];
    const auto& p = sol.path.position[k];
    const auto& X = sol.X[k];
    double integrand = std::numeric_limits<double>::quiet_NaN();
    if (eta > 0.0) {
      const auto S = g.at(p[0], p[1], eta);
      integrand = std::sqrt(eta) * (S.R + S.c * (X[0] * X[0] + X[1] * X[1]));
    }
    os << fmt(eta) << ',' << fmt(p[0]) << ',' << fmt(p[1]) << ',' << fmt(X[0]) << ',' << fmt(X[1])
       << ',' << fmt(integrand) << ',' << fmt(sol.H[k]) << '\n';
  }
  return os.str();
}

}  // namespace rflab::reduced
