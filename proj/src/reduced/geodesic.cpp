#include "rflab/reduced/geodesic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>

#include "rflab/numerics/ode.hpp"

namespace rflab::reduced {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double norm2(Point p) { return p[0] * p[0] + p[1] * p[1]; }

// s³R + s·c|P|², i.e. η^{3/2}(R + |X|²) written so it stays finite at s = 0
double q_term(const SpaceTimeSample& S, double s, Point P) {
  return s * s * s * S.R + s * S.c * norm2(P);
}

bool is_model(const ReducedGeometry& g) { return g.period_x() == 0.0; }

}  // namespace

void PathSample::validate() const {
  if (eta.size() < 2 || eta.size() != position.size()) {
    throw std::invalid_argument("path: need at least two samples with one position each");
  }
  if (std::abs(eta.front() - epsilon) > 1e-12 * std::max(1.0, eta.back())) {
    throw std::invalid_argument("path: eta grid must start at epsilon");
  }
  for (std::size_t k = 1; k < eta.size(); ++k) {
    if (!(eta[k] > eta[k - 1])) throw std::invalid_argument("path: eta grid must increase");
  }
  for (const auto& p : position) {
    if (!std::isfinite(p[0]) || !std::isfinite(p[1])) {
      throw std::invalid_argument("path: non-finite position");
    }
  }
}

double L_plus_of_path(const ReducedGeometry& g, const PathSample& p) {
  p.validate();
  if (p.eta.back() > g.max_eta() * (1.0 + 1e-12)) {
    throw std::out_of_range("path: leaves the time range of the flow");
  }
  double L = 0.0;
  for (std::size_t k = 0; k + 1 < p.eta.size(); ++k) {
    const double a = p.eta[k], b = p.eta[k + 1], d = b - a;
    const Point v{(p.position[k + 1][0] - p.position[k][0]) / d,
                  (p.position[k + 1][1] - p.position[k][1]) / d};
    const auto Sa = g.at(p.position[k][0], p.position[k][1], a);
    const auto Sb = g.at(p.position[k + 1][0], p.position[k + 1][1], b);
    const double fa = Sa.R + Sa.c * norm2(v), fb = Sb.R + Sb.c * norm2(v);
    const double F1 = (2.0 / 3.0) * (std::pow(b, 1.5) - std::pow(a, 1.5));
    const double F2 = 0.4 * (std::pow(b, 2.5) - std::pow(a, 2.5));
    L += ((b * F1 - F2) * fa + (F2 - a * F1) * fb) / d;
  }
  if (p.epsilon > 0.0) L -= g.dimension() * std::sqrt(p.epsilon);
  return L;
}

double GeodesicSolution::ell() const { return L_plus / (2.0 * std::sqrt(tau)); }

GeodesicSolution geodesic_shoot(const ReducedGeometry& g, Point x0, Point momentum, double tau,
                                const ShootOptions& options) {
  const double eps = options.epsilon;
  if (!(eps >= 0.0) || !(tau > eps)) throw std::invalid_argument("geodesic: need 0 <= epsilon < tau");
  if (tau > g.max_eta() * (1.0 + 1e-12)) throw std::out_of_range("geodesic: tau beyond the flow");
  if (!std::isfinite(momentum[0]) || !std::isfinite(momentum[1])) {
    throw std::invalid_argument("geodesic: momentum must be finite");
  }
  const double s0 = std::sqrt(eps), s1 = std::sqrt(tau);

  numerics::OdeRhs rhs = [&g](double s, std::span<const double> y, std::span<double> dy) {
    const auto S = g.at(y[0], y[1], s * s);
    const double px = y[2], py = y[3];
    const double pp = px * px + py * py;
    const double psiP = S.psi_x * px + S.psi_y * py;
    const double RP = S.R_x * px + S.R_y * py;
    dy[0] = 2.0 * px;
    dy[1] = 2.0 * py;
    dy[2] = -2.0 * (2.0 * px * psiP - pp * S.psi_x) + s * s * S.R_x / S.c + 4.0 * s * S.kappa * px;
    dy[3] = -2.0 * (2.0 * py * psiP - pp * S.psi_y) + s * s * S.R_y / S.c + 4.0 * s * S.kappa * py;
    dy[4] = 2.0 * s * s * S.R + 2.0 * S.c * pp;
    dy[5] = 2.0 * std::pow(s, 4) * S.R_t + 4.0 * s * s * s * RP +
            4.0 * s * s * S.kappa * S.c * pp + 2.0 * s * s * S.R;
  };

  numerics::OdeOptions oo;
  oo.tol = ToleranceConfig{options.tol, options.tol, 100000, 1e-4};
  oo.record = options.record;
  oo.max_step = (s1 - s0) / 8.0;
  const auto traj =
      numerics::integrate_ode(rhs, {x0[0], x0[1], momentum[0], momentum[1], 0.0, 0.0}, s0, s1, oo);

  GeodesicSolution sol;
  sol.tau = tau;
  sol.path.base = x0;
  sol.path.epsilon = eps;
  sol.ok = traj.ok();
  sol.diagnostic = traj.diagnostic;
  if (!sol.ok) {
    std::ostringstream os;
    os << "geodesic blew up before tau=" << tau << " (" << traj.diagnostic << ")";
    sol.diagnostic = os.str();
  }
  const auto& ys = traj.y;
  for (std::size_t k = 0; k < traj.t.size(); ++k) {
    const double s = traj.t[k], eta = s * s;
    const Point P{ys[k][2], ys[k][3]};
    sol.path.eta.push_back(eta);
    sol.path.position.push_back({ys[k][0], ys[k][1]});
    sol.momentum.push_back(P);
    if (s > 0.0) {
      const Point X{P[0] / s, P[1] / s};
      const auto S = g.at(ys[k][0], ys[k][1], eta);
      sol.X.push_back(X);
      sol.H.push_back(S.R_t + 2.0 * (S.R_x * X[0] + S.R_y * X[1]) + 2.0 * S.kappa * S.c * norm2(X) +
                      S.R / eta);
    } else {
      sol.X.push_back({kNaN, kNaN});
      sol.H.push_back(kNaN);
    }
  }
  const auto& yl = ys.back();
  const double s_end = traj.t.back();
  const Point P_end{yl[2], yl[3]};
  const auto S_start = g.at(x0[0], x0[1], eps);
  const auto S_end = g.at(yl[0], yl[1], s_end * s_end);
  sol.L_head = eps > 0.0 ? -g.dimension() * s0 : 0.0;
  sol.L_path = yl[4];
  sol.L_plus = sol.L_head + sol.L_path;
  sol.K_path = yl[5];
  const double start_term = q_term(S_start, s0, momentum);
  const double end_term = q_term(S_end, s_end, P_end);
  sol.Q_start = s0 > 0.0 ? start_term / (s0 * s0 * s0) : kNaN;
  sol.Q_end = end_term / (s_end * s_end * s_end);
  sol.K = sol.K_path + start_term - 0.5 * sol.L_head;
  sol.identity_residual = end_term - start_term - sol.K_path - 0.5 * sol.L_path;
  return sol;
}

Point endpoint_differential(const ReducedGeometry& g, const GeodesicSolution& sol) {
  const Point x = sol.end();
  const double c = g.at(x[0], x[1], sol.tau).c;
  return {2.0 * c * sol.momentum.back()[0], 2.0 * c * sol.momentum.back()[1]};
}

std::vector<Point> candidate_translates(const ReducedGeometry& g, Point x0, Point target) {
  if (is_model(g)) return {target};
  const double lx = g.period_x(), ly = g.period_y();
  // nearest image first, then its 8 neighbours
  const double bx = target[0] - lx * std::round((target[0] - x0[0]) / lx);
  const double by = target[1] - ly * std::round((target[1] - x0[1]) / ly);
  std::vector<std::pair<double, Point>> all;
  for (int j = -1; j <= 1; ++j) {
    for (int i = -1; i <= 1; ++i) {
      const Point p{bx + i * lx, by + j * ly};
      all.push_back({norm2({p[0] - x0[0], p[1] - x0[1]}), p});
    }
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  const auto [cmin, cmax] = g.conformal_range();
  // kinetic cost lies between c_min d²/2√τ and c_max d²/2√τ; the 1.25 pad
  // covers the curvature term
  const double cut = all.front().first * 1.25 * cmax / cmin + 1e-14;
  std::vector<Point> out;
  for (const auto& [d2, p] : all) {
    if (d2 <= cut) out.push_back(p);
  }
  return out;
}

namespace {

struct Shot {
  GeodesicSolution sol;
  Point p{0.0, 0.0};
  double miss = std::numeric_limits<double>::infinity();
  bool converged = false;
};

Shot newton_shoot(const ReducedGeometry& g, Point x0, Point tgt, double tau, Point p,
                  const TargetOptions& o) {
  const bool one_d = is_model(g);
  ShootOptions so{o.epsilon, o.ode_tol, false};
  auto miss_of = [&](const GeodesicSolution& s) {
    const Point e = s.end();
    return Point{e[0] - tgt[0], one_d ? 0.0 : e[1] - tgt[1]};
  };
  Shot best;
  best.p = p;
  best.sol = geodesic_shoot(g, x0, p, tau, so);
  if (!best.sol.ok) return best;
  Point F = miss_of(best.sol);
  best.miss = std::sqrt(norm2(F));
  // FD Jacobian at the start, Broyden updates afterwards; a fresh FD
  // Jacobian whenever a Broyden step fails to reduce the miss
  const int dims = one_d ? 1 : 2;
  double J[2][2] = {{1.0, 0.0}, {0.0, 1.0}};
  bool fresh = false;
  auto fd_jacobian = [&]() {
    const double h = 1e-6 * std::max(1.0, std::sqrt(norm2(p)));
    for (int d = 0; d < dims; ++d) {
      Point q = p;
      q[d] += h;
      const auto sq = geodesic_shoot(g, x0, q, tau, so);
      if (!sq.ok) return false;
      const Point Fq = miss_of(sq);
      J[0][d] = (Fq[0] - F[0]) / h;
      J[1][d] = (Fq[1] - F[1]) / h;
    }
    fresh = true;
    return true;
  };
  if (best.miss > o.miss_tol && !fd_jacobian()) return best;
  for (int it = 0; it < o.max_newton && best.miss > o.miss_tol; ++it) {
    Point step;
    if (one_d) {
      step = {-F[0] / J[0][0], 0.0};
    } else {
      const double det = J[0][0] * J[1][1] - J[0][1] * J[1][0];
      if (det == 0.0 || !std::isfinite(det)) return best;
      step = {-(J[1][1] * F[0] - J[0][1] * F[1]) / det, -(-J[1][0] * F[0] + J[0][0] * F[1]) / det};
    }
    bool improved = false;
    for (double lam = 1.0; lam > 1e-3; lam *= 0.5) {
      const Point q{p[0] + lam * step[0], p[1] + lam * step[1]};
      auto sq = geodesic_shoot(g, x0, q, tau, so);
      if (!sq.ok) continue;
      const Point Fq = miss_of(sq);
      const double m = std::sqrt(norm2(Fq));
      if (m < best.miss) {
        const Point dp{q[0] - p[0], q[1] - p[1]};
        const Point dF{Fq[0] - F[0], Fq[1] - F[1]};
        const double dd = norm2(dp);
        if (dd > 0.0) {
          const Point r{dF[0] - (J[0][0] * dp[0] + J[0][1] * dp[1]),
                        dF[1] - (J[1][0] * dp[0] + J[1][1] * dp[1])};
          for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < dims; ++j) J[i][j] += r[i] * dp[j] / dd;
          }
        }
        p = q;
        F = Fq;
        best.p = q;
        best.sol = std::move(sq);
        best.miss = m;
        improved = true;
        fresh = false;
        break;
      }
      if (!fresh) break;  // retry with an FD Jacobian before backtracking
    }
    if (!improved) {
      if (fresh || !fd_jacobian()) break;
    }
  }
  // Newton stalls at the ODE noise floor; a stalled miss this small still
  // pins the endpoint far below any FD step in use
  best.converged = best.miss <= std::max(o.miss_tol, 1e-8);
  return best;
}

}  // namespace

TargetValue shoot_to(const ReducedGeometry& g, Point x0, Point target, double tau,
                     const TargetOptions& options, const Point* warm_start) {
  const auto cands = candidate_translates(g, x0, target);
  const double st = 2.0 * std::sqrt(tau);
  // which candidate the warm start heads for
  std::size_t warm_for = cands.size();
  if (warm_start) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cands.size(); ++i) {
      const double d = norm2({x0[0] + st * (*warm_start)[0] - cands[i][0],
                              x0[1] + st * (*warm_start)[1] - cands[i][1]});
      if (d < best) {
        best = d;
        warm_for = i;
      }
    }
  }
  std::optional<Shot> best;
  Point best_tgt = cands.front();
  const double c_min = g.conformal_range().first;
  const double r_min = g.scalar_min();
  const double head = options.epsilon > 0.0 ? -g.dimension() * std::sqrt(options.epsilon) : 0.0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const Point tgt = cands[i];
    // L ≥ c_min d²/2√τ + (2/3) R_min τ^{3/2}: skip translates that cannot win
    if (best && std::isfinite(r_min)) {
      const double d2 = norm2({tgt[0] - x0[0], tgt[1] - x0[1]});
      const double lower = c_min * d2 / st + (2.0 / 3.0) * r_min * std::pow(tau, 1.5) + head;
      if (lower >= best->sol.L_plus) continue;
    }
    const Point p0 = i == warm_for ? *warm_start
                                   : Point{(tgt[0] - x0[0]) / st, (tgt[1] - x0[1]) / st};
    auto shot = newton_shoot(g, x0, tgt, tau, p0, options);
    if (!shot.converged) continue;
    if (!best || shot.sol.L_plus < best->sol.L_plus) {
      best = std::move(shot);
      best_tgt = tgt;
    }
  }

  TargetValue v;
  v.target = target;
  v.tau = tau;
  if (!best) {
    if (!options.oracle_fallback) {
      throw NumericalError("shooting missed the target and the oracle fallback is disabled");
    }
    OracleOptions oo;
    oo.epsilon = options.epsilon;
    const auto orc = path_minimization_oracle(g, x0, target, tau, oo);
    const auto S = g.at(orc.reached[0], orc.reached[1], tau);
    v.reached = orc.reached;
    v.L = orc.L;
    v.ell = orc.ell;
    v.R = S.R;
    v.c = S.c;
    v.K = kNaN;
    v.miss = kNaN;
    v.identity_residual = kNaN;
    v.from_oracle = true;
    return v;
  }
  const auto& sol = best->sol;
  const Point e = sol.end();
  const auto S = g.at(e[0], e[1], tau);
  v.reached = best_tgt;
  v.L = sol.L_plus;
  v.ell = sol.ell();
  v.K = sol.K;
  v.R = S.R;
  v.c = S.c;
  v.momentum = best->p;
  v.differential = endpoint_differential(g, sol);
  v.miss = best->miss;
  v.identity_residual = sol.identity_residual;
  if (!is_model(g)) {
    v.translate_x = static_cast<int>(std::lround((best_tgt[0] - target[0]) / g.period_x()));
    v.translate_y = static_cast<int>(std::lround((best_tgt[1] - target[1]) / g.period_y()));
  }
  return v;
}

// ---------------------------------------------------------------------------
// Oracle

namespace {

constexpr double kGaussX[3] = {-0.7745966692414834, 0.0, 0.7745966692414834};
constexpr double kGaussW[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};

struct DiscretePath {
  const ReducedGeometry& g;
  std::vector<double> s;  // M + 1 nodes
  int M;

  [[nodiscard]] double ds(int k) const { return s[k + 1] - s[k]; }

  // L and its gradient with respect to every node (end nodes get zero)
  double value(const std::vector<Point>& x, std::vector<Point>* grad,
               std::vector<double>* cbar) const {
    double L = 0.0;
    if (grad) grad->assign(x.size(), {0.0, 0.0});
    if (cbar) cbar->assign(M, 0.0);
    for (int k = 0; k < M; ++k) {
      const double h = ds(k);
      const Point v{(x[k + 1][0] - x[k][0]) / h, (x[k + 1][1] - x[k][1]) / h};
      const double vv = norm2(v);
      for (int q = 0; q < 3; ++q) {
        const double th = 0.5 * (1.0 + kGaussX[q]);
        const double sq = s[k] + th * h;
        const double w = 0.5 * kGaussW[q] * h;
        const Point p{x[k][0] + th * (x[k + 1][0] - x[k][0]), x[k][1] + th * (x[k + 1][1] - x[k][1])};
        const auto S = g.at(p[0], p[1], sq * sq);
        L += w * (2.0 * sq * sq * S.R + 0.5 * S.c * vv);
        if (cbar) (*cbar)[k] += 0.5 * kGaussW[q] * S.c / h;
        if (grad) {
          for (int d = 0; d < 2; ++d) {
            const double dR = d == 0 ? S.R_x : S.R_y;
            const double dpsi = d == 0 ? S.psi_x : S.psi_y;
            const double fx = 2.0 * sq * sq * dR + S.c * vv * dpsi;  // ½|v|²∇c with ∇c = 2c∇ψ
            const double fv = S.c * v[d];
            (*grad)[k][d] += w * (fx * (1.0 - th) - fv / h);
            (*grad)[k + 1][d] += w * (fx * th + fv / h);
          }
        }
      }
    }
    if (grad) {
      grad->front() = {0.0, 0.0};
      grad->back() = {0.0, 0.0};
    }
    return L;
  }
};

// kinetic Hessian (tridiagonal in the interior nodes, segment stiffness
// cbar = mean c / Δs) applied inversely
std::vector<Point> precondition(const std::vector<Point>& r, const std::vector<double>& cbar) {
  const std::size_t n = r.size() - 2;
  std::vector<Point> out(r.size(), {0.0, 0.0});
  if (n == 0) return out;
  std::vector<double> diag(n), off(n), cp(n);
  for (std::size_t i = 0; i < n; ++i) {
    diag[i] = cbar[i] + cbar[i + 1];
    off[i] = -cbar[i + 1];  // coupling of interior node i+1 to i+2
  }
  for (int d = 0; d < 2; ++d) {
    std::vector<double> rhs(n), sol(n);
    for (std::size_t i = 0; i < n; ++i) rhs[i] = r[i + 1][d];
    // Thomas algorithm
    double den = diag[0];
    cp[0] = off[0] / den;
    sol[0] = rhs[0] / den;
    for (std::size_t i = 1; i < n; ++i) {
      den = diag[i] - off[i - 1] * cp[i - 1];
      cp[i] = off[i] / den;
      sol[i] = (rhs[i] - off[i - 1] * sol[i - 1]) / den;
    }
    for (std::size_t i = n - 1; i-- > 0;) sol[i] -= cp[i] * sol[i + 1];
    for (std::size_t i = 0; i < n; ++i) out[i + 1][d] = sol[i];
  }
  return out;
}

double descend(const DiscretePath& dp, std::vector<Point>& x, int max_iter, int& iterations) {
  std::vector<Point> grad;
  std::vector<double> cbar;
  double L = dp.value(x, &grad, &cbar);
  for (int it = 0; it < max_iter; ++it) {
    const auto d = precondition(grad, cbar);
    double slope = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) slope += grad[i][0] * d[i][0] + grad[i][1] * d[i][1];
    if (!(slope > 1e-28 * std::max(1.0, std::abs(L)))) break;
    bool accepted = false;
    for (double a = 1.0; a > 1e-8; a *= 0.5) {
      std::vector<Point> y = x;
      for (std::size_t i = 1; i + 1 < x.size(); ++i) {
        y[i][0] -= a * d[i][0];
        y[i][1] -= a * d[i][1];
      }
      const double Ly = dp.value(y, nullptr, nullptr);
      if (Ly <= L - 1e-4 * a * slope) {
        x = std::move(y);
        const double prev = L;
        L = dp.value(x, &grad, &cbar);
        accepted = true;
        ++iterations;
        if (prev - L <= 1e-15 * std::max(1.0, std::abs(L))) return L;
        break;
      }
    }
    if (!accepted) break;
  }
  return L;
}

}  // namespace

OracleResult path_minimization_oracle(const ReducedGeometry& g, Point x0, Point target, double tau,
                                      const OracleOptions& options) {
  if (options.segments < 2) throw std::invalid_argument("oracle: need at least two segments");
  const double eps = options.epsilon;
  if (!(tau > eps)) throw std::invalid_argument("oracle: need epsilon < tau");
  const int M = options.segments;
  const double s0 = std::sqrt(eps);
  const double s1 = std::sqrt(tau);
  // uniform in s from a regular start; geometric from an ε-start, where the
  // optimal speed concentrates near s0
  std::vector<double> nodes(M + 1);
  for (int k = 0; k <= M; ++k) {
    const double f = static_cast<double>(k) / M;
    nodes[k] = s0 > 0.0 ? s0 * std::pow(s1 / s0, f) : s1 * f;
  }
  nodes.back() = s1;
  DiscretePath dp{g, nodes, M};
  const double head = eps > 0.0 ? -g.dimension() * s0 : 0.0;

  auto straight = [&](Point tgt) {
    std::vector<Point> x(M + 1);
    for (int k = 0; k <= M; ++k) {
      const double s = dp.s[k];
      const double f = k == M ? 1.0 : (s * s - eps) / (tau - eps);
      x[k] = {x0[0] + f * (tgt[0] - x0[0]), x0[1] + f * (tgt[1] - x0[1])};
    }
    return x;
  };

  OracleResult res;
  res.L = std::numeric_limits<double>::infinity();
  Point best_tgt = target;
  for (const auto& tgt : candidate_translates(g, x0, target)) {
    auto x = straight(tgt);
    const double L = options.descend ? descend(dp, x, options.max_iter, res.iterations)
                                     : dp.value(x, nullptr, nullptr);
    if (L < res.L) {
      res.L = L;
      best_tgt = tgt;
    }
  }
  if (options.descend) {
    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const double span = std::sqrt(norm2({best_tgt[0] - x0[0], best_tgt[1] - x0[1]}));
    const double amp = 0.25 * std::max(span, 0.1);
    for (int r = 0; r < options.random_starts; ++r) {
      auto x = straight(best_tgt);
      double coef[3][2];
      for (auto& c : coef) {
        c[0] = U(rng);
        c[1] = is_model(g) ? 0.0 : U(rng);
      }
      for (int k = 1; k < M; ++k) {
        for (int m = 0; m < 3; ++m) {
          const double b = std::sin((m + 1) * std::numbers::pi * k / M) * amp / (m + 1);
          x[k][0] += coef[m][0] * b;
          x[k][1] += coef[m][1] * b;
        }
      }
      const double L = descend(dp, x, options.max_iter, res.iterations);
      if (L < res.L) res.L = L;
    }
  }
  res.L += head;
  res.ell = res.L / (2.0 * std::sqrt(tau));
  res.reached = best_tgt;
  return res;
}

}  // namespace rflab::reduced
