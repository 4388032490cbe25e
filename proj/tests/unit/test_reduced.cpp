#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "rflab/entropy/entropy.hpp"
#include "rflab/geometry/serialize.hpp"
#include "rflab/reduced/field.hpp"

using namespace rflab;
using namespace rflab::reduced;
using flow::evolve;
using geometry::ConformalTorusMetric;
using geometry::ModelSpaceMetric;

namespace {

constexpr double kPi = std::numbers::pi;
// e^{-3/2} π^{-3/2}: reduced volume of the hyperbolic expander from its vertex
const double kHyperbolicTheta = std::exp(-1.5) * std::pow(kPi, -1.5);

ModelSpaceMetric hyperbolic() { return {3, -1, 1.0, 1.0}; }
ModelSpaceMetric round_sphere() { return {3, 1, 1.0, 2.0 * kPi * kPi}; }
ConformalTorusMetric flat(int n, double period = 1.0) {
  return geometry::torus_from_modes(n, period, {});
}
ConformalTorusMetric bumpy(int n) { return geometry::torus_from_modes(n, 1.0, {{0.3, 1.0, 0.0, 0.0}}); }

// shortest flat distance on the unit-period torus
double torus_dist_sq(Point a, Point b, double period = 1.0) {
  double s = 0.0;
  for (int d = 0; d < 2; ++d) {
    double x = std::abs(a[d] - b[d]);
    x = std::min(x, period - x);
    s += x * x;
  }
  return s;
}

// ℓ₊ of the hyperbolic expander (a = 4η) started at offset ε: potential
// -3(√τ - √ε), head -3√ε, kinetic D²/J with J = ∫_ε^τ dη/(4η^{3/2})
double hyperbolic_ell(double D, double tau, double eps) {
  const double J = 0.5 * (1.0 / std::sqrt(eps) - 1.0 / std::sqrt(tau));
  return (-3.0 * std::sqrt(tau) + D * D / J) / (2.0 * std::sqrt(tau));
}

const flow::FlowHistory& bumpy_history() {
  static const auto h = evolve(bumpy(32), 0.0, 0.05);
  return h;
}

const flow::FlowHistory& hyperbolic_history() {
  static const auto h = evolve(hyperbolic(), 0.0, 10.0);
  return h;
}

}  // namespace

TEST_CASE("reduced length of explicit paths") {
  const auto h = evolve(flat(8, 4.0), 0.0, 2.0);
  const auto g = make_geometry(h, 0.0);
  const double d = 1.0, t = 1.5;
  SUBCASE("constant speed straight path") {
    PathSample p;
    for (int k = 0; k <= 7; ++k) {
      const double eta = t * k / 7.0;
      p.eta.push_back(eta);
      p.position.push_back({d * eta / t, 0.0});
    }
    CHECK(L_plus_of_path(*g, p) == doctest::Approx(2.0 / 3.0 * d * d / std::sqrt(t)).epsilon(1e-13));
  }
  SUBCASE("optimal square-root profile") {
    PathSample p;
    const int M = 2000;
    for (int k = 0; k <= M; ++k) {
      const double eta = t * std::pow(static_cast<double>(k) / M, 2);
      p.eta.push_back(eta);
      p.position.push_back({d * std::sqrt(eta / t), 0.0});
    }
    CHECK(L_plus_of_path(*g, p) == doctest::Approx(d * d / (2.0 * std::sqrt(t))).epsilon(1e-4));
  }
  SUBCASE("the head below epsilon is the curvature bound") {
    const auto& hh = hyperbolic_history();
    const auto gh = make_geometry(hh, hh.birth_time());
    PathSample p;
    p.epsilon = 1e-4;
    for (int k = 0; k <= 4000; ++k) {
      p.eta.push_back(1e-4 * std::pow(1e4, k / 4000.0));
      p.position.push_back({0.0, 0.0});
    }
    // R = -3/2η exactly, so ∫√η R over [ε, 1] is -3(1 - √ε) and the head adds -3√ε
    CHECK(L_plus_of_path(*gh, p) == doctest::Approx(-3.0).epsilon(1e-4));
  }
  SUBCASE("no path beats the curvature lower bound") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> U(-0.5, 0.5);
    const auto gb = make_geometry(bumpy_history(), 0.0);
    for (int r = 0; r < 20; ++r) {
      PathSample p;
      const double tau = 0.01 + 0.04 * (U(rng) + 0.5);
      for (int k = 0; k <= 40; ++k) {
        p.eta.push_back(tau * k / 40.0);
        p.position.push_back({0.5 + U(rng) * 0.2, 0.5 + U(rng) * 0.2});
      }
      CHECK(L_plus_of_path(*gb, p) >= -2.0 * std::sqrt(tau));
    }
  }
  SUBCASE("paths must stay in the history and start at epsilon") {
    PathSample p;
    p.eta = {0.0, 5.0};
    p.position = {{0.0, 0.0}, {1.0, 0.0}};
    CHECK_THROWS_AS((void)L_plus_of_path(*g, p), std::out_of_range);
    p.eta = {0.1, 1.0};
    CHECK_THROWS_AS((void)L_plus_of_path(*g, p), std::invalid_argument);
  }
}

TEST_CASE("geodesic shooting") {
  SUBCASE("flat: square-root profile with constant momentum") {
    const auto h = evolve(flat(8), 0.0, 1.0);
    const auto g = make_geometry(h, 0.0);
    const Point c{0.3, -0.2};
    const auto sol = geodesic_shoot(*g, {0.1, 0.2}, c, 0.8);
    REQUIRE(sol.ok);
    for (std::size_t k = 1; k < sol.X.size(); ++k) {
      const double eta = sol.path.eta[k];
      CHECK(sol.path.position[k][0] == doctest::Approx(0.1 + 2.0 * c[0] * std::sqrt(eta)));
      CHECK(sol.X[k][1] * std::sqrt(eta) == doctest::Approx(c[1]));
      CHECK(std::abs(sol.H[k]) < 1e-14);
    }
    const double d2 = 4.0 * 0.8 * (c[0] * c[0] + c[1] * c[1]);
    CHECK(sol.L_plus == doctest::Approx(d2 / (2.0 * std::sqrt(0.8))).epsilon(1e-12));
    CHECK(std::abs(sol.K) < 1e-14);
    CHECK(std::abs(sol.identity_residual) < 1e-14);
  }
  SUBCASE("hyperbolic expander: speed concentrates like eta^(-3/2)") {
    const auto& h = hyperbolic_history();
    const auto g = make_geometry(h, h.birth_time());
    const double eps = 1e-3;
    const auto sol = geodesic_shoot(*g, {0.0, 0.0}, {2.0, 0.0}, 2.0, {eps});
    REQUIRE(sol.ok);
    const double C = 4.0 * eps * 2.0 / 4.0;  // a(ε)P(ε)/4
    for (std::size_t k = 0; k < sol.X.size(); ++k) {
      const double eta = sol.path.eta[k];
      CHECK(sol.X[k][0] * std::pow(eta, 1.5) == doctest::Approx(C).epsilon(1e-9));
      // R_t and R/η cancel, 2Rc(X,X) = -4|X|²
      CHECK(sol.H[k] == doctest::Approx(-4.0 * sol.X[k][0] * sol.X[k][0]).epsilon(1e-9));
    }
    CHECK(std::abs(sol.identity_residual) < 1e-6);
  }
  SUBCASE("endpoint gradient is 2 sqrt(t) X") {
    const auto g = make_geometry(bumpy_history(), 0.0);
    const double tau = 0.03, hstep = 1e-4;
    const Point y{0.8, 0.6};
    const auto v = shoot_to(*g, {0.5, 0.5}, y, tau);
    for (int d = 0; d < 2; ++d) {
      Point a = y, b = y;
      a[d] -= hstep;
      b[d] += hstep;
      const double fd = (shoot_to(*g, {0.5, 0.5}, b, tau).L - shoot_to(*g, {0.5, 0.5}, a, tau).L) /
                        (2.0 * hstep);
      CHECK(std::abs(fd - v.differential[d]) <= 1e-4 * std::abs(v.differential[d]));
    }
  }
  SUBCASE("first variation vanishes along a computed geodesic") {
    const auto g = make_geometry(bumpy_history(), 0.0);
    const double tau = 0.04;
    const auto v = shoot_to(*g, {0.5, 0.5}, {0.75, 0.3}, tau);
    const auto sol = geodesic_shoot(*g, {0.5, 0.5}, v.momentum, tau);
    auto perturbed = [&](double amp) {
      PathSample p = sol.path;
      for (std::size_t k = 0; k < p.eta.size(); ++k) {
        const double bump = std::sin(kPi * p.eta[k] / tau);
        p.position[k][0] += amp * bump;
        p.position[k][1] += 0.5 * amp * bump;
      }
      return L_plus_of_path(*g, p);
    };
    const double base = perturbed(0.0);
    const double d1 = perturbed(0.01) - base, d2 = perturbed(0.02) - base;
    CHECK(d1 > 0.0);
    CHECK(d2 / d1 == doctest::Approx(4.0).epsilon(0.05));
  }
  SUBCASE("bad input") {
    const auto g = make_geometry(bumpy_history(), 0.0);
    CHECK_THROWS_AS((void)geodesic_shoot(*g, {0, 0}, {NAN, 0.0}, 0.01), std::invalid_argument);
    CHECK_THROWS_AS((void)geodesic_shoot(*g, {0, 0}, {0.0, 0.0}, 1.0), std::out_of_range);
  }
}

TEST_CASE("reduced distance fields") {
  SUBCASE("flat torus: squared torus distance over 4t") {
    const auto h = evolve(flat(8), 0.0, 1.0);
    const Point base{0.15, 0.2};
    std::vector<Target> targets;
    for (double x : {0.0, 0.4, 0.9}) {
      for (double y : {0.05, 0.75}) targets.push_back({{x, y}, 0.3});
    }
    const auto f = ell_plus_field(h, 0.0, base, targets);
    for (const auto& p : f.points) {
      CHECK(p.ell == doctest::Approx(torus_dist_sq(base, p.target.y) / (4.0 * 0.3)).epsilon(1e-9));
      CHECK(p.L_bar == doctest::Approx(4.0 * 0.3 * p.ell));
    }
    CHECK(f.oracle_ok);
    CHECK(f.fallbacks == 0);
  }
  SUBCASE("hyperbolic vertex: closed form per epsilon, -3/2 in the limit") {
    const auto& h = hyperbolic_history();
    const auto f = ell_plus_field(h, h.birth_time(), {0, 0}, {{{0.4, 0.0}, 0.75}, {{1.5, 0.0}, 4.0}});
    REQUIRE(f.epsilons.size() == 3);
    for (const auto& p : f.points) {
      for (std::size_t i = 0; i < 3; ++i) {
        CHECK(p.ell_by_epsilon[i] ==
              doctest::Approx(hyperbolic_ell(p.target.y[0], p.tau, f.epsilons[i])).epsilon(1e-9));
      }
      CHECK(std::abs(p.ell + 1.5) < 1e-2);
      CHECK(p.ell >= -1.5 - 1e-6);
    }
    CHECK(f.oracle_ok);
  }
  SUBCASE("bumpy torus: oracle agreement and the lower bound") {
    std::vector<Target> targets;
    for (double x : {0.1, 0.45, 0.8}) {
      for (double y : {0.2, 0.65}) targets.push_back({{x, y}, 0.04});
    }
    const auto f = ell_plus_field(bumpy_history(), 0.0, {0.5, 0.5}, targets);
    CHECK(f.max_oracle_gap <= 1e-3);
    CHECK(f.max_identity_residual <= 1e-6);
    CHECK(f.min_ell >= -1.0 - 1e-6);
    for (const auto& p : f.points) CHECK(p.oracle_gap >= -1e-6);  // the oracle is an upper bound
  }
  SUBCASE("extrapolation is exact for quadratics in sqrt(eps)") {
    const std::vector<double> eps{1e-3, 1e-4, 1e-5};
    std::vector<double> v;
    for (double e : eps) v.push_back(2.0 - 3.0 * std::sqrt(e) + 5.0 * e);
    CHECK(extrapolate_epsilon(eps, v) == doctest::Approx(2.0).epsilon(1e-12));
  }
  SUBCASE("homogeneous flows are not supported") {
    geometry::HomogeneousMetric nil;
    nil.structure = {1.0, 0.0, 0.0};
    const auto h = evolve(nil, 0.0, 1.0);
    CHECK_THROWS_AS((void)ell_plus_field(h, 0.0, {0, 0}, {{{0.1, 0.0}, 0.5}}), UnsupportedModel);
  }
}

TEST_CASE("path oracle") {
  const auto h = evolve(flat(8, 4.0), 0.0, 2.0);
  const auto g = make_geometry(h, 0.0);
  SUBCASE("flat unit distance at unit time") {
    CHECK(path_minimization_oracle(*g, {0, 0}, {1, 0}, 1.0).L == doctest::Approx(0.5).epsilon(1e-3));
  }
  SUBCASE("without descent it reproduces the constant-speed value") {
    OracleOptions o;
    o.descend = false;
    CHECK(path_minimization_oracle(*g, {0, 0}, {1, 0}, 1.0, o).L ==
          doctest::Approx(2.0 / 3.0).epsilon(1e-3));
  }
}

TEST_CASE("gradient and time identities, inequalities") {
  SUBCASE("flat: equality away from the cut locus") {
    const auto h = evolve(flat(8), 0.0, 1.0);
    const auto r = check_identities(h, 0.0, {0.5, 0.5}, {{{0.7, 0.6}, 0.3}, {{0.2, 0.4}, 0.6}});
    CHECK(r.excluded_fraction == 0.0);
    for (const auto& row : r.rows) {
      CHECK(std::abs(row.gradient_identity) < 1e-8);
      CHECK(std::abs(row.time_identity) < 1e-8);
      CHECK(std::abs(row.supersolution) < 1e-8);
      CHECK(std::abs(row.v_like) < 1e-8);
      CHECK(row.lap == doctest::Approx(1.0 / row.tau));  // n/2t with n = 2
    }
  }
  SUBCASE("flat: the cut locus is detected") {
    const auto h = evolve(flat(8), 0.0, 1.0);
    const auto r = check_identities(h, 0.0, {0.5, 0.5}, {{{0.0, 0.3}, 0.3}, {{0.7, 0.6}, 0.3}});
    CHECK_FALSE(r.rows[0].smooth);
    CHECK(r.rows[1].smooth);
    CHECK(r.excluded_fraction == doctest::Approx(0.5));
  }
  SUBCASE("hyperbolic expander from the vertex") {
    const auto& h = hyperbolic_history();
    const auto r = check_identities(h, h.birth_time(), {0, 0}, {{{0.3, 0}, 0.5}, {{1.0, 0}, 2.0}});
    CHECK(r.identities_ok);
    CHECK(r.inequalities_ok);
  }
  SUBCASE("bumpy torus") {
    const auto r = check_identities(bumpy_history(), 0.0, {0.5, 0.5},
                                    {{{0.7, 0.6}, 0.03}, {{0.35, 0.8}, 0.02}});
    CHECK(r.excluded_fraction == 0.0);
    CHECK(r.identities_ok);
    CHECK(r.inequalities_ok);
    for (const auto& row : r.rows) CHECK(row.u_hat_residual <= 1e-4);
  }
}

TEST_CASE("forward reduced volume") {
  SUBCASE("flat torus: grid sum of the heat kernel weight") {
    const auto h = evolve(flat(8), 0.0, 1.0);
    ThetaOptions o;
    o.torus_resolution = 8;
    const std::vector<double> times{0.1, 0.3, 1.0};
    const auto s = theta_plus(h, 0.0, {0.5, 0.5}, times, o);
    for (std::size_t k = 0; k < times.size(); ++k) {
      double sum = 0.0;
      for (int j = 0; j < 8; ++j) {
        for (int i = 0; i < 8; ++i) {
          sum += std::exp(torus_dist_sq({0.5, 0.5}, {i / 8.0, j / 8.0}) / (4.0 * times[k])) / 64.0;
        }
      }
      CHECK(s.theta[k] == doctest::Approx(sum / (4.0 * kPi * times[k])).epsilon(1e-9));
    }
    CHECK(s.nonincreasing);
    CHECK(s.above_bound);
  }
  SUBCASE("hyperbolic expander from the vertex is constant and matches nu_plus") {
    const auto& h = hyperbolic_history();
    const auto s = theta_plus(h, h.birth_time(), {0, 0}, {0.1, 1.0, 10.0});
    const double nu = entropy::nu_plus(h.metric(1.0)).value;
    for (double th : s.theta) {
      CHECK(th == doctest::Approx(kHyperbolicTheta).epsilon(1e-2));
      CHECK(std::abs(std::log(th) + nu) <= 1e-2);
    }
    CHECK(s.above_bound);
  }
  SUBCASE("hyperbolic expander off the vertex decreases") {
    const auto& h = hyperbolic_history();
    const auto s = theta_plus(h, 0.0, {0, 0}, {0.25, 1.0, 4.0});
    CHECK(s.nonincreasing);
    CHECK(s.theta.front() > s.theta.back() * (1.0 + 1e-3));
  }
  SUBCASE("bumpy torus") {
    ThetaOptions o;
    o.torus_resolution = 6;
    const auto s = theta_plus(bumpy_history(), 0.0, {0.5, 0.5}, {0.02, 0.035, 0.05}, o);
    CHECK(s.nonincreasing);
    CHECK(s.above_bound);
    CHECK(s.fallbacks == 0);
  }
  SUBCASE("ball radius of a full round sphere") {
    CHECK(model_ball_radius(3, 1, 2.0 * kPi * kPi) == doctest::Approx(kPi));
    // hyperbolic unit volume: 2π(sinh r cosh r - r) = 1
    const double r = model_ball_radius(3, -1, 1.0);
    CHECK(2.0 * kPi * (std::sinh(r) * std::cosh(r) - r) == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("Hessian bound under nonnegative curvature") {
  SUBCASE("flat torus attains equality") {
    const auto h = evolve(flat(8), 0.0, 1.0);
    const auto r = hessian_check(h, 0.0, {0.5, 0.5}, {{{0.7, 0.6}, 0.3}});
    REQUIRE_FALSE(r.refused);
    for (const auto& row : r.rows) {
      CHECK(row.bound == doctest::Approx(1.0 / std::sqrt(0.3)));
      CHECK(std::abs(row.margin) < 1e-6);
    }
  }
  SUBCASE("shrinking round sphere") {
    const auto h = evolve(round_sphere(), 0.0, 0.2);
    const auto r = hessian_check(h, 0.0, {0, 0}, {{{0.4, 0}, 0.05}, {{1.5, 0}, 0.15}});
    REQUIRE_FALSE(r.refused);
    CHECK(r.ok);
    CHECK(r.min_margin >= -1e-3);
  }
  SUBCASE("negative curvature is refused") {
    const auto& h = hyperbolic_history();
    const auto r = hessian_check(h, h.birth_time(), {0, 0}, {{{0.4, 0}, 1.0}});
    CHECK(r.refused);
    CHECK_FALSE(r.ok);
    CHECK(r.reason.find("precondition not met") != std::string::npos);
    CHECK(hessian_check(bumpy_history(), 0.0, {0.5, 0.5}, {{{0.6, 0.6}, 0.02}}).refused);
  }
}

TEST_CASE("blowdown invariance") {
  const double alpha = 4.0;
  SUBCASE("bumpy torus") {
    const auto& h = bumpy_history();
    const auto hb = h.blowdown(alpha);
    const auto a = ell_plus_field(h, 0.0, {0.5, 0.5}, {{{0.7, 0.2}, 0.04}}, {{}, false});
    const auto b = ell_plus_field(hb, 0.0, {0.5, 0.5}, {{{0.7, 0.2}, 0.04 / alpha}}, {{}, false});
    CHECK(std::abs(a.points[0].ell - b.points[0].ell) < 1e-6);
    ThetaOptions o;
    o.torus_resolution = 4;
    const auto ta = theta_plus(h, 0.0, {0.5, 0.5}, {0.04}, o);
    const auto tb = theta_plus(hb, 0.0, {0.5, 0.5}, {0.04 / alpha}, o);
    CHECK(ta.theta[0] == doctest::Approx(tb.theta[0]).epsilon(1e-6));
  }
  SUBCASE("hyperbolic expander") {
    const auto& h = hyperbolic_history();
    const auto hb = h.blowdown(alpha);
    const auto a = theta_plus(h, h.birth_time(), {0, 0}, {2.0});
    const auto b = theta_plus(hb, hb.birth_time(), {0, 0}, {2.0 / alpha});
    CHECK(a.theta[0] == doctest::Approx(b.theta[0]).epsilon(1e-6));
  }
}

TEST_CASE("reduced exports are deterministic") {
  const auto h = evolve(flat(8), 0.0, 1.0);
  const auto f1 = ell_plus_field(h, 0.0, {0.5, 0.5}, {{{0.2, 0.1}, 0.5}}, {{}, false});
  const auto f2 = ell_plus_field(h, 0.0, {0.5, 0.5}, {{{0.2, 0.1}, 0.5}}, {{}, false});
  CHECK(field_csv(f1) == field_csv(f2));
  const auto g = make_geometry(h, 0.0);
  const auto sol = geodesic_shoot(*g, {0.5, 0.5}, {0.1, 0.0}, 0.5);
  const auto csv = geodesic_csv(*g, sol);
  CHECK(csv.rfind("eta,x,y,X_x,X_y,integrand,H\n", 0) == 0);
}
