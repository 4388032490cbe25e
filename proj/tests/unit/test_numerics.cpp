#include <doctest.h>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <cmath>
#include <numbers>
#include <random>

#include "rflab/geometry/metric.hpp"
#include "rflab/numerics/eigen.hpp"
#include "rflab/numerics/fd_check.hpp"
#include "rflab/numerics/ode.hpp"
#include "rflab/numerics/optimize.hpp"

using namespace rflab;
using namespace rflab::numerics;

namespace {

OdeOptions tight() {
  OdeOptions o;
  o.tol = ToleranceConfig{1e-13, 1e-13, 1000, 1e-4};
  return o;
}

// Periodic 1-D operator -4Δ + R with unit weights.
LinearOperator periodic_1d(int n, double h, const Field& R) {
  return [n, h, R](std::span<const double> x, std::span<double> y) {
    for (int i = 0; i < n; ++i) {
      const double l = (x[(i + 1) % n] - 2.0 * x[i] + x[(i + n - 1) % n]) / (h * h);
      y[i] = -4.0 * l + R[i] * x[i];
    }
  };
}

}  // namespace

TEST_CASE("tolerance config rejects non-positive entries") {
  CHECK_THROWS_AS((ToleranceConfig{0.0, 1e-8, 10, 1e-4}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((ToleranceConfig{1e-8, 1e-8, 0, 1e-4}.validate()), std::invalid_argument);
  CHECK_NOTHROW(ToleranceConfig{}.validate());
}

TEST_CASE("time series requires strictly increasing times") {
  CHECK_THROWS_AS(TimeSeries({0.0, 0.0}, {1.0, 2.0}), std::invalid_argument);
  CHECK_THROWS_AS(TimeSeries({0.0, 1.0}, {1.0}), std::invalid_argument);
  TimeSeries s({0.0, 1.0}, {0.0, 2.0});
  CHECK(s.interpolate(0.25) == doctest::Approx(0.5));
}

TEST_CASE("exponential growth reaches e") {
  auto traj = integrate_ode([](double, std::span<const double> y, std::span<double> d) { d[0] = y[0]; },
                            {1.0}, 0.0, 1.0, tight());
  REQUIRE(traj.ok());
  CHECK(std::abs(traj.final_state()[0] - std::exp(1.0)) < 1e-9);
}

TEST_CASE("linear scale ODE is exact") {
  auto traj = integrate_ode([](double, std::span<const double>, std::span<double> d) { d[0] = 4.0; },
                            {1.0}, 0.0, 3.0, tight());
  for (std::size_t k = 0; k < traj.t.size(); ++k) {
    CHECK(std::abs(traj.y[k][0] - (1.0 + 4.0 * traj.t[k])) < 1e-13);
  }
  CHECK(std::abs(traj.at(1.2345)[0] - (1.0 + 4.0 * 1.2345)) < 1e-13);
}

TEST_CASE("Milnor-frame Nil flow matches the closed form") {
  geometry::HomogeneousMetric frame;
  frame.structure = {1.0, 0.0, 0.0};
  const double A0 = 1.3, B0 = 0.7, C0 = 1.1;
  const OdeRhs rhs = [frame](double, std::span<const double> y, std::span<double> d) {
    auto m = frame;
    m.diag = {y[0], y[1], y[2]};
    const auto r = geometry::curvature_homogeneous(m).principal[0];
    for (int i = 0; i < 3; ++i) d[i] = -2.0 * r[i] * y[i];
  };
  OdeOptions o = tight();
  for (int k = 1; k <= 10; ++k) o.stops.push_back(k);
  const auto traj = integrate_ode(rhs, {A0, B0, C0}, 0.0, 10.0, o);
  REQUIRE(traj.ok());
  // x0 = A/(BC) drives the whole solution: A ~ s^{-1/3}, B, C ~ s^{1/3}
  const double x0 = A0 / (B0 * C0);
  double worst = 0.0;
  for (std::size_t k = 0; k < traj.t.size(); ++k) {
    const double s = 1.0 + 3.0 * x0 * traj.t[k];
    worst = std::max({worst, std::abs(traj.y[k][0] - A0 * std::cbrt(1.0 / s)),
                      std::abs(traj.y[k][1] - B0 * std::cbrt(s)),
                      std::abs(traj.y[k][2] - C0 * std::cbrt(s))});
  }
  CHECK(worst < 1e-7);
}

TEST_CASE("linear autonomous systems reproduce the matrix exponential") {
  std::mt19937 rng(7);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::Matrix3d M;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) M(i, j) = 0.5 * nd(rng);
    Eigen::Vector3d y0(nd(rng), nd(rng), nd(rng));
    const OdeRhs rhs = [M](double, std::span<const double> y, std::span<double> d) {
      Eigen::Map<const Eigen::Vector3d> yy(y.data());
      Eigen::Map<Eigen::Vector3d>(d.data()) = M * yy;
    };
    OdeOptions o;
    o.tol = ToleranceConfig{1e-12, 1e-11, 1000, 1e-4};
    const auto traj = integrate_ode(rhs, {y0[0], y0[1], y0[2]}, 0.0, 2.0, o);
    const Eigen::Vector3d exact = (2.0 * M).exp() * y0;
    for (int i = 0; i < 3; ++i) {
      CHECK(std::abs(traj.final_state()[i] - exact[i]) <= 1e-8 * (1.0 + std::abs(exact[i])));
    }
  }
}

TEST_CASE("blow-up ends the run with a last valid time") {
  auto traj = integrate_ode(
      [](double, std::span<const double> y, std::span<double> d) { d[0] = y[0] * y[0]; }, {1.0},
      0.0, 2.0, tight());
  CHECK_FALSE(traj.ok());
  CHECK(traj.last_valid_time < 1.0);
  CHECK(traj.last_valid_time > 0.99);
  CHECK_FALSE(traj.diagnostic.empty());
}

TEST_CASE("ground state of -4Δ + R") {
  const int n = 64;
  const double h = 1.0 / n;
  const Field w(n, h);
  ToleranceConfig tol{1e-10, 1e-10, 500, 1e-4};
  SUBCASE("flat") {
    const auto ep = smallest_eigenpair(periodic_1d(n, h, Field(n, 0.0)), w, 0.0, tol);
    CHECK(std::abs(ep.value) < 1e-10);
    for (double v : ep.vector) CHECK(v == doctest::Approx(1.0).epsilon(1e-8));
  }
  SUBCASE("constant potential") {
    const auto ep = smallest_eigenpair(periodic_1d(n, h, Field(n, -6.0)), w, -6.0, tol);
    CHECK(std::abs(ep.value + 6.0) < 1e-10);
  }
  SUBCASE("first nonzero eigenvalue agrees with a dense solve") {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      A(i, i) = 8.0 / (h * h);
      A(i, (i + 1) % n) -= 4.0 / (h * h);
      A(i, (i + n - 1) % n) -= 4.0 / (h * h);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    const double dense = es.eigenvalues()[1];
    EigenOptions opt;
    opt.deflation = {Field(n, 1.0)};
    for (int i = 0; i < n; ++i) opt.initial.push_back(std::cos(2.0 * std::numbers::pi * i / n) + 0.01 * i);
    ToleranceConfig t2{1e-7, 1e-10, 5000, 1e-4};
    const auto ep = smallest_eigenpair(periodic_1d(n, h, Field(n, 0.0)), w, 0.0, t2, opt);
    CHECK(std::abs(ep.value - dense) < 1e-10 * std::max(1.0, dense));
  }
  SUBCASE("Rayleigh bound against random fields") {
    Field R(n);
    for (int i = 0; i < n; ++i) R[i] = std::sin(2.0 * std::numbers::pi * i / n) - 0.3;
    const auto op = periodic_1d(n, h, R);
    const auto ep = smallest_eigenpair(op, w, -1.3, tol);
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> ud(0.1, 1.0);
    for (int k = 0; k < 20; ++k) {
      Field f(n), af(n);
      for (double& v : f) v = ud(rng);
      const double nn = std::sqrt(weighted_dot(f, f, w));
      for (double& v : f) v /= nn;
      op(f, af);
      CHECK(ep.value <= weighted_dot(f, af, w) + 1e-12);
    }
  }
  SUBCASE("no convergence carries the residual history") {
    Field R(n);
    for (int i = 0; i < n; ++i) R[i] = 50.0 * std::sin(2.0 * std::numbers::pi * i / n);
    ToleranceConfig t3{1e-15, 1e-10, 1, 1e-4};
    try {
      (void)smallest_eigenpair(periodic_1d(n, h, R), w, -50.0, t3);
      FAIL("expected a convergence error");
    } catch (const ConvergenceError& e) {
      CHECK(e.residual_history.size() == 2);
    }
  }
}

TEST_CASE("concave maximization") {
  ToleranceConfig tol{1e-9, 1e-9, 500, 1e-4};
  SUBCASE("quadratic") {
    const auto r = maximize_concave_1d([](double s) { return -(s - 1.0) * (s - 1.0); }, {0.1, 0.5}, tol);
    CHECK(std::abs(r.argmax - 1.0) < 1e-8);
    CHECK_FALSE(r.unbounded);
  }
  SUBCASE("hyperbolic profile peaks at a quarter") {
    const auto f = [](double s) { return -6.0 * s + 1.5 * std::log(s) + 2.0; };
    const auto r = maximize_concave_1d(f, {1e-3, 10.0}, tol);
    CHECK(std::abs(r.argmax - 0.25) < 1e-8);
    CHECK_FALSE(r.concavity_warning);
    double best = -1e300;
    for (int i = 0; i < 100; ++i) best = std::max(best, f(1e-3 + (10.0 - 1e-3) * i / 99.0));
    CHECK(r.value >= best - tol.abs_tol);
  }
  SUBCASE("monotone profile is unbounded") {
    const auto r = maximize_concave_1d([](double s) { return std::log(s); }, {0.1, 1.0}, tol);
    CHECK(r.unbounded);
  }
  SUBCASE("convex profile warns") {
    const auto r = maximize_concave_1d([](double s) { return -std::abs(s - 2.0) + 0.3 * std::cos(8 * s); },
                                       {0.5, 4.0}, tol);
    CHECK(r.concavity_warning);
  }
}

TEST_CASE("constrained minimization keeps the constraint and descends") {
  // Rayleigh quotient of a diagonal matrix on the unit sphere
  const Field d{3.0, 1.0, 2.0, 5.0};
  ConstrainedProblem p;
  p.inner = [](const Field& a, const Field& b) { return weighted_dot(a, b, {}); };
  p.normalize = [&](const Field& w) {
    Field o = w;
    const double n = std::sqrt(p.inner(w, w));
    for (double& v : o) v /= n;
    return o;
  };
  p.functional = [&](const Field& w) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += d[i] * w[i] * w[i];
    return s;
  };
  p.gradient = [&](const Field& w) {
    Field g(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) g[i] = 2.0 * d[i] * w[i];
    return g;
  };
  const Field w0{0.5, 0.5, 0.5, 0.5};
  const auto r = minimize_constrained(p, w0, ToleranceConfig{1e-9, 1e-9, 5000, 1e-4});
  CHECK(r.converged);
  CHECK(r.value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p.inner(r.minimizer, r.minimizer) == doctest::Approx(1.0));
  CHECK(r.value <= p.functional(p.normalize(w0)));
}

TEST_CASE("finite-difference verification kit") {
  SUBCASE("exact identity") {
    const std::vector<double> hs{0.1, 0.05};
    const auto rep = fd_residual([](std::size_t) { return Field{1.0, 2.0}; },
                                 [](std::size_t) { return Field{1.0, 2.0}; }, hs);
    CHECK(rep.exact);
    CHECK(rep.max_residual[0] == 0.0);
  }
  SUBCASE("second-order centered difference") {
    const std::vector<double> hs{0.02, 0.01};
    auto lhs = [&](std::size_t k) {
      Field out;
      const double h = hs[k];
      for (int i = 0; i < 20; ++i) {
        const double x = 0.05 * i;
        out.push_back((std::sin(x + h) - std::sin(x - h)) / (2.0 * h));
      }
      return out;
    };
    auto rhs = [](std::size_t) {
      Field out;
      for (int i = 0; i < 20; ++i) out.push_back(std::cos(0.05 * i));
      return out;
    };
    const auto rep = fd_residual(lhs, rhs, hs);
    const double ratio = rep.max_residual[0] / rep.max_residual[1];
    CHECK(std::abs(ratio - 4.0) < 0.8);
    CHECK(rep.decaying);
  }
  SUBCASE("non-identity is flagged") {
    const std::vector<double> hs{0.1, 0.05, 0.025};
    const auto rep = fd_residual([](std::size_t) { return Field{1.0}; },
                                 [](std::size_t) { return Field{1.5}; }, hs);
    CHECK_FALSE(rep.decaying);
    CHECK_FALSE(rep.exact);
  }
}
