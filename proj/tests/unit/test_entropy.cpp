#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "rflab/entropy/entropy.hpp"
#include "rflab/entropy/report.hpp"
#include "rflab/geometry/serialize.hpp"

using namespace rflab;
using namespace rflab::entropy;
using flow::evolve;
using geometry::ConformalTorusMetric;
using geometry::HomogeneousMetric;
using geometry::ModelSpaceMetric;

namespace {

constexpr double kPi = std::numbers::pi;
// 3/2 + (3/2) log π: hyperbolic expander entropy from the vertex
const double kHyperbolicW = 1.5 + 1.5 * std::log(kPi);

ModelSpaceMetric hyperbolic() { return {3, -1, 1.0, 1.0}; }

HomogeneousMetric nil() {
  HomogeneousMetric m;
  m.structure = {1.0, 0.0, 0.0};
  return m;
}

ConformalTorusMetric bumpy(int n) { return geometry::torus_from_modes(n, 1.0, {{0.3, 1.0, 0.0, 0.0}}); }

Field unit_mass(Field u, const MetricModel& m) {
  const double mass = weighted_sum(u, geometry::measure(m));
  for (double& v : u) v /= mass;
  return u;
}

Field random_density(const MetricModel& m, std::mt19937& rng) {
  std::uniform_real_distribution<double> amp(-0.4, 0.4), ph(0.0, 2.0 * kPi);
  const auto& g = std::get<ConformalTorusMetric>(m).grid;
  const double a = amp(rng), b = amp(rng), p = ph(rng), q = ph(rng);
  const int kx = 1 + static_cast<int>(rng() % 3), ky = static_cast<int>(rng() % 3);
  Field u(g.size());
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      u[g.index(i, j)] = 1.0 + a * std::sin(2 * kPi * kx * g.x(i) + p) +
                         b * std::cos(2 * kPi * (g.x(i) + ky * g.y(j)) + q);
    }
  }
  return unit_mass(u, m);
}

}  // namespace

TEST_CASE("F functional") {
  SUBCASE("flat torus uniform density") {
    const MetricModel m = geometry::torus_from_modes(16, 1.0, {});
    CHECK(F_functional(m, Field(256, 1.0)) == doctest::Approx(0.0));
  }
  SUBCASE("hyperbolic slices carry F = R") {
    const auto h = evolve(hyperbolic(), 0.0, 10.0);
    for (double t : {0.0, 0.5, 9.0}) {
      const auto m = h.metric(t);
      CHECK(F_functional(m, {1.0 / geometry::volume(m)}) == doctest::Approx(-6.0 / (1.0 + 4.0 * t)).epsilon(1e-14));
    }
  }
  SUBCASE("Fisher information of a cosine profile converges at second order") {
    // u = 1 + ε cos 2πx on the unit flat torus: ∫u'²/u = 4π²(1 - √(1-ε²))... oracle by quadrature
    const double eps = 0.5;
    auto exact = [&] {
      const int q = 200000;
      double s = 0.0;
      for (int i = 0; i < q; ++i) {
        const double x = (i + 0.5) / q;
        const double u = 1.0 + eps * std::cos(2 * kPi * x);
        const double du = -2 * kPi * eps * std::sin(2 * kPi * x);
        s += du * du / u;
      }
      return s / q;
    }();
    std::vector<double> err;
    for (int n : {32, 64}) {
      const auto m = geometry::torus_from_modes(n, 1.0, {});
      Field u(n * n);
      const auto& g = m.grid;
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) u[g.index(i, j)] = 1.0 + eps * std::cos(2 * kPi * g.x(i));
      err.push_back(std::abs(F_functional(m, u) - exact));
    }
    CHECK(err[0] < 0.05 * exact);
    CHECK(err[0] / err[1] == doctest::Approx(4.0).epsilon(0.1));
  }
  CHECK_THROWS_AS(F_functional(geometry::torus_from_modes(16, 1.0, {}), Field(256, 2.0)), std::invalid_argument);
}

TEST_CASE("Nash entropy and Jensen") {
  const MetricModel m = bumpy(32);
  const double V = geometry::volume(m);
  CHECK(nash_entropy(m, Field(1024, 1.0 / V), 1.0).N == doctest::Approx(-std::log(V)).epsilon(1e-13));
  std::mt19937 rng(7);
  for (int k = 0; k < 20; ++k) {
    const auto u = random_density(m, rng);
    CHECK(nash_entropy(m, u, 1.0).N >= -std::log(V) - 1e-12);
  }
  const auto nn = nash_entropy(m, Field(1024, 1.0 / V), 0.3);
  CHECK(nn.N_plus - nn.N == doctest::Approx(std::log(4 * kPi * 0.3) + 1.0));
}

TEST_CASE("expander entropy") {
  SUBCASE("homogeneous closed form") {
    const auto h = evolve(nil(), 0.0, 5.0);
    const auto m = h.metric(2.0);
    const double V = geometry::volume(m), R = geometry::curvature(m).scalar[0];
    const double sigma = 1.7;
    CHECK(W_plus(m, {1.0 / V}, sigma) ==
          doctest::Approx(sigma * R - std::log(V) + 1.5 * std::log(4 * kPi * sigma) + 3.0).epsilon(1e-13));
  }
  SUBCASE("hyperbolic expander is constant from its vertex") {
    const auto h = evolve(hyperbolic(), 0.0, 100.0);
    for (double t : {0.1, 1.0, 10.0, 100.0}) {
      const auto m = h.metric(t);
      CHECK(std::abs(W_plus(m, {1.0 / geometry::volume(m)}, t + 0.25) - kHyperbolicW) < 1e-12);
    }
    CHECK(std::abs(kHyperbolicW - 3.21709) < 1e-5);
  }
  SUBCASE("flat torus grows like (n/2) log t") {
    const MetricModel m = geometry::torus_from_modes(16, 2.0, {});
    const double V = 4.0;
    for (double t : {0.5, 2.0}) {
      CHECK(W_plus(m, Field(256, 1.0 / V), t) == doctest::Approx(-std::log(V) + std::log(4 * kPi * t) + 2.0));
      CHECK(expander_residual_rhs(m, Field(256, 1.0 / V), t) == doctest::Approx(1.0 / t).epsilon(1e-12));
    }
  }
  SUBCASE("decomposition and the pointwise form") {
    std::vector<double> gaps;
    for (int n : {64, 128}) {
      const MetricModel m = bumpy(n);
      std::mt19937 r2(11);
      const auto u = random_density(m, r2);
      const double sigma = 0.7;
      const auto nn = nash_entropy(m, u, sigma);
      const double F = F_functional(m, u);
      CHECK(W_plus(m, u, sigma) == doctest::Approx(sigma * (F + 1.0 / sigma) + nn.N_plus).epsilon(1e-12));
      gaps.push_back(std::abs(W_plus(m, u, sigma) - W_plus_pointwise(m, u, sigma)));
    }
    MESSAGE("pointwise form gaps " << gaps[0] << " " << gaps[1]);
    CHECK(gaps[0] / gaps[1] > 3.0);
  }
  SUBCASE("scale invariance") {
    const MetricModel m = bumpy(32);
    std::mt19937 rng(5);
    const auto u = random_density(m, rng);
    for (double a : {0.5, 3.0}) {
      const auto ma = geometry::scale_metric(m, a);
      Field ua = u;
      for (double& v : ua) v /= a;  // n = 2
      CHECK(W_plus(ma, ua, a * 0.4) == doctest::Approx(W_plus(m, u, 0.4)).epsilon(1e-12));
      CHECK(expander_residual_rhs(ma, ua, a * 0.4) * a ==
            doctest::Approx(expander_residual_rhs(m, u, 0.4)).epsilon(1e-10));
    }
  }
}

TEST_CASE("monotonicity integrand") {
  const auto h = evolve(hyperbolic(), 0.0, 10.0);
  for (double t : {0.0, 3.0}) {
    const auto m = h.metric(t);
    CHECK(std::abs(expander_residual_rhs(m, {1.0 / geometry::volume(m)}, t + 0.25)) < 1e-10);
  }
  const MetricModel m = bumpy(32);
  std::mt19937 rng(9);
  for (int k = 0; k < 10; ++k) CHECK(expander_residual_rhs(m, random_density(m, rng), 0.2 + 0.1 * k) >= 0.0);
}

TEST_CASE("lambda") {
  SUBCASE("flat torus") {
    const auto l = lambda(geometry::torus_from_modes(16, 1.0, {}));
    CHECK(std::abs(l.lambda) < 1e-10);
    CHECK(std::abs(l.lambda_bar) < 1e-10);
  }
  SUBCASE("hyperbolic lambda bar is constant") {
    const auto h = evolve(hyperbolic(), 0.0, 100.0);
    for (double t : {0.0, 1.0, 50.0}) {
      const auto l = lambda(h.metric(t));
      CHECK(l.lambda == doctest::Approx(-6.0 / (1.0 + 4.0 * t)).epsilon(1e-14));
      CHECK(std::abs(l.lambda_bar + 6.0) < 1e-12);
    }
  }
  SUBCASE("torus lambda is an infimum and lambda bar grows") {
    const auto h = evolve(bumpy(32), 0.0, 0.2);
    const auto m0 = h.metric(0.0);
    const auto l0 = lambda(m0);
    CHECK(l0.lambda < 0.0);
    std::mt19937 rng(13);
    for (int k = 0; k < 20; ++k) CHECK(l0.lambda <= F_functional(m0, random_density(m0, rng)) + 1e-12);
    Field u0(l0.ground_state.size());
    for (std::size_t k = 0; k < u0.size(); ++k) u0[k] = l0.ground_state[k] * l0.ground_state[k];
    CHECK(F_functional(m0, u0) == doctest::Approx(l0.lambda).epsilon(1e-9));
    double prev = l0.lambda_bar;
    for (double t : {0.02, 0.05, 0.1, 0.2}) {
      const double lb = lambda_bar(h.metric(t));
      CHECK(lb >= prev - 1e-10);
      prev = lb;
    }
  }
}

TEST_CASE("mu_plus") {
  SUBCASE("flat torus has the uniform minimizer") {
    const MetricModel m = geometry::torus_from_modes(16, 1.0, {});
    for (double s : {0.1, 1.0}) {
      const auto r = mu_plus(m, s);
      CHECK(r.converged);
      CHECK(r.value == doctest::Approx(std::log(4 * kPi * s) + 2.0).epsilon(1e-10));
      for (double v : r.u) CHECK(v == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
  SUBCASE("constant curvature model") {
    const auto r = mu_plus(hyperbolic(), 0.5);
    CHECK(r.value == doctest::Approx(0.5 * -6.0 + 1.5 * std::log(4 * kPi * 0.5) + 3.0));
  }
  SUBCASE("infimum over densities and concavity in sigma") {
    const MetricModel m = bumpy(32);
    const double sigma = 0.3;
    const auto r = mu_plus(m, sigma);
    CHECK(r.converged);
    CHECK(W_plus(m, r.u, sigma) == doctest::Approx(r.value).epsilon(1e-9));
    std::mt19937 rng(17);
    for (int k = 0; k < 20; ++k) CHECK(r.value <= W_plus(m, random_density(m, rng), sigma) + 1e-10);
    const double a = mu_plus(m, 0.2).value, b = r.value, c = mu_plus(m, 0.4).value;
    CHECK(a + c - 2.0 * b <= 1e-8);
  }
}

TEST_CASE("nu_plus") {
  SUBCASE("hyperbolic maximizer at a quarter") {
    const auto r = nu_plus(hyperbolic());
    REQUIRE_FALSE(r.unbounded);
    CHECK(r.sigma == doctest::Approx(0.25).epsilon(1e-4));
    CHECK(r.value == doctest::Approx(kHyperbolicW).epsilon(1e-10));
    CHECK_FALSE(r.concavity_warning);
  }
  SUBCASE("constant along the hyperbolic flow") {
    const auto h = evolve(hyperbolic(), 0.0, 20.0);
    for (double t : {1.0, 20.0}) CHECK(std::abs(nu_plus(h.metric(t)).value - kHyperbolicW) < 1e-6);
  }
  SUBCASE("flat torus is unbounded") {
    CHECK(nu_plus(geometry::torus_from_modes(16, 1.0, {})).unbounded);
  }
}

TEST_CASE("entropy report") {
  SUBCASE("hyperbolic expander from its vertex") {
    const auto h = evolve(hyperbolic(), 0.0, 100.0);
    EntropyOptions o;
    o.birth_time = -0.25;
    const auto rep = entropy_report(h, uniform_density(h), {0.1, 0.5, 1.0, 5.0, 20.0, 100.0}, o);
    for (const auto& v : rep.verdicts) {
      INFO(v.check << " " << v.worst);
      CHECK(v.ok);
    }
    for (const auto& r : rep.rows) {
      CHECK(std::abs(r.W_plus - kHyperbolicW) < 1e-10);
      CHECK(std::abs(r.rhs) < 1e-10);
    }
  }
  SUBCASE("Nil from time zero") {
    const auto h = evolve(nil(), 0.0, 100.0);
    std::vector<double> ts;
    for (double t = 0.25; t <= 64.0; t *= 2.0) ts.push_back(t);
    const auto rep = entropy_report(h, uniform_density(h), ts);
    CHECK(rep.all_ok());
    CHECK(rep.rows.back().W_plus > rep.rows.front().W_plus);
  }
  SUBCASE("times must increase and follow the birth time") {
    const auto h = evolve(nil(), 0.0, 10.0);
    CHECK_THROWS_AS(entropy_report(h, uniform_density(h), {2.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(entropy_report(h, uniform_density(h), {0.0, 1.0}), std::invalid_argument);
  }
}

TEST_CASE("entropy derivative cross-check") {
  const auto h = evolve(nil(), 0.0, 10.0, [] {
    flow::FlowOptions o;
    o.tol.abs_tol = 1e-13;
    o.tol.rel_tol = 1e-13;
    return o;
  }());
  const auto ok = check_entropy_derivative(h, uniform_density(h), {0.5, 1.0, 3.0, 8.0}, 1e-3, 0.0, 1e-6);
  INFO(ok.max_residual);
  CHECK(ok.ok);
  for (const auto& p : ok.points) CHECK(p.rhs > 1e-3);
  const auto flipped =
      check_entropy_derivative(h, uniform_density(h), {0.5, 1.0, 3.0, 8.0}, 1e-3, 0.0, 1e-6, true);
  CHECK_FALSE(flipped.ok);
}

TEST_CASE("tail fit") {
  std::vector<double> t, y;
  for (int i = 0; i < 21; ++i) {
    t.push_back(100.0 * std::pow(10.0, i / 20.0));
    y.push_back(2.5 - 3.0 / t.back() + 7.0 / (t.back() * t.back()));
  }
  const auto f = fit_tail(t, y);
  CHECK(f.limit == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(f.a == doctest::Approx(-3.0).epsilon(1e-8));
}

TEST_CASE("long-time asymptotics") {
  SUBCASE("hyperbolic limits") {
    const auto h = evolve(hyperbolic(), 0.0, 1000.0);
    const auto rep = asymptotics_report(h, uniform_density(h), 1000.0);
    CHECK_FALSE(rep.collapsing);
    CHECK(rep.v_tilde_limit == doctest::Approx(8.0).epsilon(1e-6));
    const double predicted = -std::log(8.0) + 1.5 * (1.0 + std::log(4 * kPi));
    CHECK(predicted == doctest::Approx(kHyperbolicW).epsilon(1e-12));
    CHECK(std::abs(rep.w_plus.limit - predicted) < 1e-4);
    CHECK(std::abs(rep.w_plus_predicted - predicted) < 1e-6);
    CHECK(std::abs(rep.lambda_bar.limit + 6.0) < 1e-8);
    CHECK(std::abs(rep.t_lambda.limit + 1.5) < 1e-4);
  }
  SUBCASE("Heisenberg collapses") {
    const auto h = evolve(nil(), 0.0, 1000.0);
    const auto rep = asymptotics_report(h, uniform_density(h), 1000.0);
    CHECK(rep.collapsing);
    CHECK(rep.volume_exponent == doctest::Approx(1.0 / 6.0 - 1.5).epsilon(1e-2));
    for (std::size_t k = 1; k < rep.rows.size(); ++k) {
      CHECK(rep.rows[k].v_tilde < rep.rows[k - 1].v_tilde);
      CHECK(rep.rows[k].lambda_bar < 0.0);
      CHECK(rep.rows[k].lambda_bar > rep.rows[k - 1].lambda_bar);
    }
  }
}

TEST_CASE("rescaled soliton defect") {
  SUBCASE("hyperbolic integrand decays like 1/t²") {
    const auto h = evolve(hyperbolic(), 0.0, 1000.0);
    const auto r = rescaled_defect_integral(h, uniform_density(h), {1.0, 1000.0});
    for (std::size_t k = 0; k < r.log_times.size(); ++k) {
      const double t = std::exp(r.log_times[k]);
      CHECK(r.integrand[k] == doctest::Approx(0.75 / ((1 + 4 * t) * (1 + 4 * t))).epsilon(1e-10));
    }
    CHECK(r.decay_exponent == doctest::Approx(-2.0).epsilon(1e-2));
    const auto longer = rescaled_defect_integral(h, uniform_density(h), {1.0, 1000.0}, 129);
    CHECK(longer.integral == doctest::Approx(r.integral).epsilon(1e-4));
  }
  SUBCASE("flat torus integrand is n/4") {
    const auto h = evolve(geometry::torus_from_modes(16, 1.0, {}), 0.0, 100.0);
    const auto r = rescaled_defect_integral(h, uniform_density(h), {1.0, 100.0});
    for (double v : r.integrand) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.integral == doctest::Approx(0.5 * std::log(100.0)).epsilon(1e-12));
    CHECK(std::abs(r.decay_exponent) < 1e-10);
  }
}
