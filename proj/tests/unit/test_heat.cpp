#include <doctest.h>

#include <cmath>
#include <numbers>

#include "rflab/heat/conjugate_heat.hpp"
#include "rflab/geometry/serialize.hpp"

using namespace rflab;
using namespace rflab::heat;
using flow::evolve;
using flow::FlowHistory;
using geometry::HomogeneousMetric;
using geometry::ModelSpaceMetric;

namespace {

constexpr double kPi = std::numbers::pi;

HomogeneousMetric nil() {
  HomogeneousMetric m;
  m.structure = {1.0, 0.0, 0.0};
  return m;
}

// 5 states centered on tc, spaced by step, from exact spatially constant densities
std::vector<DensityState> window_states(const FlowHistory& h, double tc, double step, double birth) {
  BackwardOptions bo;
  bo.dt = step;
  bo.birth_time = birth;
  bo.keep_every = 1;
  return solve_conjugate_backward(h, tc + 2.0 * step, Field(1, 1.0 / h.volume(tc + 2.0 * step)),
                                  tc - 2.0 * step, bo);
}

Field bumpy_density(const geometry::Grid2& g, const Field& phi) {
  Field u(g.size());
  double mass = 0.0;
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const double x = g.x(i), y = g.y(j);
      const auto k = g.index(i, j);
      u[k] = 1.0 + 0.2 * std::cos(2.0 * kPi * y) + 0.1 * std::sin(2.0 * kPi * (x + y));
      mass += u[k] * std::exp(2.0 * phi[k]) * g.cell_area();
    }
  }
  for (double& v : u) v /= mass;
  return u;
}

}  // namespace

TEST_CASE("potential and density round trip") {
  const Field u{0.3, 1.7, 1e-6, 12.0};
  for (int n : {2, 3}) {
    const auto s = make_state(0.5, u, 0.75, n);
    const Field back = density_from_potential(s.f_plus, 0.75, n);
    for (std::size_t k = 0; k < u.size(); ++k) CHECK(back[k] == doctest::Approx(u[k]).epsilon(1e-14));
  }
  CHECK_THROWS_AS(make_state(0.0, u, 0.0, 3), std::invalid_argument);
  CHECK_THROWS_AS(make_state(0.0, Field{1.0, -1.0}, 1.0, 3), NumericalError);
}

TEST_CASE("homogeneous densities are the reciprocal volume") {
  const auto h = evolve(nil(), 0.0, 4.0);
  BackwardOptions bo;
  bo.dt = 0.5;
  bo.keep_every = 1;
  bo.birth_time = -1.0;
  const auto states = solve_conjugate_backward(h, 4.0, Field(1, 1.0 / h.volume(4.0)), 0.0, bo);
  REQUIRE(states.size() == 9);
  for (std::size_t k = 1; k < states.size(); ++k) CHECK(states[k].t > states[k - 1].t);
  for (const auto& s : states) CHECK(s.u[0] * h.volume(s.t) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("flat torus keeps a uniform density uniform") {
  const auto h = evolve(geometry::torus_from_modes(16, 1.0, {}), 0.0, 0.5);
  BackwardOptions bo;
  bo.birth_time = -1.0;
  const auto states = solve_conjugate_backward(h, 0.5, Field(256, 1.0), 0.0, bo);
  for (const auto& s : states) {
    for (double v : s.u) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("torus backward solve keeps unit mass and positivity") {
  const auto h = evolve(geometry::torus_from_modes(32, 1.0, {{0.3, 1.0, 0.0, 0.0}}), 0.0, 0.1);
  const auto& g = std::get<geometry::ConformalTorusMetric>(h.metric(0.1)).grid;
  Field phi, rate;
  h.parameters(0.1, phi, rate);
  BackwardOptions bo;
  bo.keep_every = 10;
  const auto states = solve_conjugate_backward(h, 0.1, bumpy_density(g, phi), 0.01, bo);
  REQUIRE(states.size() > 5);
  for (const auto& s : states) {
    const auto w = geometry::measure(h.metric(s.t));
    CHECK(std::abs(weighted_sum(s.u, w) - 1.0) < 1e-10);
    CHECK(*std::min_element(s.u.begin(), s.u.end()) > 0.0);
  }
  SUBCASE("bad final data") {
    CHECK_THROWS_AS(solve_conjugate_backward(h, 0.1, Field(g.size(), -1.0), 0.0), std::invalid_argument);
    CHECK_THROWS_AS(solve_conjugate_backward(h, 0.1, Field(3, 1.0), 0.0), std::invalid_argument);
    CHECK_THROWS_AS(solve_conjugate_backward(h, 0.0, Field(g.size(), 1.0), 0.1), std::invalid_argument);
  }
}

TEST_CASE("immortal density") {
  SUBCASE("homogeneous constructions agree at once") {
    const auto h = evolve(nil(), 0.0, 64.0);
    ImmortalOptions io;
    io.sample_times = {1.0, 2.0};
    const auto d = construct_immortal_density(h, {1.0, 2.0}, io);
    CHECK(d.converged);
    CHECK(d.cauchy_gap < 1e-12);
    for (const auto& s : d.states) CHECK(s.u[0] * h.volume(s.t) == doctest::Approx(1.0));
  }
  SUBCASE("torus gaps shrink as the final time grows") {
    const auto h = evolve(geometry::torus_from_modes(32, 1.0, {{0.3, 1.0, 0.0, 0.0}}), 0.0, 3.0);
    ImmortalOptions io;
    io.tol = 1e-6;
    io.first_final_time = 0.05;
    io.sample_times = {0.1};
    const auto d = construct_immortal_density(h, {0.1, 0.1}, io);
    // memory of the final data decays exponentially in the final time
    REQUIRE(d.gap_history.size() >= 2);
    CHECK(d.gap_history[1] < 1e-3 * d.gap_history[0]);
    CHECK(d.converged);
    // the limit is essentially uniform once the metric has relaxed
    const auto w = geometry::measure(h.metric(d.states[0].t));
    CHECK(std::abs(weighted_sum(d.states[0].u, w) - 1.0) < 1e-10);
  }
}

TEST_CASE("immortal density with a first final time inside the window") {
  const auto h = evolve(geometry::torus_from_modes(16, 1.0, {{0.3, 1.0, 0.0, 0.0}}), 0.0, 2.0);
  ImmortalOptions io;
  io.tol = 1e-6;
  io.first_final_time = 0.1;
  io.sample_times = {0.05, 0.2};
  const auto d = construct_immortal_density(h, {0.05, 0.2}, io);
  CHECK(d.converged);
  CHECK(d.construction_tail > 0.2);
  REQUIRE(d.states.size() == 2);
}

TEST_CASE("immortal density does not depend on the final-time sequence") {
  // doubling vs tripling final times; the limits should coincide to the Cauchy tolerance
  const auto h = evolve(geometry::torus_from_modes(16, 1.0, {{0.3, 1.0, 0.0, 0.0}}), 0.0, 3.0);
  ImmortalOptions io;
  io.tol = 1e-9;
  io.first_final_time = 0.1;
  io.sample_times = {0.05};
  const auto a = construct_immortal_density(h, {0.05, 0.05}, io);
  io.growth = 3.0;
  io.first_final_time = 0.07;
  const auto b = construct_immortal_density(h, {0.05, 0.05}, io);
  REQUIRE(a.converged);
  REQUIRE(b.converged);
  double gap = 0.0;
  for (std::size_t k = 0; k < a.states[0].u.size(); ++k) {
    gap = std::max(gap, std::abs(a.states[0].u[k] - b.states[0].u[k]));
  }
  MESSAGE("sequence gap " << gap);
  CHECK(gap < 1e-8);
}

TEST_CASE("v_plus on model spaces") {
  SUBCASE("flat space has v = 0 for the exact heat kernel scale") {
    // flat torus, σ = t: f₊ constant, v = (n - f) u with f = log V - (n/2) log 4πσ
    const auto h = evolve(geometry::torus_from_modes(16, 1.0, {}), 0.0, 1.0);
    const auto s = make_state(0.5, Field(256, 1.0), 0.5, 2);
    const auto v = v_plus(s, h, 0.0);
    const double f = -std::log(4.0 * kPi * 0.5);
    CHECK(v.integral == doctest::Approx(2.0 - f).epsilon(1e-12));
  }
  SUBCASE("hyperbolic expander integrand") {
    const auto h = evolve(ModelSpaceMetric{3, -1, 1.0, 1.0}, 0.0, 10.0);
    for (double t : {0.0, 1.0, 7.5}) {
      const double sigma = t + 0.25;
      const auto s = make_state(t, Field(1, 1.0 / h.volume(t)), sigma, 3);
      // σR = -3/2 and f₊ = -(3/2) log π for unit base volume
      const double expect = 1.5 + 1.5 * std::log(kPi);
      CHECK(v_plus(s, h, -0.25).integral == doctest::Approx(expect).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(v_plus(make_state(0.0, Field(1, 1.0), 1.0, 3),
                         evolve(nil(), 0.0, 1.0), 0.0),
                  std::invalid_argument);
}

TEST_CASE("pointwise identities on homogeneous flows") {
  SUBCASE("hyperbolic from its birth time") {
    const auto h = evolve(ModelSpaceMetric{3, -1, 1.0, 1.0}, 0.0, 10.0);
    const auto st = window_states(h, 1.0, 2e-3, -0.25);
    for (auto r : {check_harnack_identity(st, h, -0.25, 1e-8),
                   check_f_plus_evolution(st, h, -0.25, 1e-8), check_v_identity(st, h, 1e-8),
                   check_steady_harnack(st, h, 1e-8)}) {
      INFO(r.check);
      CHECK(r.ok);
      CHECK(r.min_rhs >= -1e-12);
    }
  }
  SUBCASE("Nil with birth at zero") {
    const auto h = evolve(nil(), 0.0, 10.0);
    const auto st = window_states(h, 1.0, 2e-3, 0.0);
    for (auto r : {check_harnack_identity(st, h, 0.0, 1e-8), check_f_plus_evolution(st, h, 0.0, 1e-8),
                   check_v_identity(st, h, 1e-8), check_steady_harnack(st, h, 1e-8)}) {
      INFO(r.check);
      CHECK(r.ok);
    }
    // the Harnack right-hand side is a square and strictly positive off solitons
    CHECK(check_harnack_identity(st, h, 0.0, 1e-8).min_rhs > 0.0);
  }
  SUBCASE("a density that does not solve the conjugate equation is flagged") {
    const auto h = evolve(ModelSpaceMetric{3, -1, 1.0, 1.0}, 0.0, 10.0);
    auto st = window_states(h, 1.0, 2e-3, -0.25);
    st[3].u[0] *= 1.0 + 1e-4;
    CHECK_FALSE(check_f_plus_evolution(st, h, -0.25, 1e-8).ok);
    CHECK_FALSE(check_harnack_identity(st, h, -0.25, 1e-8).ok);
  }
  SUBCASE("window validation") {
    const auto h = evolve(nil(), 0.0, 10.0);
    auto st = window_states(h, 1.0, 2e-3, 0.0);
    st.pop_back();
    CHECK_THROWS_AS(check_harnack_identity(st, h, 0.0, 1e-8), std::invalid_argument);
  }
}

TEST_CASE("torus identities converge under refinement") {
  std::vector<double> hs, harnack, fplus;
  for (int n : {32, 64}) {
    const auto h = evolve(geometry::torus_from_modes(n, 1.0, {{0.3, 1.0, 0.0, 0.0}}), 0.0, 0.03125);
    const auto& g = std::get<geometry::ConformalTorusMetric>(h.metric(0.0)).grid;
    Field phi, rate;
    h.parameters(0.03125, phi, rate);
    BackwardOptions bo;
    bo.birth_time = 0.0;
    bo.keep_every = 1;
    const double step = h.native_step();
    bo.keep_from = 0.015625 - 2.5 * step;
    bo.keep_to = 0.015625 + 2.5 * step;
    const auto st = solve_conjugate_backward(h, 0.03125, bumpy_density(g, phi), 0.0078125, bo);
    std::vector<DensityState> mid;
    for (const auto& s : st) {
      if (s.t >= bo.keep_from && s.t <= bo.keep_to) mid.push_back(s);
    }
    REQUIRE(mid.size() == 5);
    const auto r1 = check_harnack_identity(mid, h, 0.0, 1.0);
    const auto r2 = check_f_plus_evolution(mid, h, 0.0, 1.0);
    MESSAGE("N=" << n << " harnack " << r1.max_residual << " of " << r1.max_lhs << " f+ "
                 << r2.max_residual << " of " << r2.max_lhs);
    hs.push_back(g.hx());
    harnack.push_back(r1.max_residual);
    fplus.push_back(r2.max_residual);
  }
  const double p1 = std::log(harnack[0] / harnack[1]) / std::log(hs[0] / hs[1]);
  const double p2 = std::log(fplus[0] / fplus[1]) / std::log(hs[0] / hs[1]);
  CHECK(p1 > 1.5);
  CHECK(p2 > 1.5);
}
