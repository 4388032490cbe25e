#include <doctest.h>

#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "rflab/geometry/metric.hpp"
#include "rflab/geometry/serialize.hpp"

using namespace rflab;
using namespace rflab::geometry;

namespace {

constexpr double kPi = std::numbers::pi;

// Ricci principal curvatures from the Koszul formula applied to a
// left-invariant orthonormal frame, built without any Milnor shortcuts.
std::array<double, 3> koszul_ricci(const HomogeneousMetric& m) {
  // bracket [E_i, E_j] = Σ_k c[i][j][k] E_k in the orthonormal frame E_i = e_i/√g_ii
  double c[3][3][3] = {};
  const double s[3] = {std::sqrt(m.diag[0]), std::sqrt(m.diag[1]), std::sqrt(m.diag[2])};
  const int cyc[3][3] = {{1, 2, 0}, {2, 0, 1}, {0, 1, 2}};
  for (const auto& t : cyc) {
    const int i = t[0], j = t[1], k = t[2];
    const double v = m.structure[k] * s[k] / (s[i] * s[j]);
    c[i][j][k] = v;
    c[j][i][k] = -v;
  }
  // Γ[i][j][k] = <∇_{E_i} E_j, E_k>
  double G[3][3][3];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) G[i][j][k] = 0.5 * (c[i][j][k] - c[j][k][i] + c[k][i][j]);
  // <R(E_i,E_j)E_j, E_i> with R(X,Y)Z = ∇_X∇_Y Z - ∇_Y∇_X Z - ∇_[X,Y] Z
  auto riem = [&](int i, int j) {
    double v = 0.0;
    for (int p = 0; p < 3; ++p) {
      v += G[j][j][p] * G[i][p][i];
      v -= G[i][j][p] * G[j][p][i];
      v -= c[i][j][p] * G[p][j][i];
    }
    return v;
  };
  std::array<double, 3> r{};
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i)
      if (i != j) r[j] += riem(i, j);
  return r;
}

ConformalTorusMetric sine_torus(int n, double amp) { return torus_from_modes(n, 1.0, {{amp, 1.0, 0.0, 0.0}}); }

}  // namespace

TEST_CASE("abelian frame is flat") {
  HomogeneousMetric m;
  m.diag = {0.3, 2.0, 5.0};
  const auto c = curvature_homogeneous(m);
  for (double r : c.principal[0]) CHECK(r == 0.0);
  CHECK(c.scalar[0] == 0.0);
}

TEST_CASE("Heisenberg curvature matches the Koszul oracle") {
  HomogeneousMetric m;
  m.structure = {1.0, 0.0, 0.0};
  const auto c = curvature_homogeneous(m);
  const auto k = koszul_ricci(m);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(c.principal[0][i] - k[i]) < 1e-6);
  CHECK(c.principal[0][0] == doctest::Approx(0.5));
  CHECK(c.scalar[0] == doctest::Approx(-0.5));
}

TEST_CASE("random Milnor frames agree with the Koszul oracle") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> cd(-2.0, 2.0), dd(0.2, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    HomogeneousMetric m;
    m.structure = {cd(rng), cd(rng), cd(rng)};
    m.diag = {dd(rng), dd(rng), dd(rng)};
    const auto c = curvature_homogeneous(m);
    const auto k = koszul_ricci(m);
    for (int i = 0; i < 3; ++i) {
      CHECK(std::abs(c.principal[0][i] - k[i]) <= 1e-5 * std::max(1.0, std::abs(k[i])));
    }
    const auto& r = c.principal[0];
    CHECK(std::abs(r[0] + r[1] + r[2] - c.scalar[0]) < 1e-12);
    CHECK(c.scalar[0] * c.scalar[0] <= 3.0 * c.ricci_norm_sq[0] + 1e-12);
  }
}

TEST_CASE("SU(2) frame of the unit round sphere") {
  HomogeneousMetric m;
  m.structure = {2.0, 2.0, 2.0};
  m.frame_volume = 2.0 * kPi * kPi;
  const auto c = curvature_homogeneous(m);
  for (double r : c.principal[0]) CHECK(r == doctest::Approx(2.0));
  CHECK(c.scalar[0] == doctest::Approx(6.0));
  const auto model = curvature_model(ModelSpaceMetric{3, 1, 1.0, 2.0 * kPi * kPi});
  CHECK(c.scalar[0] == doctest::Approx(model.scalar[0]));
  CHECK(volume(m) == doctest::Approx(volume(ModelSpaceMetric{3, 1, 1.0, 2.0 * kPi * kPi})));
  CHECK(curvature_operator_nonneg(m));
}

TEST_CASE("conformal curvature") {
  SUBCASE("constant phi is flat") {
    ConformalTorusMetric m = torus_from_modes(16, 1.0, {});
    for (double& p : m.phi) p = 0.7;
    for (double R : curvature_conformal(m).scalar) CHECK(R == 0.0);
  }
  SUBCASE("linearized small perturbation") {
    const double eps = 1e-4;
    const int n = 64;
    const auto m = sine_torus(n, eps);
    const auto c = curvature_conformal(m);
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = m.grid.x(i);
      const double lin = 2.0 * eps * 4.0 * kPi * kPi * std::sin(2.0 * kPi * x);
      worst = std::max(worst, std::abs(c.scalar[m.grid.index(i, 3)] - lin));
    }
    // O(ε²) from the exponential and O(εh²) from the stencil
    CHECK(worst < 4.0 * eps * eps * 40.0 + 2.0 * eps * 40.0 * 40.0 / (12.0 * n * n));
  }
  SUBCASE("second-order convergence against the analytic curvature") {
    double err[2];
    for (int level = 0; level < 2; ++level) {
      const int n = 32 << level;
      const auto m = sine_torus(n, 0.3);
      const auto c = curvature_conformal(m);
      double e = 0.0;
      for (int i = 0; i < n; ++i) {
        const double x = m.grid.x(i);
        const double phi = 0.3 * std::sin(2.0 * kPi * x);
        const double exact = 2.0 * std::exp(-2.0 * phi) * 0.3 * 4.0 * kPi * kPi * std::sin(2.0 * kPi * x);
        e = std::max(e, std::abs(c.scalar[m.grid.index(i, 0)] - exact));
      }
      err[level] = e;
    }
    const double order = std::log2(err[0] / err[1]);
    CHECK(order > 1.9);
    CHECK(order < 2.1);
  }
  SUBCASE("trace and Cauchy-Schwarz") {
    const auto c = curvature_conformal(sine_torus(32, 0.3));
    for (std::size_t k = 0; k < c.scalar.size(); ++k) {
      CHECK(std::abs(c.principal[k][0] + c.principal[k][1] - c.scalar[k]) < 1e-12);
      CHECK(c.scalar[k] * c.scalar[k] <= 2.0 * c.ricci_norm_sq[k] * (1 + 1e-14) + 1e-14);
    }
  }
}

TEST_CASE("volumes") {
  CHECK(volume(torus_from_modes(16, 1.0, {})) == doctest::Approx(1.0).epsilon(1e-15));
  HomogeneousMetric h;
  h.frame_volume = 3.5;
  CHECK(volume(h) == 3.5);
  const double a = 2.7;
  CHECK(volume(ModelSpaceMetric{3, -1, a, 1.3}) == doctest::Approx(std::pow(a, 1.5) * 1.3));
  const std::vector<MetricModel> models{h, sine_torus(16, 0.2), ModelSpaceMetric{4, 1, 0.5, 2.0}};
  for (const auto& m : models) {
    const double alpha = 3.25;
    const double expect = std::pow(alpha, 0.5 * dimension(m)) * volume(m);
    CHECK(std::abs(volume(scale_metric(m, alpha)) - expect) <= 1e-12 * expect);
    CHECK(ordered_sum(measure(m)) == doctest::Approx(volume(m)));
  }
}

TEST_CASE("laplacian") {
  const int n = 64;
  SUBCASE("constants are harmonic") {
    const auto m = sine_torus(n, 0.3);
    for (double v : laplacian(m, Field(m.grid.size(), 2.0))) CHECK(std::abs(v) < 1e-9);
    HomogeneousMetric h;
    CHECK(laplacian(h, {1.0})[0] == 0.0);
    CHECK_THROWS_AS((void)laplacian(h, {1.0, 2.0}), std::invalid_argument);
  }
  SUBCASE("flat eigenfunction") {
    const auto m = torus_from_modes(n, 1.0, {});
    Field f(m.grid.size());
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) f[m.grid.index(i, j)] = std::sin(2.0 * kPi * m.grid.x(i));
    const Field l = laplacian(m, f);
    double worst = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) worst = std::max(worst, std::abs(l[k] + 4.0 * kPi * kPi * f[k]));
    CHECK(worst < 4.0 * std::pow(2.0 * kPi, 4) / (12.0 * n * n));
  }
  SUBCASE("divergence theorem") {
    const auto m = sine_torus(n, 0.3);
    std::mt19937 rng(5);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
      Field f(m.grid.size(), 0.0);
      for (int kx = 1; kx <= 3; ++kx) {
        const double a = nd(rng), b = nd(rng);
        for (int j = 0; j < n; ++j)
          for (int i = 0; i < n; ++i)
            f[m.grid.index(i, j)] += a * std::sin(2 * kPi * kx * m.grid.x(i) + b * m.grid.y(j));
      }
      CHECK(std::abs(weighted_sum(laplacian(m, f), measure(m))) < 1e-10);
    }
  }
}

TEST_CASE("curvature operator sign") {
  CHECK(curvature_operator_nonneg(ModelSpaceMetric{3, 1, 1.0, 1.0}));
  CHECK_FALSE(curvature_operator_nonneg(ModelSpaceMetric{3, -1, 1.0, 1.0}));
  CHECK(curvature_operator_nonneg(torus_from_modes(16, 1.0, {})));
  CHECK_FALSE(curvature_operator_nonneg(sine_torus(16, 0.3)));
  HomogeneousMetric nil;
  nil.structure = {1.0, 0.0, 0.0};
  CHECK_FALSE(curvature_operator_nonneg(nil));
}

TEST_CASE("soliton tensor norm on homogeneous data") {
  const ModelSpaceMetric hyp{3, -1, 1.0, 1.0};
  const auto c = curvature_model(hyp);
  // Rc + g/2σ vanishes for σ = 1/4 when Rc = -2g
  CHECK(soliton_norm_sq(hyp, c, {0.0}, 2.0)[0] == doctest::Approx(0.0));
  CHECK(soliton_norm_sq(hyp, c, {0.0}, 0.0)[0] == doctest::Approx(12.0));
}

TEST_CASE("json round trip") {
  const std::vector<MetricModel> models{
      HomogeneousMetric{{1.0, 0.0, 0.0}, {1.0, 2.0, 3.0}, 4.0}, sine_torus(8, 0.1),
      ModelSpaceMetric{3, -1, 1.0, 1.0}};
  for (const auto& m : models) {
    const auto back = metric_from_json(metric_to_json(m));
    CHECK(metric_to_json(back) == metric_to_json(m));
  }
  CHECK_THROWS_AS(metric_from_json(nlohmann::json{{"kind", "sphere"}}), std::invalid_argument);
  CHECK_THROWS_AS(metric_from_json(nlohmann::json{{"kind", "homogeneous"}}), std::invalid_argument);
  CHECK_THROWS_AS(metric_from_json(nlohmann::json{{"kind", "model_space"}, {"sectional_sign", 4}}),
                  std::invalid_argument);
}
