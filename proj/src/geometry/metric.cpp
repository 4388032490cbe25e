#include "rflab/geometry/metric.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rflab::geometry {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_size(const MetricModel& m, const Field& f, const char* who) {
  if (f.size() != field_size(m)) {
    throw std::invalid_argument(std::string(who) + ": field size does not match the model");
  }
}

}  // namespace

void HomogeneousMetric::validate() const {
  for (double d : diag) {
    if (!(d > 0.0) || !std::isfinite(d)) throw std::invalid_argument("HomogeneousMetric: diag must be positive");
  }
  for (double c : structure) {
    if (!std::isfinite(c)) throw std::invalid_argument("HomogeneousMetric: non-finite structure constant");
  }
  if (!(frame_volume > 0.0)) throw std::invalid_argument("HomogeneousMetric: frame_volume must be positive");
}

void ConformalTorusMetric::validate() const {
  if (grid.nx < 8 || grid.ny < 8) throw std::invalid_argument("ConformalTorusMetric: grid too small");
  if (phi.size() != grid.size()) throw std::invalid_argument("ConformalTorusMetric: phi size mismatch");
  for (double p : phi) {
    if (!std::isfinite(p)) throw std::invalid_argument("ConformalTorusMetric: phi must be finite");
  }
}

void ModelSpaceMetric::validate() const {
  if (dimension < 2) throw std::invalid_argument("ModelSpaceMetric: dimension must be at least 2");
  if (sign < -1 || sign > 1) throw std::invalid_argument("ModelSpaceMetric: sign must be -1, 0 or 1");
  if (!(scale > 0.0)) throw std::invalid_argument("ModelSpaceMetric: scale must be positive");
  if (!(base_volume > 0.0)) throw std::invalid_argument("ModelSpaceMetric: base_volume must be positive");
}

ModelKind kind_of(const MetricModel& m) { return static_cast<ModelKind>(m.index()); }

std::string kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::Homogeneous:
      return "homogeneous";
    case ModelKind::ConformalTorus:
      return "conformal_torus";
    case ModelKind::ModelSpace:
      return "model_space";
  }
  return "unknown";
}

int dimension(const MetricModel& m) {
  return std::visit(overloaded{[](const HomogeneousMetric&) { return 3; },
                               [](const ConformalTorusMetric&) { return 2; },
                               [](const ModelSpaceMetric& s) { return s.dimension; }},
                    m);
}

std::size_t field_size(const MetricModel& m) {
  if (const auto* t = std::get_if<ConformalTorusMetric>(&m)) return t->grid.size();
  return 1;
}

void validate(const MetricModel& m) {
  std::visit([](const auto& x) { x.validate(); }, m);
}

CurvatureData curvature_homogeneous(const HomogeneousMetric& m) {
  m.validate();
  const auto [A, B, C] = m.diag;
  const double s = std::sqrt(A * B * C);
  // structure constants in the orthonormal frame e_i / sqrt(g_ii)
  const double l1 = m.structure[0] * A / s;
  const double l2 = m.structure[1] * B / s;
  const double l3 = m.structure[2] * C / s;
  const double half = 0.5 * (l1 + l2 + l3);
  const double m1 = half - l1, m2 = half - l2, m3 = half - l3;
  CurvatureData out;
  out.principal = {{2.0 * m2 * m3, 2.0 * m1 * m3, 2.0 * m1 * m2}};
  const auto& r = out.principal[0];
  out.scalar = {r[0] + r[1] + r[2]};
  out.ricci_norm_sq = {r[0] * r[0] + r[1] * r[1] + r[2] * r[2]};
  return out;
}

std::array<double, 3> milnor_plane_curvatures(const HomogeneousMetric& m) {
  const auto r = curvature_homogeneous(m).principal[0];
  return {0.5 * (r[1] + r[2] - r[0]), 0.5 * (r[0] + r[2] - r[1]), 0.5 * (r[0] + r[1] - r[2])};
}

CurvatureData curvature_conformal(const ConformalTorusMetric& m) {
  m.validate();
  const Field lap = m.grid.laplacian(m.phi);
  CurvatureData out;
  out.scalar.resize(lap.size());
  out.ricci_norm_sq.resize(lap.size());
  out.principal.resize(lap.size());
  for (std::size_t k = 0; k < lap.size(); ++k) {
    const double R = -2.0 * std::exp(-2.0 * m.phi[k]) * lap[k];
    out.scalar[k] = R;
    out.principal[k] = {0.5 * R, 0.5 * R};
    out.ricci_norm_sq[k] = 0.5 * R * R;
  }
  return out;
}

CurvatureData curvature_model(const ModelSpaceMetric& m) {
  m.validate();
  const double r = m.unit_ricci() / m.scale;
  CurvatureData out;
  out.principal = {std::vector<double>(m.dimension, r)};
  out.scalar = {m.dimension * r};
  out.ricci_norm_sq = {m.dimension * r * r};
  return out;
}

CurvatureData curvature(const MetricModel& m) {
  return std::visit(overloaded{[](const HomogeneousMetric& x) { return curvature_homogeneous(x); },
                               [](const ConformalTorusMetric& x) { return curvature_conformal(x); },
                               [](const ModelSpaceMetric& x) { return curvature_model(x); }},
                    m);
}

double volume(const MetricModel& m) {
  return std::visit(
      overloaded{[](const HomogeneousMetric& x) {
                   return std::sqrt(x.diag[0] * x.diag[1] * x.diag[2]) * x.frame_volume;
                 },
                 [](const ConformalTorusMetric& x) {
                   double s = 0.0;
                   for (double p : x.phi) s += std::exp(2.0 * p);
                   return s * x.grid.cell_area();
                 },
                 [](const ModelSpaceMetric& x) {
                   return std::pow(x.scale, 0.5 * x.dimension) * x.base_volume;
                 }},
      m);
}

Field measure(const MetricModel& m) {
  if (const auto* t = std::get_if<ConformalTorusMetric>(&m)) {
    Field w(t->phi.size());
    const double area = t->grid.cell_area();
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = std::exp(2.0 * t->phi[k]) * area;
    return w;
  }
  return {volume(m)};
}

Field laplacian(const MetricModel& m, const Field& f) {
  require_size(m, f, "laplacian");
  if (const auto* t = std::get_if<ConformalTorusMetric>(&m)) {
    Field out = t->grid.laplacian(f);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] *= std::exp(-2.0 * t->phi[k]);
    return out;
  }
  return {0.0};
}

Field gradient_norm_sq(const MetricModel& m, const Field& f) { return gradient_dot(m, f, f); }

Field gradient_dot(const MetricModel& m, const Field& a, const Field& b) {
  require_size(m, a, "gradient_dot");
  require_size(m, b, "gradient_dot");
  if (const auto* t = std::get_if<ConformalTorusMetric>(&m)) {
    const std::size_t n = a.size();
    Field ax(n), ay(n), bx(n), by(n), out(n);
    t->grid.gradient(a, ax, ay);
    t->grid.gradient(b, bx, by);
    for (std::size_t k = 0; k < n; ++k) {
      out[k] = std::exp(-2.0 * t->phi[k]) * (ax[k] * bx[k] + ay[k] * by[k]);
    }
    return out;
  }
  return {0.0};
}

Field soliton_norm_sq(const MetricModel& m, const CurvatureData& curv, const Field& f, double c) {
  require_size(m, f, "soliton_norm_sq");
  if (const auto* t = std::get_if<ConformalTorusMetric>(&m)) {
    const std::size_t n = f.size();
    Field px(n), py(n), fx(n), fy(n), fxx(n), fyy(n), fxy(n), out(n);
    t->grid.gradient(t->phi, px, py);
    t->grid.gradient(f, fx, fy);
    t->grid.hessian(f, fxx, fyy, fxy);
    for (std::size_t k = 0; k < n; ++k) {
      const double e2 = std::exp(2.0 * t->phi[k]);
      const double dot = px[k] * fx[k] + py[k] * fy[k];
      // covariant Hessian of f for the conformal metric
      const double hxx = fxx[k] - 2.0 * px[k] * fx[k] + dot;
      const double hyy = fyy[k] - 2.0 * py[k] * fy[k] + dot;
      const double hxy = fxy[k] - (px[k] * fy[k] + py[k] * fx[k]);
      const double diag = (0.5 * curv.scalar[k] + c) * e2;
      const double txx = diag + hxx, tyy = diag + hyy;
      out[k] = (txx * txx + tyy * tyy + 2.0 * hxy * hxy) / (e2 * e2);
    }
    return out;
  }
  double s = 0.0;
  for (double r : curv.principal.at(0)) s += (r + c) * (r + c);
  return {s};
}

bool curvature_operator_nonneg(const MetricModel& m, double tol) {
  return std::visit(
      overloaded{[&](const HomogeneousMetric& x) {
                   const auto k = milnor_plane_curvatures(x);
                   return std::all_of(k.begin(), k.end(), [&](double v) { return v >= -tol; });
                 },
                 [&](const ConformalTorusMetric& x) {
                   const auto c = curvature_conformal(x);
                   return std::all_of(c.scalar.begin(), c.scalar.end(),
                                      [&](double R) { return 0.5 * R >= -tol; });
                 },
                 [](const ModelSpaceMetric& x) { return x.sign >= 0; }},
      m);
}

MetricModel scale_metric(const MetricModel& m, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("scale_metric: alpha must be positive");
  return std::visit(overloaded{[&](HomogeneousMetric x) -> MetricModel {
                                 for (double& d : x.diag) d *= alpha;
                                 return x;
                               },
                               [&](ConformalTorusMetric x) -> MetricModel {
                                 const double shift = 0.5 * std::log(alpha);
                                 for (double& p : x.phi) p += shift;
                                 return x;
                               },
                               [&](ModelSpaceMetric x) -> MetricModel {
                                 x.scale *= alpha;
                                 return x;
                               }},
                    m);
}

}  // namespace rflab::geometry
