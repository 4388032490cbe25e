#include "rflab/geometry/serialize.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rflab::geometry {

using nlohmann::json;

namespace {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument(std::string("metric: bad value for '") + key + "'");
  }
}

template <class T>
T require(const json& j, const char* key) {
  if (!j.contains(key)) throw std::invalid_argument(std::string("metric: missing '") + key + "'");
  return get_or<T>(j, key, T{});
}

void add_mode(ConformalTorusMetric& m, double amp, double kx, double ky, double phase) {
  const auto& g = m.grid;
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const double arg = 2.0 * std::numbers::pi * (kx * g.x(i) / g.lx + ky * g.y(j) / g.ly);
      m.phi[g.index(i, j)] += amp * std::sin(arg + phase);
    }
  }
}

}  // namespace

ConformalTorusMetric torus_from_modes(int n, double period,
                                      const std::vector<std::array<double, 4>>& modes) {
  ConformalTorusMetric m{Grid2(n, n, period, period), {}};
  m.phi.assign(m.grid.size(), 0.0);
  for (const auto& md : modes) add_mode(m, md[0], md[1], md[2], md[3]);
  return m;
}

MetricModel metric_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("metric: expected an object");
  const auto kind = require<std::string>(j, "kind");
  if (kind == "homogeneous") {
    HomogeneousMetric m;
    m.structure = require<std::array<double, 3>>(j, "structure_constants");
    m.diag = get_or<std::array<double, 3>>(j, "diag", {1.0, 1.0, 1.0});
    m.frame_volume = get_or<double>(j, "frame_volume", 1.0);
    m.validate();
    return m;
  }
  if (kind == "conformal_torus") {
    const auto n = get_or<std::array<int, 2>>(j, "grid_size", {64, 64});
    const auto p = get_or<std::array<double, 2>>(j, "periods", {1.0, 1.0});
    ConformalTorusMetric m{Grid2(n[0], n[1], p[0], p[1]), {}};
    if (j.contains("phi")) {
      m.phi = get_or<Field>(j, "phi", {});
    } else {
      m.phi.assign(m.grid.size(), get_or<double>(j, "phi_constant", 0.0));
      if (j.contains("phi_modes")) {
        if (!j.at("phi_modes").is_array()) throw std::invalid_argument("metric: 'phi_modes' must be an array");
        for (const auto& md : j.at("phi_modes")) {
          add_mode(m, require<double>(md, "amplitude"), get_or<double>(md, "kx", 0.0),
                   get_or<double>(md, "ky", 0.0), get_or<double>(md, "phase", 0.0));
        }
      }
    }
    m.validate();
    return m;
  }
  if (kind == "model_space") {
    ModelSpaceMetric m;
    m.dimension = get_or<int>(j, "dimension", 3);
    m.sign = require<int>(j, "sectional_sign");
    m.scale = get_or<double>(j, "scale", 1.0);
    m.base_volume = get_or<double>(j, "base_volume", 1.0);
    m.validate();
    return m;
  }
  throw std::invalid_argument("metric: unknown kind '" + kind + "'");
}

json metric_to_json(const MetricModel& m) {
  json j;
  if (const auto* h = std::get_if<HomogeneousMetric>(&m)) {
    j = {{"kind", "homogeneous"},
         {"structure_constants", h->structure},
         {"diag", h->diag},
         {"frame_volume", h->frame_volume}};
  } else if (const auto* t = std::get_if<ConformalTorusMetric>(&m)) {
    j = {{"kind", "conformal_torus"},
         {"grid_size", {t->grid.nx, t->grid.ny}},
         {"periods", {t->grid.lx, t->grid.ly}},
         {"phi", t->phi}};
  } else {
    const auto& s = std::get<ModelSpaceMetric>(m);
    j = {{"kind", "model_space"},
         {"dimension", s.dimension},
         {"sectional_sign", s.sign},
         {"scale", s.scale},
         {"base_volume", s.base_volume}};
  }
  return j;
}

}  // namespace rflab::geometry
