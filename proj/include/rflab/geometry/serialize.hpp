#pragma once

#include <json.hpp>

#include "rflab/geometry/metric.hpp"

namespace rflab::geometry {

/// {"kind": "homogeneous" | "conformal_torus" | "model_space", ...}.
///
/// A torus phi may be given explicitly ("phi": [...], row-major in x) or as
/// a sum of modes ("phi_modes": [{"amplitude", "kx", "ky", "phase"}]) meaning
/// Σ amplitude · sin(2π(kx·x/Lx + ky·y/Ly) + phase). Throws
/// std::invalid_argument with the offending key on bad input.
MetricModel metric_from_json(const nlohmann::json& j);
nlohmann::json metric_to_json(const MetricModel& m);

/// Shorthand used by tests and configs.
ConformalTorusMetric torus_from_modes(int n, double period,
                                      const std::vector<std::array<double, 4>>& modes);

}  // namespace rflab::geometry
