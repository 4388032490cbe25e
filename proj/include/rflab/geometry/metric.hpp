#pragma once

#include <array>
#include <string>
#include <variant>
#include <vector>

#include "rflab/geometry/grid.hpp"
#include "rflab/numerics/types.hpp"

namespace rflab::geometry {

/// Diagonal left-invariant metric A e¹⊗e¹ + B e²⊗e² + C e³⊗e³ on a 3-D
/// unimodular group whose Milnor frame satisfies [e2,e3]=c1 e1, [e3,e1]=c2 e2,
/// [e1,e2]=c3 e3. The compact quotient enters only through frame_volume.
struct HomogeneousMetric {
  std::array<double, 3> structure{0.0, 0.0, 0.0};
  std::array<double, 3> diag{1.0, 1.0, 1.0};
  double frame_volume = 1.0;

  void validate() const;
};

/// g = e^{2φ}(dx² + dy²) on a periodic grid.
struct ConformalTorusMetric {
  Grid2 grid;
  Field phi;

  void validate() const;
};

/// a · (unit-curvature model metric) of dimension n; volume a^{n/2}·V₀.
struct ModelSpaceMetric {
  int dimension = 3;
  int sign = -1;
  double scale = 1.0;
  double base_volume = 1.0;

  void validate() const;
  [[nodiscard]] double unit_ricci() const { return sign * (dimension - 1.0); }
};

using MetricModel = std::variant<HomogeneousMetric, ConformalTorusMetric, ModelSpaceMetric>;

enum class ModelKind { Homogeneous, ConformalTorus, ModelSpace };

ModelKind kind_of(const MetricModel& m);
std::string kind_name(ModelKind k);
int dimension(const MetricModel& m);
/// Number of sample points a density lives on (1 on homogeneous models).
std::size_t field_size(const MetricModel& m);
void validate(const MetricModel& m);

/// Ricci curvature in principal form: at each sample point, the eigenvalues
/// of Rc relative to g (the mixed tensor Rc^i_j).
struct CurvatureData {
  std::vector<std::vector<double>> principal;
  Field scalar;
  Field ricci_norm_sq;
};

CurvatureData curvature_homogeneous(const HomogeneousMetric& m);
CurvatureData curvature_conformal(const ConformalTorusMetric& m);
CurvatureData curvature_model(const ModelSpaceMetric& m);
CurvatureData curvature(const MetricModel& m);

/// Sectional curvatures of the Milnor coordinate planes (K23, K13, K12),
/// which are the eigenvalues of the curvature operator in three dimensions.
std::array<double, 3> milnor_plane_curvatures(const HomogeneousMetric& m);

double volume(const MetricModel& m);
/// Riemannian volume weight of each sample point; sums to volume(m).
Field measure(const MetricModel& m);
/// Δ_g f. On homogeneous and model-space metrics only constants are
/// representable and the result is zero.
Field laplacian(const MetricModel& m, const Field& f);
/// |∇f|²_g per sample point (centered differences on the torus).
Field gradient_norm_sq(const MetricModel& m, const Field& f);
/// ⟨∇a, ∇b⟩_g per sample point.
Field gradient_dot(const MetricModel& m, const Field& a, const Field& b);
/// |Rc + ∇²f + c·g|²_g per sample point.
Field soliton_norm_sq(const MetricModel& m, const CurvatureData& curv, const Field& f, double c);
bool curvature_operator_nonneg(const MetricModel& m, double tol = 1e-12);

/// α·g for a constant α > 0.
MetricModel scale_metric(const MetricModel& m, double alpha);

}  // namespace rflab::geometry
