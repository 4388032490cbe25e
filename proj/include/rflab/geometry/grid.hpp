#pragma once

#include <cstddef>
#include <span>

#include "rflab/numerics/types.hpp"

namespace rflab::geometry {

/// Uniform periodic grid on [0, Lx) x [0, Ly); point (i, j) is stored at i + nx * j.
struct Grid2 {
  int nx = 0;
  int ny = 0;
  double lx = 1.0;
  double ly = 1.0;

  Grid2() = default;
  Grid2(int nx_, int ny_, double lx_, double ly_);

  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(nx) * ny; }
  [[nodiscard]] double hx() const { return lx / nx; }
  [[nodiscard]] double hy() const { return ly / ny; }
  [[nodiscard]] double cell_area() const { return hx() * hy(); }
  [[nodiscard]] double x(int i) const { return i * hx(); }
  [[nodiscard]] double y(int j) const { return j * hy(); }
  [[nodiscard]] std::size_t index(int i, int j) const {
    const int ii = ((i % nx) + nx) % nx;
    const int jj = ((j % ny) + ny) % ny;
    return static_cast<std::size_t>(ii) + static_cast<std::size_t>(nx) * jj;
  }
  [[nodiscard]] bool operator==(const Grid2& o) const {
    return nx == o.nx && ny == o.ny && lx == o.lx && ly == o.ly;
  }

  /// Flat five-point Laplacian.
  void laplacian(std::span<const double> f, std::span<double> out) const;
  [[nodiscard]] Field laplacian(std::span<const double> f) const;
  /// Centered first derivatives.
  void gradient(std::span<const double> f, std::span<double> fx, std::span<double> fy) const;
  /// Centered second derivatives (fxy from the four diagonal neighbours).
  void hessian(std::span<const double> f, std::span<double> fxx, std::span<double> fyy,
               std::span<double> fxy) const;
  /// Sum over grid edges of squared forward differences, per point:
  /// ((f[i+1]-f[i])/hx)^2 + ((f[j+1]-f[j])/hy)^2. Its sum times the cell area
  /// is the Dirichlet energy paired with the five-point Laplacian.
  void edge_gradient_sq(std::span<const double> f, std::span<double> out) const;
};

}  // namespace rflab::geometry
