#include "rflab/geometry/grid.hpp"

#include <stdexcept>

namespace rflab::geometry {

Grid2::Grid2(int nx_, int ny_, double lx_, double ly_) : nx(nx_), ny(ny_), lx(lx_), ly(ly_) {
  if (nx < 8 || ny < 8) throw std::invalid_argument("Grid2: need at least 8 points per axis");
  if (!(lx > 0.0) || !(ly > 0.0)) throw std::invalid_argument("Grid2: periods must be positive");
}

void Grid2::laplacian(std::span<const double> f, std::span<double> out) const {
  const double ax = 1.0 / (hx() * hx()), ay = 1.0 / (hy() * hy());
  for (int j = 0; j < ny; ++j) {
    const int jm = j == 0 ? ny - 1 : j - 1, jp = j == ny - 1 ? 0 : j + 1;
    for (int i = 0; i < nx; ++i) {
      const int im = i == 0 ? nx - 1 : i - 1, ip = i == nx - 1 ? 0 : i + 1;
      const double c = f[i + nx * j];
      out[i + nx * j] = ax * (f[ip + nx * j] - 2.0 * c + f[im + nx * j]) +
                        ay * (f[i + nx * jp] - 2.0 * c + f[i + nx * jm]);
    }
  }
}

Field Grid2::laplacian(std::span<const double> f) const {
  Field out(size());
  laplacian(f, out);
  return out;
}

void Grid2::gradient(std::span<const double> f, std::span<double> fx, std::span<double> fy) const {
  const double bx = 0.5 / hx(), by = 0.5 / hy();
  for (int j = 0; j < ny; ++j) {
    const int jm = j == 0 ? ny - 1 : j - 1, jp = j == ny - 1 ? 0 : j + 1;
    for (int i = 0; i < nx; ++i) {
      const int im = i == 0 ? nx - 1 : i - 1, ip = i == nx - 1 ? 0 : i + 1;
      fx[i + nx * j] = bx * (f[ip + nx * j] - f[im + nx * j]);
      fy[i + nx * j] = by * (f[i + nx * jp] - f[i + nx * jm]);
    }
  }
}

void Grid2::hessian(std::span<const double> f, std::span<double> fxx, std::span<double> fyy,
                    std::span<double> fxy) const {
  const double ax = 1.0 / (hx() * hx()), ay = 1.0 / (hy() * hy());
  const double axy = 0.25 / (hx() * hy());
  for (int j = 0; j < ny; ++j) {
    const int jm = j == 0 ? ny - 1 : j - 1, jp = j == ny - 1 ? 0 : j + 1;
    for (int i = 0; i < nx; ++i) {
      const int im = i == 0 ? nx - 1 : i - 1, ip = i == nx - 1 ? 0 : i + 1;
      const double c = f[i + nx * j];
      fxx[i + nx * j] = ax * (f[ip + nx * j] - 2.0 * c + f[im + nx * j]);
      fyy[i + nx * j] = ay * (f[i + nx * jp] - 2.0 * c + f[i + nx * jm]);
      fxy[i + nx * j] = axy * (f[ip + nx * jp] - f[ip + nx * jm] - f[im + nx * jp] +
                               f[im + nx * jm]);
    }
  }
}

void Grid2::edge_gradient_sq(std::span<const double> f, std::span<double> out) const {
  const double ix = 1.0 / hx(), iy = 1.0 / hy();
  for (int j = 0; j < ny; ++j) {
    const int jp = j == ny - 1 ? 0 : j + 1;
    for (int i = 0; i < nx; ++i) {
      const int ip = i == nx - 1 ? 0 : i + 1;
      const double c = f[i + nx * j];
      const double dx = (f[ip + nx * j] - c) * ix, dy = (f[i + nx * jp] - c) * iy;
      out[i + nx * j] = dx * dx + dy * dy;
    }
  }
}

}  // namespace rflab::geometry
