#include "rflab/reduced/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace rflab::reduced {

namespace {

// Catmull–Rom weights for the four points i-1..i+2 at fraction f, and their
// derivatives in f.
void catmull_rom(double f, double w[4], double dw[4]) {
  const double f2 = f * f, f3 = f2 * f;
  w[0] = 0.5 * (-f + 2.0 * f2 - f3);
  w[1] = 0.5 * (2.0 - 5.0 * f2 + 3.0 * f3);
  w[2] = 0.5 * (f + 4.0 * f2 - 3.0 * f3);
  w[3] = 0.5 * (-f2 + f3);
  dw[0] = 0.5 * (-1.0 + 4.0 * f - 3.0 * f2);
  dw[1] = 0.5 * (-10.0 * f + 9.0 * f2);
  dw[2] = 0.5 * (1.0 + 8.0 * f - 9.0 * f2);
  dw[3] = 0.5 * (-2.0 * f + 3.0 * f2);
}

struct Stencil {
  std::size_t idx[16];
  double w[16], wx[16], wy[16];

  // value and both derivatives of the bicubic interpolant of f
  void eval(const Field& f, double& v, double& fx, double& fy) const {
    v = fx = fy = 0.0;
    for (int k = 0; k < 16; ++k) {
      const double x = f[idx[k]];
      v += w[k] * x;
      fx += wx[k] * x;
      fy += wy[k] * x;
    }
  }
};

}  // namespace

TorusSampler::TorusSampler(const flow::FlowHistory& h) {
  if (h.kind() != geometry::ModelKind::ConformalTorus) {
    throw std::invalid_argument("torus sampler: history is not a conformal torus flow");
  }
  times_ = h.snapshot_times();
  for (double t : times_) {
    Field phi, rate;
    h.parameters(t, phi, rate);
    const auto m = h.metric(t);
    const auto& tm = std::get<geometry::ConformalTorusMetric>(m);
    const auto curv = geometry::curvature(m);
    Field rt = geometry::laplacian(m, curv.scalar);
    for (std::size_t k = 0; k < rt.size(); ++k) rt[k] += curv.scalar[k] * curv.scalar[k];
    nx_ = tm.grid.nx;
    ny_ = tm.grid.ny;
    lx_ = tm.grid.lx;
    ly_ = tm.grid.ly;
    phi_.push_back(std::move(phi));
    phi_t_.push_back(std::move(rate));
    R_.push_back(curv.scalar);
    R_t_.push_back(std::move(rt));
  }
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& p : phi_) {
    const auto [mn, mx] = std::minmax_element(p.begin(), p.end());
    lo = std::min(lo, std::exp(2.0 * *mn));
    hi = std::max(hi, std::exp(2.0 * *mx));
  }
  c_range_ = {lo, hi};
  r_min_ = std::numeric_limits<double>::infinity();
  for (const auto& r : R_) r_min_ = std::min(r_min_, *std::min_element(r.begin(), r.end()));
  // the interpolant may undershoot the nodal values slightly
  r_min_ -= 0.1 * std::abs(r_min_) + 1e-12;
  base_time_ = h.t_begin();
  max_eta_ = h.t_end() - h.t_begin();
}

SpaceTimeSample TorusSampler::at(double x, double y, double eta) const {
  const double t = base_time_ + eta;
  const double slack = 1e-12 * std::max(1.0, std::abs(times_.back()));
  if (t < times_.front() - slack || t > times_.back() + slack) {
    std::ostringstream os;
    os << "torus sampler: time " << t << " outside the history";
    throw std::out_of_range(os.str());
  }
  const double hx = lx_ / nx_, hy = ly_ / ny_;
  const double ux = x / hx, uy = y / hy;
  const double fi = std::floor(ux), fj = std::floor(uy);
  double wxs[4], dwx[4], wys[4], dwy[4];
  catmull_rom(ux - fi, wxs, dwx);
  catmull_rom(uy - fj, wys, dwy);
  const long i0 = static_cast<long>(fi), j0 = static_cast<long>(fj);
  Stencil st;
  for (int b = 0; b < 4; ++b) {
    const long jj = (((j0 - 1 + b) % ny_) + ny_) % ny_;
    for (int a = 0; a < 4; ++a) {
      const long ii = (((i0 - 1 + a) % nx_) + nx_) % nx_;
      const int k = a + 4 * b;
      st.idx[k] = static_cast<std::size_t>(ii + static_cast<long>(nx_) * jj);
      st.w[k] = wxs[a] * wys[b];
      st.wx[k] = dwx[a] * wys[b] / hx;
      st.wy[k] = wxs[a] * dwy[b] / hy;
    }
  }

  // snapshot interval
  std::size_t k = 0;
  if (times_.size() > 1) {
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    k = static_cast<std::size_t>(std::clamp<long>(it - times_.begin() - 1, 0,
                                                   static_cast<long>(times_.size()) - 2));
  }
  SpaceTimeSample s;
  if (times_.size() == 1) {
    double p, px, py;
    st.eval(phi_[0], p, px, py);
    s.c = std::exp(2.0 * p);
    s.psi_x = px;
    s.psi_y = py;
    st.eval(R_[0], s.R, s.R_x, s.R_y);
    return s;
  }
  const double t0 = times_[k], dt = times_[k + 1] - t0;
  const double tau = std::clamp((t - t0) / dt, 0.0, 1.0);
  const double tau2 = tau * tau, tau3 = tau2 * tau;
  // cubic Hermite basis and its derivative in τ
  const double h00 = 2 * tau3 - 3 * tau2 + 1, h10 = tau3 - 2 * tau2 + tau;
  const double h01 = -2 * tau3 + 3 * tau2, h11 = tau3 - tau2;
  const double d00 = 6 * tau2 - 6 * tau, d10 = 3 * tau2 - 4 * tau + 1;
  const double d01 = -6 * tau2 + 6 * tau, d11 = 3 * tau2 - 2 * tau;

  auto combine = [&](const std::vector<Field>& val, const std::vector<Field>& rate, double& v,
                     double& vx, double& vy, double& vt) {
    double a, ax, ay, b, bx, by, ra, rax, ray, rb, rbx, rby;
    st.eval(val[k], a, ax, ay);
    st.eval(val[k + 1], b, bx, by);
    st.eval(rate[k], ra, rax, ray);
    st.eval(rate[k + 1], rb, rbx, rby);
    v = h00 * a + h10 * dt * ra + h01 * b + h11 * dt * rb;
    vx = h00 * ax + h10 * dt * rax + h01 * bx + h11 * dt * rbx;
    vy = h00 * ay + h10 * dt * ray + h01 * by + h11 * dt * rby;
    vt = (d00 * a + d01 * b) / dt + d10 * ra + d11 * rb;
  };
  double p, px, py, pt;
  combine(phi_, phi_t_, p, px, py, pt);
  s.c = std::exp(2.0 * p);
  s.psi_x = px;
  s.psi_y = py;
  s.kappa = -pt;
  combine(R_, R_t_, s.R, s.R_x, s.R_y, s.R_t);
  return s;
}

ModelSampler::ModelSampler(const flow::FlowHistory& h, double base_time) {
  if (h.kind() != geometry::ModelKind::ModelSpace) {
    throw std::invalid_argument("model sampler: history is not a model space flow");
  }
  const auto m = std::get<geometry::ModelSpaceMetric>(h.metric(h.t_begin()));
  Field a, rate;
  h.parameters(h.t_begin(), a, rate);
  n_ = m.dimension;
  sign_ = m.sign;
  rho_ = m.unit_ricci();
  base_volume_ = m.base_volume;
  slope_ = rate[0];
  a0_ = a[0] + slope_ * (base_time - h.t_begin());
  // the vertex of an expander sits exactly at a = 0
  if (std::abs(a0_) <= 1e-12 * std::abs(a[0])) a0_ = 0.0;
  if (a0_ < 0.0) throw std::invalid_argument("model sampler: base time precedes the birth time");
  base_time_ = base_time;
  max_eta_ = (h.extinct() ? h.extinction_time() : h.t_end()) - base_time;
}

SpaceTimeSample ModelSampler::at(double /*x*/, double /*y*/, double eta) const {
  const double a = scale(eta);
  if (!(a > 0.0)) throw std::out_of_range("model sampler: metric degenerates at this time");
  SpaceTimeSample s;
  s.c = a;
  s.kappa = -0.5 * slope_ / a;
  s.R = n_ * rho_ / a;
  s.R_t = -n_ * rho_ * slope_ / (a * a);
  return s;
}

std::unique_ptr<ReducedGeometry> make_geometry(const flow::FlowHistory& h, double base_time) {
  switch (h.kind()) {
    case geometry::ModelKind::ConformalTorus: {
      if (std::abs(base_time - h.t_begin()) > 1e-12 * std::max(1.0, std::abs(base_time))) {
        throw std::invalid_argument("reduced geometry: torus paths start at the history start");
      }
      return std::make_unique<TorusSampler>(h);
    }
    case geometry::ModelKind::ModelSpace:
      return std::make_unique<ModelSampler>(h, base_time);
    case geometry::ModelKind::Homogeneous:
      break;
  }
  throw UnsupportedModel(
      "reduced distance: homogeneous (non-isotropic) metrics are not supported; use a model space "
      "or a conformal torus");
}

}  // namespace rflab::reduced
