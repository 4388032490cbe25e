#include "rflab/numerics/ode.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

namespace rflab::numerics {

namespace {

// Dormand–Prince 5(4) tableau.
constexpr std::array<double, 7> kC{0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0};
constexpr double kA21 = 1.0 / 5.0;
constexpr double kA31 = 3.0 / 40.0, kA32 = 9.0 / 40.0;
constexpr double kA41 = 44.0 / 45.0, kA42 = -56.0 / 15.0, kA43 = 32.0 / 9.0;
constexpr double kA51 = 19372.0 / 6561.0, kA52 = -25360.0 / 2187.0, kA53 = 64448.0 / 6561.0,
                 kA54 = -212.0 / 729.0;
constexpr double kA61 = 9017.0 / 3168.0, kA62 = -355.0 / 33.0, kA63 = 46732.0 / 5247.0,
                 kA64 = 49.0 / 176.0, kA65 = -5103.0 / 18656.0;
constexpr double kB1 = 35.0 / 384.0, kB3 = 500.0 / 1113.0, kB4 = 125.0 / 192.0,
                 kB5 = -2187.0 / 6784.0, kB6 = 11.0 / 84.0;
constexpr double kE1 = 71.0 / 57600.0, kE3 = -71.0 / 16695.0, kE4 = 71.0 / 1920.0,
                 kE5 = -17253.0 / 339200.0, kE6 = 22.0 / 525.0, kE7 = -1.0 / 40.0;

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

double scaled_norm(std::span<const double> v, std::span<const double> y0,
                   std::span<const double> y1, const ToleranceConfig& tol) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double sc = tol.abs_tol + tol.rel_tol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double r = v[i] / sc;
    s += r * r;
  }
  return std::sqrt(s / static_cast<double>(std::max<std::size_t>(v.size(), 1)));
}

}  // namespace

double hermite(double t, double t0, double t1, double y0, double y1, double d0, double d1) {
  const double h = t1 - t0;
  const double s = (t - t0) / h;
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1;
  const double h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2;
  const double h11 = s3 - s2;
  return h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
}

double hermite_derivative(double t, double t0, double t1, double y0, double y1, double d0,
                          double d1) {
  const double h = t1 - t0;
  const double s = (t - t0) / h;
  const double s2 = s * s;
  const double dh00 = (6 * s2 - 6 * s) / h;
  const double dh10 = 3 * s2 - 4 * s + 1;
  const double dh01 = (-6 * s2 + 6 * s) / h;
  const double dh11 = 3 * s2 - 2 * s;
  return dh00 * y0 + dh10 * d0 + dh01 * y1 + dh11 * d1;
}

State OdeTrajectory::at(double time) const {
  if (t.empty()) throw std::out_of_range("OdeTrajectory::at: empty trajectory");
  if (time <= t.front()) return y.front();
  if (time >= t.back()) return y.back();
  const auto it = std::upper_bound(t.begin(), t.end(), time);
  const std::size_t k = static_cast<std::size_t>(it - t.begin());
  State out(y[k].size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = hermite(time, t[k - 1], t[k], y[k - 1][i], y[k][i], dydt[k - 1][i], dydt[k][i]);
  }
  return out;
}

TimeSeries OdeTrajectory::component(std::size_t i) const {
  std::vector<double> vals;
  vals.reserve(y.size());
  for (const auto& s : y) vals.push_back(s.at(i));
  return TimeSeries(t, std::move(vals));
}

OdeTrajectory integrate_ode(const OdeRhs& rhs, State y0, double t0, double t1,
                            const OdeOptions& options) {
  options.tol.validate();
  if (!(t1 > t0)) throw std::invalid_argument("integrate_ode: require t1 > t0");
  if (!all_finite(y0)) throw std::invalid_argument("integrate_ode: non-finite initial state");

  const std::size_t n = y0.size();
  const auto& tol = options.tol;

  std::vector<double> stops;
  for (double s : options.stops) {
    if (s > t0 && s < t1) stops.push_back(s);
  }
  stops.push_back(t1);
  std::sort(stops.begin(), stops.end());
  stops.erase(std::unique(stops.begin(), stops.end()), stops.end());
  std::size_t next_stop = 0;

  OdeTrajectory traj;
  State k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), y1(n), err(n);

  double t = t0;
  State y = std::move(y0);
  rhs(t, y, k1);
  if (!all_finite(k1)) {
    traj.status = OdeStatus::NonFinite;
    traj.last_valid_time = t0;
    traj.diagnostic = "non-finite right-hand side at the initial state";
    traj.t.push_back(t);
    traj.y.push_back(y);
    traj.dydt.push_back(k1);
    return traj;
  }

  auto record = [&](double time, const State& state, const State& slope) {
    if (options.record || traj.t.empty()) {
      traj.t.push_back(time);
      traj.y.push_back(state);
      traj.dydt.push_back(slope);
    } else {
      traj.t.back() = time;
      traj.y.back() = state;
      traj.dydt.back() = slope;
    }
  };
  record(t, y, k1);

  double h = options.initial_step;
  if (!(h > 0.0)) {
    // Hairer–Wanner starting-step heuristic.
    double d0 = 0.0, d1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double s = tol.abs_tol + tol.rel_tol * std::abs(y[i]);
      d0 += (y[i] / s) * (y[i] / s);
      d1 += (k1[i] / s) * (k1[i] / s);
    }
    d0 = std::sqrt(d0 / std::max<double>(n, 1));
    d1 = std::sqrt(d1 / std::max<double>(n, 1));
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h = std::min(h, t1 - t0);
  }
  h = std::min(h, options.max_step);

  double err_prev = 1e-4;
  bool last_rejected = false;
  const double eps = std::numeric_limits<double>::epsilon();

  while (t < t1) {
    const double min_step = 16.0 * eps * std::max(std::abs(t), 1e-300);
    if (h < min_step) {
      traj.status = OdeStatus::StepUnderflow;
      traj.last_valid_time = t;
      std::ostringstream os;
      os << "step size underflow at t=" << t << " (h=" << h << ")";
      traj.diagnostic = os.str();
      return traj;
    }

    const double stop = stops[next_stop];
    const double h_untruncated = h;
    bool hits_stop = false;
    if (t + h >= stop || stop - (t + h) < min_step) {
      h = stop - t;
      hits_stop = true;
    }

    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * kA21 * k1[i];
    rhs(t + kC[1] * h, tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (kA31 * k1[i] + kA32 * k2[i]);
    rhs(t + kC[2] * h, tmp, k3);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + h * (kA41 * k1[i] + kA42 * k2[i] + kA43 * k3[i]);
    rhs(t + kC[3] * h, tmp, k4);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + h * (kA51 * k1[i] + kA52 * k2[i] + kA53 * k3[i] + kA54 * k4[i]);
    rhs(t + kC[4] * h, tmp, k5);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + h * (kA61 * k1[i] + kA62 * k2[i] + kA63 * k3[i] + kA64 * k4[i] +
                           kA65 * k5[i]);
    const double t_new = hits_stop ? stop : t + h;
    rhs(t_new, tmp, k6);
    for (std::size_t i = 0; i < n; ++i)
      y1[i] = y[i] + h * (kB1 * k1[i] + kB3 * k3[i] + kB4 * k4[i] + kB5 * k5[i] + kB6 * k6[i]);
    rhs(t_new, y1, k7);

    if (!all_finite(y1) || !all_finite(k7)) {
      ++traj.rejected_steps;
      h *= 0.25;
      last_rejected = true;
      if (h < min_step) {
        traj.status = OdeStatus::NonFinite;
        traj.last_valid_time = t;
        std::ostringstream os;
        os << "non-finite state near t=" << t;
        traj.diagnostic = os.str();
        return traj;
      }
      continue;
    }

    for (std::size_t i = 0; i < n; ++i) {
      err[i] = h * (kE1 * k1[i] + kE3 * k3[i] + kE4 * k4[i] + kE5 * k5[i] + kE6 * k6[i] +
                    kE7 * k7[i]);
    }
    const double e = scaled_norm(err, y, y1, tol);

    if (e <= 1.0) {
      t = t_new;
      y.swap(y1);
      k1.swap(k7);
      record(t, y, k1);
      if (hits_stop) ++next_stop;

      double fac = (e == 0.0) ? 10.0 : 0.9 * std::pow(e, -0.7 / 5.0) * std::pow(err_prev, 0.4 / 5.0);
      fac = std::clamp(fac, 0.2, 10.0);
      if (last_rejected) fac = std::min(fac, 1.0);
      err_prev = std::max(e, 1e-4);
      last_rejected = false;
      // a step truncated to hit a stop does not shrink the next one
      h = hits_stop ? std::max(fac * h, h_untruncated) : fac * h;
      h = std::min(h, options.max_step);

      if (options.terminate && options.terminate(t, y)) {
        traj.status = OdeStatus::Terminated;
        traj.last_valid_time = t;
        traj.diagnostic = "terminated by event";
        return traj;
      }
    } else {
      ++traj.rejected_steps;
      h *= std::max(0.2, 0.9 * std::pow(e, -0.2));
      last_rejected = true;
    }
  }

  traj.status = OdeStatus::Completed;
  traj.last_valid_time = t;
  return traj;
}

}  // namespace rflab::numerics
