#include "rflab/entropy/report.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "rflab/entropy/entropy.hpp"

namespace rflab::entropy {

namespace {

double derivative_at(const std::vector<double>& t, const std::vector<double>& y, std::size_t k) {
  const std::size_t n = t.size();
  if (n < 2) return 0.0;
  if (k == 0) return (y[1] - y[0]) / (t[1] - t[0]);
  if (k + 1 == n) return (y[n - 1] - y[n - 2]) / (t[n - 1] - t[n - 2]);
  // second-order three-point formula on an uneven grid
  const double h0 = t[k] - t[k - 1], h1 = t[k + 1] - t[k];
  return (-h1 / (h0 * (h0 + h1))) * y[k - 1] + ((h1 - h0) / (h0 * h1)) * y[k] +
         (h0 / (h1 * (h0 + h1))) * y[k + 1];
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

EntropyRow make_row(const flow::FlowHistory& h, const Field& u, double t, double sigma,
                    bool with_lambda) {
  const auto m = h.metric(t);
  const int n = h.dimension();
  EntropyRow r;
  r.t = t;
  r.sigma = sigma;
  r.F = F_functional(m, u);
  r.F_plus = r.F + 0.5 * n / sigma;
  const auto N = nash_entropy(m, u, sigma);
  r.N = N.N;
  r.N_plus = N.N_plus;
  r.W_plus = W_plus(m, u, sigma);
  r.rhs = expander_residual_rhs(m, u, sigma);
  if (with_lambda) {
    const auto l = lambda(m);
    r.lambda = l.lambda;
    r.lambda_bar = l.lambda_bar;
  }
  r.v_tilde = t > 0.0 ? geometry::volume(m) / std::pow(t, 0.5 * n) : 0.0;
  return r;
}

Verdict monotone(const std::string& name, const std::vector<double>& y, double sign, double tol) {
  Verdict v;
  v.check = name;
  v.tol = tol;
  v.worst = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < y.size(); ++k) v.worst = std::min(v.worst, sign * (y[k] - y[k - 1]));
  if (y.size() < 2) v.worst = 0.0;
  v.ok = v.worst >= -tol;
  return v;
}

}  // namespace

DensityProvider uniform_density(const flow::FlowHistory& h) {
  return [h](double t) {
    const auto m = h.metric(t);
    return Field(geometry::field_size(m), 1.0 / geometry::volume(m));
  };
}

DensityProvider sampled_density(std::vector<heat::DensityState> states) {
  return [states = std::move(states)](double t) {
    for (const auto& s : states) {
      if (std::abs(s.t - t) <= 1e-9 * std::max(1.0, std::abs(t))) return s.u;
    }
    throw std::out_of_range("sampled density: time was not retained");
  };
}

bool EntropyReport::all_ok() const {
  return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.ok; });
}

const Verdict& EntropyReport::verdict(const std::string& check) const {
  for (const auto& v : verdicts) {
    if (v.check == check) return v;
  }
  throw std::out_of_range("entropy report: no verdict " + check);
}

EntropyReport entropy_report(const flow::FlowHistory& h, const DensityProvider& density,
                             const std::vector<double>& times, const EntropyOptions& options) {
  if (!std::is_sorted(times.begin(), times.end()) ||
      std::adjacent_find(times.begin(), times.end()) != times.end()) {
    throw std::invalid_argument("entropy report: times must be strictly increasing");
  }
  const int n = h.dimension();
  EntropyReport rep;
  for (double t : times) {
    const double sigma = t - options.birth_time;
    if (!(sigma > 0.0)) throw std::invalid_argument("entropy report: times must follow the birth time");
    rep.rows.push_back(make_row(h, density(t), t, sigma, options.with_lambda));
  }
  std::vector<double> W, Np, Lb, Vt, F, Vt_times;
  for (const auto& r : rep.rows) {
    W.push_back(r.W_plus);
    Np.push_back(r.N_plus);
    Lb.push_back(r.lambda_bar);
    F.push_back(r.F);
    if (r.t > 0.0) Vt.push_back(r.v_tilde);
  }
  for (std::size_t k = 0; k < rep.rows.size(); ++k) rep.rows[k].dW_dt = derivative_at(times, W, k);

  const double tol = options.tol;
  rep.verdicts.push_back(monotone("W_plus_nondecreasing", W, 1.0, tol));
  rep.verdicts.push_back(monotone("N_plus_nondecreasing", Np, 1.0, tol));
  if (options.with_lambda) rep.verdicts.push_back(monotone("lambda_bar_nondecreasing", Lb, 1.0, tol));
  rep.verdicts.push_back(monotone("v_tilde_nonincreasing", Vt, -1.0, tol));
  {
    Verdict v{"F_bounds", true, std::numeric_limits<double>::infinity(), tol};
    for (const auto& r : rep.rows) {
      v.worst = std::min({v.worst, -r.F, r.F + 0.5 * n / r.sigma});
    }
    v.ok = v.worst >= -tol;
    rep.verdicts.push_back(v);
  }
  {
    // F grows at least like (2/n)F²: compare each increment with the
    // smaller endpoint value of the bound (exact when F² is monotone)
    Verdict v{"F_growth", true, 0.0, tol};
    for (std::size_t k = 1; k < F.size(); ++k) {
      const double dt = times[k] - times[k - 1];
      const double lower = dt * (2.0 / n) * std::min(F[k] * F[k], F[k - 1] * F[k - 1]);
      v.worst = std::min(v.worst, F[k] - F[k - 1] - lower);
    }
    v.ok = v.worst >= -tol;
    rep.verdicts.push_back(v);
  }
  {
    Verdict v{"W_decomposition", true, 0.0, 1e-10};
    for (const auto& r : rep.rows) {
      const double err = std::abs(r.W_plus - (r.sigma * r.F_plus + r.N_plus));
      v.worst = std::min(v.worst, -err / std::max(1.0, std::abs(r.W_plus)));
    }
    v.ok = v.worst >= -v.tol;
    rep.verdicts.push_back(v);
  }
  return rep;
}

DerivativeCheck check_entropy_derivative(const flow::FlowHistory& h, const DensityProvider& density,
                                         const std::vector<double>& times, double step,
                                         double birth_time, double tol, bool flip_rhs_sign) {
  if (!(step > 0.0)) throw std::invalid_argument("entropy derivative: step must be positive");
  DerivativeCheck out;
  out.tol = tol;
  auto W = [&](double t) { return W_plus(h.metric(t), density(t), t - birth_time); };
  for (double t : times) {
    DerivativePoint p;
    p.t = t;
    p.fd = (W(t - 2 * step) - 8.0 * W(t - step) + 8.0 * W(t + step) - W(t + 2 * step)) /
           (12.0 * step);
    p.rhs = expander_residual_rhs(h.metric(t), density(t), t - birth_time);
    if (flip_rhs_sign) p.rhs = -p.rhs;
    out.max_residual = std::max(out.max_residual, std::abs(p.fd - p.rhs));
    out.points.push_back(p);
  }
  out.ok = out.max_residual <= tol;
  return out;
}

TailFit fit_tail(const std::vector<double>& t, const std::vector<double>& y) {
  if (t.size() != y.size() || t.size() < 4) {
    throw std::invalid_argument("fit_tail: need at least four samples");
  }
  const double t0 = *std::min_element(t.begin(), t.end());
  Eigen::MatrixXd A(t.size(), 3);
  Eigen::VectorXd b(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double x = t0 / t[i];  // scaled so the columns are comparable
    A(i, 0) = 1.0;
    A(i, 1) = x;
    A(i, 2) = x * x;
    b(i) = y[i];
  }
  const Eigen::VectorXd c = A.colPivHouseholderQr().solve(b);
  TailFit f;
  f.limit = c(0);
  f.a = c(1) * t0;
  f.b = c(2) * t0 * t0;
  f.rms = std::sqrt((A * c - b).squaredNorm() / static_cast<double>(t.size()));
  return f;
}

AsymptoticsReport asymptotics_report(const flow::FlowHistory& h, const DensityProvider& density,
                                     double t_end, int samples) {
  if (samples < 4) throw std::invalid_argument("asymptotics: need at least four samples");
  const int n = h.dimension();
  const double t_lo = 0.1 * t_end;
  if (!(t_lo > 0.0)) throw std::invalid_argument("asymptotics: t_end must be positive");
  AsymptoticsReport rep;
  std::vector<double> ts, W, Lb, tL, logt, logv;
  for (int i = 0; i < samples; ++i) {
    const double t = t_lo * std::pow(10.0, static_cast<double>(i) / (samples - 1));
    auto r = make_row(h, density(t), t, t, true);
    ts.push_back(t);
    W.push_back(r.W_plus);
    Lb.push_back(r.lambda_bar);
    tL.push_back(t * r.lambda);
    logt.push_back(std::log(t));
    logv.push_back(std::log(r.v_tilde));
    rep.rows.push_back(r);
  }
  rep.volume_exponent = slope(logt, logv);
  // any power-law decay of Ṽ means collapse; a positive limit gives O(1/t) drift only
  rep.collapsing = rep.volume_exponent < -0.05;
  std::vector<double> vt;
  for (const auto& r : rep.rows) vt.push_back(r.v_tilde);
  rep.v_tilde_limit = rep.collapsing ? 0.0 : fit_tail(ts, vt).limit;
  rep.w_plus = fit_tail(ts, W);
  rep.lambda_bar = fit_tail(ts, Lb);
  rep.t_lambda = fit_tail(ts, tL);
  const double c = 0.5 * n * (1.0 + std::log(4.0 * std::numbers::pi));
  rep.w_plus_predicted = rep.collapsing ? std::numeric_limits<double>::infinity()
                                        : -std::log(rep.v_tilde_limit) + c;
  rep.lambda_bar_predicted = -0.5 * n * std::pow(rep.v_tilde_limit, 2.0 / n);
  rep.t_lambda_predicted = -0.5 * n;
  return rep;
}

RescaledIntegral rescaled_defect_integral(const flow::FlowHistory& h, const DensityProvider& density,
                                          std::pair<double, double> t_range, int samples) {
  auto [a, b] = t_range;
  if (!(a > 0.0) || !(b > a)) throw std::invalid_argument("rescaled integral: need 0 < t_lo < t_hi");
  if (samples < 3) samples = 3;
  if (samples % 2 == 0) ++samples;
  RescaledIntegral out;
  const double s0 = std::log(a), s1 = std::log(b);
  const double ds = (s1 - s0) / (samples - 1);
  for (int i = 0; i < samples; ++i) {
    const double s = i + 1 == samples ? s1 : s0 + i * ds;
    const double t = std::exp(s);
    out.log_times.push_back(s);
    out.integrand.push_back(0.5 * t * expander_residual_rhs(h.metric(t), density(t), t));
  }
  double sum = out.integrand.front() + out.integrand.back();
  for (int i = 1; i + 1 < samples; ++i) sum += (i % 2 ? 4.0 : 2.0) * out.integrand[i];
  out.integral = sum * ds / 3.0;
  const int tail = std::max(3, samples / 4);
  std::vector<double> x, y;
  for (int i = samples - tail; i < samples; ++i) {
    x.push_back(out.log_times[i]);
    y.push_back(std::log(std::max(out.integrand[i], 1e-300)));
  }
  out.decay_exponent = slope(x, y);
  return out;
}

}  // namespace rflab::entropy
