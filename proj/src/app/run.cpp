#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

#include "rflab/app/scenario.hpp"
#include "rflab/entropy/entropy.hpp"
#include "rflab/entropy/report.hpp"
#include "rflab/flow/flow.hpp"
#include "rflab/geometry/serialize.hpp"
#include "rflab/heat/conjugate_heat.hpp"
#include "rflab/reduced/field.hpp"
#include "rflab/report/svg.hpp"
#include "rflab/report/table.hpp"

namespace rflab::app {

using nlohmann::json;
using geometry::ModelKind;

bool ScenarioResult::ok() const {
  return std::all_of(records.begin(), records.end(),
                     [](const CheckRecord& r) { return r.status != "fail" && r.status != "error"; });
}

json ScenarioResult::report() const {
  json rows = json::array();
  for (const auto& r : records) {
    rows.push_back({{"check", r.check},
                    {"item", r.item},
                    {"status", r.status},
                    {"value", r.value},
                    {"tol", r.tol},
                    {"message", r.message}});
  }
  json files = json::array();
  for (const auto& [path, _] : this->files) files.push_back(path);
  return {{"schema", kSchema}, {"name", name}, {"ok", ok()}, {"records", rows},
          {"summary", summary},  {"files", files}};
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Run {
  const Scenario& s;
  ScenarioResult& out;
  flow::FlowHistory h;
  ModelKind kind;
  int n = 0;
  double birth = 0.0;
  std::vector<double> times;
  bool log_spacing = false;
  entropy::DensityProvider density;

  void record(const std::string& check, const std::string& item, bool ok, double value, double tol,
              std::string message = {}) {
    out.records.push_back({check, item, ok ? "pass" : "fail", value, tol, std::move(message)});
  }
  void refused(const std::string& check, const std::string& item, std::string message) {
    out.records.push_back({check, item, "refused", 0.0, 0.0, std::move(message)});
  }
  void file(const std::string& path, std::string text) { out.files[path] = std::move(text); }
  void plot(const std::string& name, const std::string& title, const std::string& y_label,
            std::vector<report::Series> series, bool log_x) {
    report::ChartOptions o;
    o.title = s.name + ": " + title;
    o.y_label = y_label;
    o.log_x = log_x;
    file("plots/" + name + ".svg", report::line_chart_svg(series, o));
  }

  // first, last and evenly spread samples in between
  [[nodiscard]] std::vector<double> subsample(int count) const {
    const int m = static_cast<int>(times.size());
    if (count >= m) return times;
    std::vector<double> out;
    for (int k = 0; k < count; ++k) out.push_back(times[static_cast<std::size_t>(std::lround(k * (m - 1.0) / (count - 1)))]);
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  [[nodiscard]] double base_time() const {
    if (s.reduced.base_time) return *s.reduced.base_time;
    if (kind == ModelKind::ModelSpace && birth < s.t0) return birth;
    return s.t0;
  }
};

std::vector<double> sample_times(const Scenario& s, bool& log_spacing) {
  log_spacing = s.t_begin > 0.0 && s.t_end / s.t_begin > 4.0;
  std::vector<double> out;
  for (int k = 0; k < s.samples; ++k) {
    const double f = static_cast<double>(k) / (s.samples - 1);
    out.push_back(log_spacing ? s.t_begin * std::pow(s.t_end / s.t_begin, f) : s.t_begin + f * (s.t_end - s.t_begin));
  }
  out.front() = s.t_begin;
  out.back() = s.t_end;
  return out;
}

void setup_density(Run& r) {
  if (r.kind != ModelKind::ConformalTorus) {
    r.density = entropy::uniform_density(r.h);
    return;
  }
  heat::ImmortalOptions io;
  io.tol = 1e-8;
  io.sample_times = r.times;
  io.birth_time = r.birth;
  auto d = heat::construct_immortal_density(r.h, {r.times.front(), r.times.back()}, io);
  double mass_err = 0.0, min_u = kInf;
  for (const auto& st : d.states) {
    const auto w = geometry::measure(r.h.metric(st.t));
    mass_err = std::max(mass_err, std::abs(weighted_sum(st.u, w) - 1.0));
    for (double u : st.u) min_u = std::min(min_u, u);
  }
  r.record("entropy", "immortal_density_converged", d.converged, d.cauchy_gap, io.tol);
  r.record("entropy", "mass_conservation", mass_err <= 1e-10, mass_err, 1e-10);
  r.record("entropy", "positivity", min_u > 0.0, min_u, 0.0);
  r.out.summary["immortal_density"] = {{"cauchy_gap", d.cauchy_gap}, {"construction_tail", d.construction_tail}};
  r.density = entropy::sampled_density(std::move(d.states));
}

void check_entropy(Run& r) {
  entropy::EntropyOptions eo;
  eo.birth_time = r.birth;
  eo.tol = r.s.tol("entropy");
  const auto rep = entropy::entropy_report(r.h, r.density, r.times, eo);
  for (const auto& v : rep.verdicts) r.record("entropy", v.check, v.ok, v.worst, v.tol);
  if (r.s.t0 <= 0.0) {
    const auto lb = flow::check_R_lower_bound(r.h, eo.tol);
    r.record("entropy", "R_lower_bound", lb.ok, lb.min_margin, lb.tol);
  }
  report::Table t;
  std::vector<double> W;
  auto col = [&](const char* name, auto get) {
    std::vector<double> v;
    for (const auto& row : rep.rows) v.push_back(get(row));
    t.add(name, v);
    return v;
  };
  const auto ts = col("t", [](const auto& x) { return x.t; });
  col("sigma", [](const auto& x) { return x.sigma; });
  col("F", [](const auto& x) { return x.F; });
  col("F_plus", [](const auto& x) { return x.F_plus; });
  col("N", [](const auto& x) { return x.N; });
  col("N_plus", [](const auto& x) { return x.N_plus; });
  W = col("W_plus", [](const auto& x) { return x.W_plus; });
  col("dW_dt", [](const auto& x) { return x.dW_dt; });
  col("rhs", [](const auto& x) { return x.rhs; });
  col("lambda", [](const auto& x) { return x.lambda; });
  const auto lb = col("lambda_bar", [](const auto& x) { return x.lambda_bar; });
  const auto vt = col("v_tilde", [](const auto& x) { return x.v_tilde; });
  r.file("series/entropy.csv", t.csv());
  r.plot("w_plus", "expander entropy", "W+", {{"W+", ts, W}}, r.log_spacing);
  r.plot("lambda_bar", "scaled eigenvalue", "lambda bar", {{"lambda bar", ts, lb}}, r.log_spacing);
  r.plot("v_tilde", "scaled volume", "V / t^(n/2)", {{"V tilde", ts, vt}}, r.log_spacing);

  const auto [lo, hi] = std::minmax_element(W.begin(), W.end());
  const double spread = *hi - *lo;
  r.out.summary["entropy"] = {{"w_plus_first", W.front()},
                              {"w_plus_last", W.back()},
                              {"w_plus_spread", spread},
                              {"w_plus_constant", spread <= r.s.tol("constancy")},
                              {"lambda_bar_last", lb.back()}};
}

void check_harnack(Run& r) {
  const double tol = r.s.tol("harnack");
  const double tc = r.times[r.times.size() / 2];
  if (r.kind != ModelKind::ConformalTorus) {
    // dW₊/dt against the integrated soliton defect
    const double step = 1e-3 * (r.s.t_begin - r.birth);
    std::vector<double> inner;
    for (double t : r.times) {
      if (t - 2.0 * step >= r.s.t0 && t + 2.0 * step <= r.h.t_end()) inner.push_back(t);
    }
    const auto d = entropy::check_entropy_derivative(r.h, r.density, inner, step, r.birth, tol);
    r.record("harnack", "dW_dt_matches_rhs", d.ok, d.max_residual, tol);
    double min_rhs = kInf;
    for (const auto& p : d.points) min_rhs = std::min(min_rhs, p.rhs);
    r.record("harnack", "rhs_nonnegative", min_rhs >= -tol, min_rhs, tol);

    const double hs = 1e-3 * (tc - r.birth);
    heat::BackwardOptions bo;
    bo.dt = hs;
    bo.birth_time = r.birth;
    bo.keep_every = 1;
    if (tc + 2.0 * hs <= r.h.t_end() && tc - 2.0 * hs >= r.s.t0) {
      const auto st = heat::solve_conjugate_backward(r.h, tc + 2.0 * hs, Field(1, 1.0 / r.h.volume(tc + 2.0 * hs)),
                                                     tc - 2.0 * hs, bo);
      const auto hr = heat::check_harnack_identity(st, r.h, r.birth, 1e-8);
      r.record("harnack", "pointwise_identity", hr.ok, hr.max_residual, hr.tol);
    }
  } else {
    const double rel = r.s.tol("harnack_torus");
    heat::BackwardOptions bo;
    bo.birth_time = r.birth;
    bo.keep_every = 1;
    const double step = r.h.native_step();
    bo.keep_from = tc - 2.5 * step;
    bo.keep_to = tc + 2.5 * step;
    const double t_final = std::min(r.h.t_end(), tc + 8.0 * step);
    Field phi, rate;
    r.h.parameters(t_final, phi, rate);
    const auto m = r.h.metric(t_final);
    Field u(geometry::field_size(m), 1.0 / geometry::volume(m));
    const auto st = heat::solve_conjugate_backward(r.h, t_final, u, std::max(r.s.t0, tc - 8.0 * step), bo);
    std::vector<heat::DensityState> mid;
    for (const auto& x : st) {
      if (x.t >= bo.keep_from && x.t <= bo.keep_to) mid.push_back(x);
    }
    if (mid.size() == 5) {
      const auto hr = heat::check_harnack_identity(mid, r.h, r.birth, kInf);
      const double v = hr.max_residual / std::max(1.0, hr.max_lhs);
      r.record("harnack", "pointwise_identity_relative", v <= rel, v, rel);
      const auto fr = heat::check_f_plus_evolution(mid, r.h, r.birth, kInf);
      const double w = fr.max_residual / std::max(1.0, fr.max_lhs);
      r.record("harnack", "f_plus_evolution_relative", w <= rel, w, rel);
    }
  }

  if (r.kind == ModelKind::Homogeneous) return;
  // matrix Harnack consequence: Hessian bound for L₊
  const double bt = r.base_time();
  std::vector<reduced::Target> targets;
  if (r.kind == ModelKind::ModelSpace) {
    for (double D : {0.25, 0.5, 1.0}) targets.push_back({{D * r.s.reduced.max_distance / 2.0, 0.0}, r.s.t_begin});
  } else {
    const auto base = r.s.reduced.base;
    for (double d : {0.1, 0.2}) targets.push_back({{base[0] + d, base[1] + 0.5 * d}, r.s.t_begin});
  }
  reduced::HessianOptions ho;
  const auto hr = reduced::hessian_check(r.h, bt, r.s.reduced.base, targets, ho);
  if (hr.refused) {
    r.refused("harnack", "hessian_bound", hr.reason);
  } else {
    r.record("harnack", "hessian_bound", hr.ok, hr.min_margin, hr.tol);
  }
}

void check_mu_nu(Run& r) {
  const double tol = r.s.tol("mu_nu");
  report::Table t;
  std::vector<double> ts, sig, mu, nu, sstar;
  for (double x : r.subsample(4)) {
    const auto m = r.h.metric(x);
    ts.push_back(x);
    sig.push_back(x - r.birth);
    mu.push_back(entropy::mu_plus(m, x - r.birth).value);
    const auto nr = entropy::nu_plus(m);
    nu.push_back(nr.unbounded ? kInf : nr.value);
    sstar.push_back(nr.unbounded ? kInf : nr.sigma);
  }
  double worst = kInf;
  for (std::size_t k = 1; k < mu.size(); ++k) worst = std::min(worst, mu[k] - mu[k - 1]);
  r.record("mu_nu", "mu_plus_nondecreasing", worst >= -tol, worst, tol);
  if (std::all_of(nu.begin(), nu.end(), [](double v) { return std::isfinite(v); })) {
    double w = kInf;
    for (std::size_t k = 1; k < nu.size(); ++k) w = std::min(w, nu[k] - nu[k - 1]);
    r.record("mu_nu", "nu_plus_nondecreasing", w >= -tol, w, tol);
  } else {
    r.refused("mu_nu", "nu_plus_nondecreasing", "nu_plus is unbounded (lambda >= 0)");
  }
  t.add("t", ts);
  t.add("sigma", sig);
  t.add("mu_plus", mu);
  t.add("nu_plus", nu);
  t.add("sigma_star", sstar);
  r.file("series/mu_nu.csv", t.csv());
  r.plot("mu_nu", "mu+ at sigma = t - T and nu+", "entropy", {{"mu+", ts, mu}, {"nu+", ts, nu}}, r.log_spacing);
  r.out.summary["mu_nu"] = {{"nu_plus_last", nu.back()}, {"sigma_star_last", sstar.back()}};
}

std::vector<reduced::Target> field_targets(const Run& r, double t) {
  std::vector<reduced::Target> out;
  const int m = r.s.reduced.targets;
  if (r.kind == ModelKind::ModelSpace) {
    for (int k = 1; k <= m; ++k) out.push_back({{r.s.reduced.max_distance * k / m, 0.0}, t});
    return out;
  }
  const auto& g = std::get<geometry::ConformalTorusMetric>(r.s.metric).grid;
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < m; ++i) out.push_back({{(i + 0.5) * g.lx / m, (j + 0.5) * g.ly / m}, t});
  }
  return out;
}

void check_reduced(Run& r) {
  const double bt = r.base_time();
  const double t = r.s.t_begin;
  const auto targets = field_targets(r, t);
  reduced::FieldOptions fo;
  fo.oracle_tol = r.s.tol("reduced");
  const auto f = reduced::ell_plus_field(r.h, bt, r.s.reduced.base, targets, fo);
  r.record("reduced", "oracle_agreement", f.max_oracle_gap <= fo.oracle_tol, f.max_oracle_gap, fo.oracle_tol);
  r.record("reduced", "geodesic_identity", f.max_identity_residual <= 1e-6, f.max_identity_residual, 1e-6);
  r.record("reduced", "shooting_converged", f.fallbacks == 0, f.fallbacks, 0.0);
  const double floor = -0.5 * r.n;
  r.record("reduced", "ell_lower_bound", f.min_ell >= floor - 1e-6, f.min_ell - floor, 1e-6);
  r.file("series/ell_plus.csv", reduced::field_csv(f));

  // geodesic to the farthest target, for plotting
  const auto g = reduced::make_geometry(r.h, bt);
  reduced::TargetOptions to;
  to.epsilon = f.epsilons.back();
  const auto far = std::max_element(f.points.begin(), f.points.end(),
                                    [](const auto& a, const auto& b) { return a.L_bar < b.L_bar; });
  const auto tv = reduced::shoot_to(*g, r.s.reduced.base, far->target.y, far->tau, to);
  reduced::ShootOptions so;
  so.epsilon = to.epsilon;
  r.file("series/geodesic.csv", reduced::geodesic_csv(*g, reduced::geodesic_shoot(*g, r.s.reduced.base, tv.momentum, far->tau, so)));

  if (r.s.reduced.identity_targets > 0) {
    std::vector<reduced::Target> sub;
    const int stride = std::max<int>(1, static_cast<int>(targets.size()) / r.s.reduced.identity_targets);
    for (std::size_t k = 0; k < targets.size() && static_cast<int>(sub.size()) < r.s.reduced.identity_targets;
         k += static_cast<std::size_t>(stride)) {
      sub.push_back(targets[k]);
    }
    reduced::IdentityOptions io;
    io.tol = r.s.tol("identities");
    const auto ir = reduced::check_identities(r.h, bt, r.s.reduced.base, sub, io);
    const double id = std::max(ir.max_gradient_identity, ir.max_time_identity);
    r.record("reduced", "gradient_and_time_identities", ir.identities_ok, id, ir.tol);
    const double ineq = std::max({ir.max_laplacian_bound, ir.max_supersolution, ir.max_v_like, -ir.min_heat_supersolution});
    r.record("reduced", "inequalities", ir.inequalities_ok, ineq, ir.tol);
    report::Table t;
    std::vector<double> c[10];
    for (const auto& row : ir.rows) {
      const double v[10] = {row.target.y[0], row.target.y[1], row.target.t, row.ell,
                            row.gradient_identity, row.time_identity, row.laplacian_bound, row.supersolution,
                            row.v_like, row.smooth ? 1.0 : 0.0};
      for (int k = 0; k < 10; ++k) c[k].push_back(v[k]);
    }
    const char* names[10] = {"y0", "y1", "t", "ell", "gradient_identity", "time_identity", "laplacian_bound",
                             "supersolution", "v_like", "smooth"};
    for (int k = 0; k < 10; ++k) t.add(names[k], c[k]);
    r.file("series/identities.csv", t.csv());
    r.out.summary["identities"] = {{"excluded_fraction", ir.excluded_fraction}};
  }
  r.out.summary["reduced"] = {{"base_time", bt},
                              {"targets", f.points.size()},
                              {"max_oracle_gap", f.max_oracle_gap},
                              {"max_identity_residual", f.max_identity_residual},
                              {"min_ell", f.min_ell},
                              {"epsilons", f.epsilons}};
}

void check_theta(Run& r) {
  const double bt = r.base_time();
  reduced::ThetaOptions o;
  o.torus_resolution = r.s.reduced.theta_resolution;
  o.tol = r.s.tol("theta");
  const auto ts = r.subsample(r.s.reduced.theta_times);
  const auto th = reduced::theta_plus(r.h, bt, r.s.reduced.base, ts, o);
  r.record("theta", "theta_nonincreasing", th.nonincreasing, th.max_increase, th.tol);
  r.record("theta", "theta_above_bound", th.above_bound, th.min_bound_ratio, 1.0, "smallest theta/bound");
  r.record("theta", "shooting_converged", th.fallbacks == 0, th.fallbacks, 0.0);
  r.file("series/theta.csv", reduced::theta_csv(th));
  r.plot("theta", "forward reduced volume", "theta+", {{"theta+", th.times, th.theta}, {"bound", th.times, th.lower_bound}},
         r.log_spacing);
  const auto [lo, hi] = std::minmax_element(th.theta.begin(), th.theta.end());
  json logs = json::array();
  for (double v : th.theta) logs.push_back(std::log(v));
  r.out.summary["theta"] = {{"base_time", bt},
                            {"theta_first", th.theta.front()},
                            {"theta_last", th.theta.back()},
                            {"log_theta", logs},
                            {"relative_spread", (*hi - *lo) / *hi}};
}

void check_asymptotics(Run& r) {
  const double tol = r.s.tol("asymptotics");
  const auto a = entropy::asymptotics_report(r.h, r.density, r.s.t_end);
  if (!a.collapsing) {
    const double dw = std::abs(a.w_plus.limit - a.w_plus_predicted);
    r.record("asymptotics", "w_plus_limit", dw <= tol, dw, tol);
    const double dl = std::abs(a.lambda_bar.limit - a.lambda_bar_predicted);
    r.record("asymptotics", "lambda_bar_limit", dl <= tol, dl, tol);
  } else {
    double dv = kInf, dl = kInf;
    bool neg = true;
    for (std::size_t k = 1; k < a.rows.size(); ++k) {
      dv = std::min(dv, a.rows[k - 1].v_tilde - a.rows[k].v_tilde);
      dl = std::min(dl, a.rows[k].lambda_bar - a.rows[k - 1].lambda_bar);
      neg = neg && a.rows[k].lambda_bar <= 0.0;
    }
    r.record("asymptotics", "v_tilde_decreasing", dv > 0.0, dv, 0.0);
    r.record("asymptotics", "lambda_bar_rising_to_zero", dl > 0.0 && neg, dl, 0.0);
  }
  report::Table t;
  std::vector<double> ts, W, L, V;
  for (const auto& row : a.rows) {
    ts.push_back(row.t), W.push_back(row.W_plus), L.push_back(row.lambda_bar), V.push_back(row.v_tilde);
  }
  t.add("t", ts);
  t.add("W_plus", W);
  t.add("lambda_bar", L);
  t.add("v_tilde", V);
  r.file("series/asymptotics.csv", t.csv());
  r.plot("asymptotics", "last decade, sigma = t", "W+", {{"W+", ts, W}}, true);
  r.out.summary["asymptotics"] = {{"collapsing", a.collapsing},
                                  {"volume_exponent", a.volume_exponent},
                                  {"v_tilde_limit", a.v_tilde_limit},
                                  {"w_plus_fit", a.w_plus.limit},
                                  {"w_plus_predicted", a.collapsing ? json(nullptr) : json(a.w_plus_predicted)},
                                  {"lambda_bar_fit", a.lambda_bar.limit},
                                  {"lambda_bar_predicted", a.lambda_bar_predicted},
                                  {"t_lambda_fit", a.t_lambda.limit}};
}

void check_blowdown(Run& r) {
  const double tol = r.s.tol("blowdown");
  const double alpha = r.s.blowdown_alpha;
  const auto hb = r.h.blowdown(alpha);
  const double scale = std::pow(alpha, 0.5 * r.n);
  double dW = 0.0, dL = 0.0, dV = 0.0;
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(a)); };
  for (double t : r.subsample(3)) {
    const auto m = r.h.metric(t), mb = hb.metric(t / alpha);
    Field u = r.density(t);
    const double w = entropy::W_plus(m, u, t - r.birth);
    for (double& x : u) x *= scale;
    dW = std::max(dW, rel(w, entropy::W_plus(mb, u, (t - r.birth) / alpha)));
    dL = std::max(dL, rel(entropy::lambda_bar(m), entropy::lambda_bar(mb)));
    if (t > 0.0) dV = std::max(dV, rel(flow::scaled_volume(r.h, t), flow::scaled_volume(hb, t / alpha)));
  }
  r.record("blowdown", "w_plus_invariant", dW <= tol, dW, tol);
  r.record("blowdown", "lambda_bar_invariant", dL <= tol, dL, tol);
  r.record("blowdown", "v_tilde_invariant", dV <= tol, dV, tol);
  if (r.kind == ModelKind::Homogeneous) return;
  const double bt = r.base_time(), t = r.s.t_begin;
  auto targets = field_targets(r, t);
  targets.resize(1);
  auto tb = targets;
  tb[0].t /= alpha;
  reduced::FieldOptions fo;
  fo.cross_check = false;
  const auto a = reduced::ell_plus_field(r.h, bt, r.s.reduced.base, targets, fo);
  const auto b = reduced::ell_plus_field(hb, bt / alpha, r.s.reduced.base, tb, fo);
  const double de = rel(a.points[0].ell, b.points[0].ell);
  r.record("blowdown", "ell_plus_invariant", de <= tol, de, tol);
  reduced::ThetaOptions o;
  o.torus_resolution = 4;
  const double ta = reduced::theta_plus(r.h, bt, r.s.reduced.base, {t}, o).theta[0];
  const double tbv = reduced::theta_plus(hb, bt / alpha, r.s.reduced.base, {t / alpha}, o).theta[0];
  const double dt = std::abs(ta - tbv) / ta;
  r.record("blowdown", "theta_plus_invariant", dt <= tol, dt, tol);
}

}  // namespace

ScenarioResult run_scenario(const Scenario& s) {
  ScenarioResult out;
  out.name = s.name;
  out.summary["model"] = s.model;
  out.summary["t_span"] = {s.t_begin, s.t_end};
  out.summary["checks"] = s.checks;
  json tols = json::object();
  for (const char* k : {"entropy", "harnack", "harnack_torus", "mu_nu", "reduced", "identities", "theta",
                        "asymptotics", "blowdown", "constancy"}) {
    tols[k] = s.tol(k);
  }
  out.summary["tolerances"] = tols;

  Run r{s, out, {}, geometry::kind_of(s.metric), 0, 0.0, {}, false, {}};
  try {
    r.times = sample_times(s, r.log_spacing);
    flow::FlowOptions fo;
    if (r.kind == ModelKind::Homogeneous) {
      // land exactly on every time a check differentiates at
      const double step = 1e-3 * s.t_begin;
      const double tc = r.times[r.times.size() / 2];
      for (double t : r.times) {
        for (int k = -2; k <= 2; ++k) fo.stops.push_back(t + k * step);
      }
      for (int k = -2; k <= 2; ++k) fo.stops.push_back(tc + k * 1e-3 * tc);
      std::erase_if(fo.stops, [&](double t) { return t <= s.t0 || t >= s.t_end; });
      std::sort(fo.stops.begin(), fo.stops.end());
    }
    const bool needs_density = s.has("entropy") || s.has("harnack") || s.has("asymptotics") || s.has("blowdown");
    double horizon = s.t_end;
    if (r.kind == ModelKind::ConformalTorus && needs_density) {
      // the immortal density needs final times well past the window: the
      // memory of final data decays like exp(-4π²t/L²)
      const auto& g = std::get<geometry::ConformalTorusMetric>(s.metric).grid;
      horizon = s.t_end + std::max(g.lx, g.ly) * std::max(g.lx, g.ly);
      fo.max_snapshots = 2048;
    }
    r.h = flow::evolve(s.metric, s.t0, horizon, fo);
    if (r.kind == ModelKind::ConformalTorus) {
      const double dt = r.h.native_step();
      for (double& t : r.times) t = s.t0 + std::round((t - s.t0) / dt) * dt;
      r.times.erase(std::unique(r.times.begin(), r.times.end()), r.times.end());
    }
    if (r.h.extinct() && r.h.extinction_time() < s.t_end) throw std::runtime_error("the flow goes extinct before t_end");
    r.n = r.h.dimension();
    r.birth = r.h.birth_time();
    if (!(s.t_begin > r.birth)) throw std::runtime_error("t_span must start after the birth time");
    r.file("series/flow.csv", flow::history_csv(r.h));
    out.summary["birth_time"] = r.birth;
    out.summary["sample_times"] = r.times;
    if (needs_density) setup_density(r);
  } catch (const std::exception& e) {
    out.records.push_back({"setup", "flow", "error", 0.0, 0.0, e.what()});
    return out;
  }
  static const std::vector<std::pair<std::string, void (*)(Run&)>> steps{
      {"entropy", check_entropy}, {"harnack", check_harnack},         {"mu_nu", check_mu_nu},
      {"reduced", check_reduced}, {"theta", check_theta},             {"asymptotics", check_asymptotics},
      {"blowdown", check_blowdown}};
  for (const auto& [name, fn] : steps) {
    if (!s.has(name)) continue;
    try {
      fn(r);
    } catch (const std::exception& e) {
      out.records.push_back({name, "run", "error", 0.0, 0.0, e.what()});
    }
  }
  return out;
}

void write_result(const ScenarioResult& r, const std::filesystem::path& dir) {
  for (const auto& [path, text] : r.files) report::write_text(dir / path, text);
  report::write_text(dir / "report.json", r.report().dump(2) + "\n");
}

int run_config_file(const std::filesystem::path& config, const std::filesystem::path& out, int threads,
                    std::ostream& log) {
  Config cfg;
  try {
    cfg = load_config(config);
  } catch (const ConfigError& e) {
    log << config.string() << ":" << (e.line() > 0 ? std::to_string(e.line()) + ":" : "")
        << " config error: " << e.message() << "\n";
    return kConfigError;
  }
  std::vector<ScenarioResult> results(cfg.scenarios.size());
  std::atomic<std::size_t> next{0};
  std::mutex io;
  auto worker = [&] {
    for (std::size_t k; (k = next++) < cfg.scenarios.size();) {
      results[k] = run_scenario(cfg.scenarios[k]);
      std::lock_guard lock(io);
      write_result(results[k], out / results[k].name);
    }
  };
  const int nt = std::clamp(threads, 1, static_cast<int>(cfg.scenarios.size()));
  std::vector<std::thread> pool;
  for (int k = 1; k < nt; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  bool ok = true;
  for (const auto& res : results) {
    for (const auto& rec : res.records) {
      log << "[" << (rec.status == "pass" ? "PASS" : rec.status == "fail" ? "FAIL" : rec.status == "error" ? "ERROR" : "SKIP")
          << "] " << res.name << " " << rec.check << "/" << rec.item << " value=" << report::format_number(rec.value)
          << " tol=" << report::format_number(rec.tol) << (rec.message.empty() ? "" : " (" + rec.message + ")") << "\n";
    }
    log << res.name << ": " << (res.ok() ? "ok" : "FAILED") << " -> " << (out / res.name).string() << "\n";
    ok = ok && res.ok();
  }
  return ok ? kOk : kCheckFailure;
}

}  // namespace rflab::app
