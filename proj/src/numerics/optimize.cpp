#include "rflab/numerics/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rflab::numerics {

ConcaveMaxResult maximize_concave_1d(const std::function<double(double)>& f,
                                     std::pair<double, double> bracket,
                                     const ToleranceConfig& tol) {
  tol.validate();
  auto [lo, hi] = bracket;
  if (!(lo > 0.0) || !(hi > lo)) {
    throw std::invalid_argument("maximize_concave_1d: need 0 < lo < hi");
  }
  ConcaveMaxResult out;
  auto eval = [&](double x) {
    ++out.evaluations;
    return f(x);
  };

  const double upper_limit = hi * std::ldexp(1.0, 40);
  const double lower_limit = lo * std::ldexp(1.0, -60);

  double a = lo, c = hi;
  double b = 0.5 * (a + c);
  double fa = eval(a), fb = eval(b), fc = eval(c);

  // grow toward larger arguments while the function is still rising at the top
  while (fc >= fb) {
    if (c >= upper_limit) {
      out.unbounded = true;
      out.argmax = c;
      out.value = fc;
      return out;
    }
    a = b;
    fa = fb;
    b = c;
    fb = fc;
    c *= 2.0;
    fc = eval(c);
  }
  // grow toward zero while the function is still rising at the bottom
  while (fa >= fb) {
    if (a <= lower_limit) {
      out.argmax = a;
      out.value = fa;
      return out;
    }
    c = b;
    fc = fb;
    b = a;
    fb = fa;
    a *= 0.5;
    fa = eval(a);
  }

  {
    constexpr int kSamples = 9;
    std::vector<double> xs(kSamples), fs(kSamples);
    for (int i = 0; i < kSamples; ++i) {
      xs[i] = a + (c - a) * i / (kSamples - 1);
      fs[i] = eval(xs[i]);
    }
    const double scale = 1e-9 * (1.0 + max_abs(fs));
    for (int i = 1; i + 1 < kSamples; ++i) {
      if (fs[i + 1] - 2.0 * fs[i] + fs[i - 1] > scale) out.concavity_warning = true;
    }
  }

  const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = c - inv_phi * (c - a);
  double x2 = a + inv_phi * (c - a);
  double f1 = eval(x1), f2 = eval(x2);
  for (int it = 0; it < tol.max_iter && (c - a) > 2.0 * tol.abs_tol; ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (c - a);
      f2 = eval(x2);
    } else {
      c = x2;
      x2 = x1;
      f2 = f1;
      x1 = c - inv_phi * (c - a);
      f1 = eval(x1);
    }
  }
  if (f1 >= f2) {
    out.argmax = x1;
    out.value = f1;
  } else {
    out.argmax = x2;
    out.value = f2;
  }
  return out;
}

ConstrainedMinResult minimize_constrained(const ConstrainedProblem& problem, const Field& w0,
                                          const ToleranceConfig& tol) {
  tol.validate();
  ConstrainedMinResult out;
  Field w = problem.normalize(w0);
  double value = problem.functional(w);
  double alpha = 1.0;

  for (int it = 0; it < tol.max_iter; ++it) {
    const Field g = problem.gradient(w);
    const double ww = problem.inner(w, w);
    Field gt = g;
    {
      const double c = problem.inner(g, w) / ww;
      for (std::size_t i = 0; i < gt.size(); ++i) gt[i] -= c * w[i];
    }
    const double gnorm = std::sqrt(std::max(problem.inner(gt, gt), 0.0));
    out.gradient_norm = gnorm;
    out.iterations = it;
    if (gnorm <= tol.abs_tol) {
      out.converged = true;
      break;
    }

    Field d = problem.precondition ? problem.precondition(gt) : gt;
    {
      const double c = problem.inner(d, w) / ww;
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= c * w[i];
    }
    const double slope = problem.inner(g, d);
    if (!(slope > 0.0)) break;  // preconditioner lost descent

    alpha = std::min(alpha * 2.0, 1e6);
    bool accepted = false;
    Field trial(w.size());
    while (alpha > 1e-16) {
      for (std::size_t i = 0; i < w.size(); ++i) trial[i] = w[i] - alpha * d[i];
      trial = problem.normalize(trial);
      const double v = problem.functional(trial);
      if (v <= value - 1e-4 * alpha * slope) {
        accepted = true;
        w.swap(trial);
        value = v;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      // descent is below round-off: decide on the gradient test alone
      break;
    }
  }

  if (!out.converged) {
    const Field g = problem.gradient(w);
    const double c = problem.inner(g, w) / problem.inner(w, w);
    Field gt = g;
    for (std::size_t i = 0; i < gt.size(); ++i) gt[i] -= c * w[i];
    out.gradient_norm = std::sqrt(std::max(problem.inner(gt, gt), 0.0));
    out.converged = out.gradient_norm <= tol.abs_tol;
  }
  out.minimizer = std::move(w);
  out.value = value;
  return out;
}

}  // namespace rflab::numerics
