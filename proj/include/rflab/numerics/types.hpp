#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rflab {

/// Real-valued field on a grid (or a single value on a homogeneous model).
using Field = std::vector<double>;

/// Raised when a numerical kernel cannot produce a trustworthy result.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Iterative solver that ran out of iterations; keeps the residual history
/// so callers can report how far it got.
class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, std::vector<double> history)
      : NumericalError(what), residual_history(std::move(history)) {}
  std::vector<double> residual_history;
};

struct ToleranceConfig {
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  int max_iter = 1000;
  double fd_step = 1e-4;

  /// Throws std::invalid_argument unless every entry is strictly positive.
  void validate() const;
};

/// Strictly increasing sample times with one value per time.
class TimeSeries {
 public:
  TimeSeries() = default;
  TimeSeries(std::vector<double> times, std::vector<double> values);

  void push_back(double t, double v);

  [[nodiscard]] std::size_t size() const { return times_.size(); }
  [[nodiscard]] bool empty() const { return times_.empty(); }
  [[nodiscard]] const std::vector<double>& times() const { return times_; }
  [[nodiscard]] const std::vector<double>& values() const { return values_; }
  [[nodiscard]] double time(std::size_t i) const { return times_[i]; }
  [[nodiscard]] double value(std::size_t i) const { return values_[i]; }

  /// Linear interpolation inside the sampled range.
  [[nodiscard]] double interpolate(double t) const;

 private:
  std::vector<double> times_;
  std::vector<double> values_;
};

/// Left-to-right sum; every reduction in the library goes through these so
/// reports are bitwise reproducible.
double ordered_sum(std::span<const double> v);
double weighted_sum(std::span<const double> v, std::span<const double> w);
double max_abs(std::span<const double> v);

}  // namespace rflab
