#include "rflab/numerics/types.hpp"

#include <algorithm>
#include <cmath>

namespace rflab {

void ToleranceConfig::validate() const {
  if (!(abs_tol > 0.0) || !(rel_tol > 0.0) || !(fd_step > 0.0) || max_iter < 1) {
    throw std::invalid_argument("ToleranceConfig: tolerances must be positive and max_iter >= 1");
  }
}

TimeSeries::TimeSeries(std::vector<double> times, std::vector<double> values)
    : times_(std::move(times)), values_(std::move(values)) {
  if (times_.size() != values_.size()) {
    throw std::invalid_argument("TimeSeries: times and values differ in length");
  }
  for (std::size_t i = 1; i < times_.size(); ++i) {
    if (!(times_[i] > times_[i - 1])) {
      throw std::invalid_argument("TimeSeries: times must be strictly increasing");
    }
  }
}

void TimeSeries::push_back(double t, double v) {
  if (!times_.empty() && !(t > times_.back())) {
    throw std::invalid_argument("TimeSeries: times must be strictly increasing");
  }
  times_.push_back(t);
  values_.push_back(v);
}

double TimeSeries::interpolate(double t) const {
  if (times_.empty()) throw std::out_of_range("TimeSeries: empty");
  if (t <= times_.front()) return values_.front();
  if (t >= times_.back()) return values_.back();
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t k = static_cast<std::size_t>(it - times_.begin());
  const double w = (t - times_[k - 1]) / (times_[k] - times_[k - 1]);
  return (1.0 - w) * values_[k - 1] + w * values_[k];
}

double ordered_sum(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

double weighted_sum(std::span<const double> v, std::span<const double> w) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * w[i];
  return s;
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace rflab
