#pragma once

#include <string>
#include <vector>

namespace rflab::report {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartOptions {
  std::string title;
  std::string x_label = "t";
  std::string y_label;
  bool log_x = false;
  int width = 640;
  int height = 400;
};

/// Minimal line chart: axes with five ticks each, one polyline per series
/// and a legend. Non-finite points break the line.
std::string line_chart_svg(const std::vector<Series>& series, const ChartOptions& options);

}  // namespace rflab::report
