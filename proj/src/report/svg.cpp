#include "rflab/report/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace rflab::report {
namespace {

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};

std::string num(double v, const char* fmt = "%.2f") {
  char buf[32];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

}  // namespace

std::string line_chart_svg(const std::vector<Series>& series, const ChartOptions& o) {
  const double inf = std::numeric_limits<double>::infinity();
  auto fx = [&](double x) { return o.log_x ? std::log10(x) : x; };
  double x0 = inf, x1 = -inf, y0 = inf, y1 = -inf;
  for (const auto& s : series) {
    for (std::size_t k = 0; k < std::min(s.x.size(), s.y.size()); ++k) {
      const double x = fx(s.x[k]), y = s.y[k];
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      x0 = std::min(x0, x), x1 = std::max(x1, x);
      y0 = std::min(y0, y), y1 = std::max(y1, y);
    }
  }
  if (!(x0 <= x1)) x0 = 0.0, x1 = 1.0;
  if (!(y0 <= y1)) y0 = 0.0, y1 = 1.0;
  // flat series still get a visible band
  if (x1 - x0 < 1e-300) x0 -= 0.5, x1 += 0.5;
  const double ypad = y1 - y0 > 1e-12 * std::max(1.0, std::abs(y1)) ? 0.05 * (y1 - y0)
                                                                    : 0.5 * std::max(1e-6, std::abs(y1));
  y0 -= ypad, y1 += ypad;

  const double left = 80, right = 20, top = 40, bottom = 50;
  const double pw = o.width - left - right, ph = o.height - top - bottom;
  auto px = [&](double x) { return left + (fx(x) - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + (y1 - y) / (y1 - y0) * ph; };

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(o.width) +
                  "\" height=\"" + std::to_string(o.height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(o.width / 2.0) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" +
       escape(o.title) + "</text>\n";
  s += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
       "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4.0, yv = y0 + (y1 - y0) * i / 4.0;
    const double X = left + pw * i / 4.0, Y = top + ph * (1.0 - i / 4.0);
    const double xl = o.log_x ? std::pow(10.0, xv) : xv;
    s += "<line x1=\"" + num(X) + "\" y1=\"" + num(top + ph) + "\" x2=\"" + num(X) + "\" y2=\"" +
         num(top + ph + 5) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + num(X) + "\" y=\"" + num(top + ph + 18) + "\" text-anchor=\"middle\">" +
         num(xl, "%.4g") + "</text>\n";
    s += "<line x1=\"" + num(left - 5) + "\" y1=\"" + num(Y) + "\" x2=\"" + num(left) + "\" y2=\"" + num(Y) +
         "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + num(left - 8) + "\" y=\"" + num(Y + 4) + "\" text-anchor=\"end\">" + num(yv, "%.6g") +
         "</text>\n";
  }
  s += "<text x=\"" + num(left + pw / 2) + "\" y=\"" + num(o.height - 10.0) + "\" text-anchor=\"middle\">" +
       escape(o.x_label) + (o.log_x ? " (log)" : "") + "</text>\n";
  s += "<text x=\"15\" y=\"" + num(top + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 15 " +
       num(top + ph / 2) + ")\">" + escape(o.y_label) + "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& sr = series[k];
    const char* color = kColors[k % std::size(kColors)];
    std::string pts;
    auto flush = [&] {
      if (!pts.empty()) {
        s += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" +
             pts + "\"/>\n";
      }
      pts.clear();
    };
    for (std::size_t i = 0; i < std::min(sr.x.size(), sr.y.size()); ++i) {
      if (!std::isfinite(fx(sr.x[i])) || !std::isfinite(sr.y[i])) {
        flush();
        continue;
      }
      pts += (pts.empty() ? "" : " ") + num(px(sr.x[i])) + "," + num(py(sr.y[i]));
    }
    flush();
    const double ly = top + 15 + 14.0 * k;
    s += "<line x1=\"" + num(left + pw - 120) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" + num(left + pw - 100) +
         "\" y2=\"" + num(ly - 4) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + num(left + pw - 95) + "\" y=\"" + num(ly) + "\">" + escape(sr.label) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace rflab::report
