#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace necklace::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  bool markers = false;
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  std::vector<Series> series;
};

namespace detail {
inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}
inline std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}
inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}
}  // namespace detail

/// Polylines on shared axes, no external dependencies and no timestamps.
inline std::string render(const Plot& plot, double width = 640, double height = 420) {
  const double left = 70, right = 20, top = 40, bottom = 50;
  auto tx = [&](double v) { return plot.log_x ? std::log10(v) : v; };
  auto ty = [&](double v) { return plot.log_y ? std::log10(v) : v; };
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : plot.series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      const double a = tx(s.x[i]), b = ty(s.y[i]);
      if (!std::isfinite(a) || !std::isfinite(b)) continue;
      x0 = std::min(x0, a);
      x1 = std::max(x1, a);
      y0 = std::min(y0, b);
      y1 = std::max(y1, b);
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double pw = width - left - right, ph = height - top - bottom;
  auto px = [&](double a) { return left + (a - x0) / (x1 - x0) * pw; };
  auto py = [&](double b) { return top + (1.0 - (b - y0) / (y1 - y0)) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << detail::escape(plot.title)
    << "</text>\n";
  o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double a = x0 + (x1 - x0) * i / 4.0, b = y0 + (y1 - y0) * i / 4.0;
    o << "<text x=\"" << detail::num(px(a)) << "\" y=\"" << detail::num(top + ph + 16)
      << "\" text-anchor=\"middle\" font-size=\"11\">" << detail::tick(plot.log_x ? std::pow(10.0, a) : a) << "</text>\n";
    o << "<text x=\"" << detail::num(left - 6) << "\" y=\"" << detail::num(py(b) + 4)
      << "\" text-anchor=\"end\" font-size=\"11\">" << detail::tick(plot.log_y ? std::pow(10.0, b) : b) << "</text>\n";
  }
  o << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 10 << "\" text-anchor=\"middle\" font-size=\"13\">"
    << detail::escape(plot.x_label) << "</text>\n";
  o << "<text x=\"16\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 "
    << top + ph / 2 << ")\">" << detail::escape(plot.y_label) << "</text>\n";
  int legend = 0;
  for (const auto& s : plot.series) {
    o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      const double a = tx(s.x[i]), b = ty(s.y[i]);
      if (!std::isfinite(a) || !std::isfinite(b)) continue;
      o << detail::num(px(a)) << ',' << detail::num(py(b)) << ' ';
    }
    o << "\"/>\n";
    if (s.markers)
      for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
        const double a = tx(s.x[i]), b = ty(s.y[i]);
        if (!std::isfinite(a) || !std::isfinite(b)) continue;
        o << "<circle cx=\"" << detail::num(px(a)) << "\" cy=\"" << detail::num(py(b)) << "\" r=\"3\" fill=\"" << s.color
          << "\"/>\n";
      }
    if (!s.label.empty()) {
      const double ly = top + 14 + 16 * legend++;
      o << "<line x1=\"" << left + 10 << "\" y1=\"" << ly << "\" x2=\"" << left + 30 << "\" y2=\"" << ly
        << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
      o << "<text x=\"" << left + 36 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">" << detail::escape(s.label)
        << "</text>\n";
    }
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace necklace::svg
