#pragma once

// Minimal standalone SVG line charts. No timestamps or random ids are embedded,
// so identical inputs give identical files.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

namespace beamtrack::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool markers_only = false;  // scatter instead of polyline
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  bool log_x = false;
  int width = 760;
  int height = 420;
};

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

/// Roughly five "nice" ticks covering [lo, hi].
inline std::vector<double> nice_ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (raw <= step) break;
  }
  std::vector<double> ticks;
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step) ticks.push_back(v == 0.0 ? 0.0 : v);
  return ticks;
}

inline const char* color(std::size_t i) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};
  return palette[i % 7];
}

}  // namespace detail

inline std::string render(const Chart& c) {
  using detail::num;
  const double ml = 70, mr = 180, mt = 40, mb = 55;
  const double pw = c.width - ml - mr;
  const double ph = c.height - mt - mb;
  auto fx = [&](double x) { return c.log_x ? std::log10(x) : x; };

  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const Series& s : c.series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i]) || (c.log_x && !(s.x[i] > 0))) continue;
      x0 = std::min(x0, fx(s.x[i]));
      x1 = std::max(x1, fx(s.x[i]));
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double x) { return ml + (fx(x) - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return mt + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::string o;
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(c.width) + "\" height=\"" +
       std::to_string(c.height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o += "<text x=\"" + num(ml + pw / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
       detail::escape(c.title) + "</text>\n";
  o += "<rect x=\"" + num(ml) + "\" y=\"" + num(mt) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
       "\" fill=\"none\" stroke=\"black\"/>\n";

  for (double v : detail::nice_ticks(y0, y1)) {
    o += "<line x1=\"" + num(ml) + "\" x2=\"" + num(ml + pw) + "\" y1=\"" + num(py(v)) + "\" y2=\"" + num(py(v)) +
         "\" stroke=\"#ddd\"/>\n";
    o += "<text x=\"" + num(ml - 6) + "\" y=\"" + num(py(v) + 4) + "\" text-anchor=\"end\">" + detail::tick_label(v) +
         "</text>\n";
  }
  if (c.log_x) {
    for (double e = std::ceil(x0); e <= x1 + 1e-9; e += 1.0) {
      const double xp = ml + (e - x0) / (x1 - x0) * pw;
      o += "<text x=\"" + num(xp) + "\" y=\"" + num(mt + ph + 18) + "\" text-anchor=\"middle\">" +
           detail::tick_label(std::pow(10.0, e)) + "</text>\n";
    }
  } else {
    for (double v : detail::nice_ticks(x0, x1)) {
      o += "<text x=\"" + num(px(v)) + "\" y=\"" + num(mt + ph + 18) + "\" text-anchor=\"middle\">" +
           detail::tick_label(v) + "</text>\n";
    }
  }
  o += "<text x=\"" + num(ml + pw / 2) + "\" y=\"" + num(c.height - 12.0) + "\" text-anchor=\"middle\">" +
       detail::escape(c.x_label) + "</text>\n";
  o += "<text transform=\"translate(18," + num(mt + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
       detail::escape(c.y_label) + "</text>\n";

  for (std::size_t k = 0; k < c.series.size(); ++k) {
    const Series& s = c.series[k];
    const char* col = detail::color(k);
    if (s.markers_only) {
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!std::isfinite(s.y[i])) continue;
        o += "<circle cx=\"" + num(px(s.x[i])) + "\" cy=\"" + num(py(s.y[i])) + "\" r=\"2.5\" fill=\"" + col +
             "\"/>\n";
      }
    } else {
      std::string pts;
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!std::isfinite(s.y[i]) || (c.log_x && !(s.x[i] > 0))) continue;
        pts += num(px(s.x[i])) + "," + num(py(s.y[i])) + " ";
      }
      o += "<polyline fill=\"none\" stroke=\"" + std::string(col) + "\" stroke-width=\"1.5\" points=\"" + pts +
           "\"/>\n";
    }
    const double ly = mt + 10 + 18.0 * k;
    o += "<rect x=\"" + num(ml + pw + 12) + "\" y=\"" + num(ly - 8) + "\" width=\"12\" height=\"10\" fill=\"" + col +
         "\"/>\n";
    o += "<text x=\"" + num(ml + pw + 30) + "\" y=\"" + num(ly + 1) + "\">" + detail::escape(s.label) + "</text>\n";
  }
  o += "</svg>\n";
  return o;
}

}  // namespace beamtrack::svg
