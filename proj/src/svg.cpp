#include "shockforge/svg.hpp"

#include "shockforge/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace shockforge {

namespace {

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string fmt(double v, int digits = 2) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
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

struct Axis {
  bool log = false;
  double lo = 0.0, hi = 1.0;  ///< in plotted units (log10 on log axes)

  double map(double v) const { return log ? std::log10(v) : v; }
  std::vector<double> ticks() const {
    std::vector<double> t;
    if (log) {
      for (double d = std::ceil(lo); d <= hi + 1e-9; d += std::max(1.0, std::floor((hi - lo) / 6.0))) t.push_back(d);
      return t;
    }
    const double raw = (hi - lo) / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double step = raw / mag < 2.0 ? 2.0 * mag : raw / mag < 5.0 ? 5.0 * mag : 10.0 * mag;
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step) t.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
    return t;
  }
  std::string label(double v) const { return log ? "1e" + fmt(v, 0) : tick_label(v); }
};

}  // namespace

std::string svg_plot(const PlotSpec& spec, const std::vector<Series>& series) {
  Axis ax{spec.log_x}, ay{spec.log_y};
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, ylo = xlo, yhi = -xlo;
  std::vector<std::vector<std::pair<double, double>>> pts(series.size());
  for (std::size_t s = 0; s < series.size(); ++s)
    for (std::size_t k = 0; k < std::min(series[s].x.size(), series[s].y.size()); ++k) {
      const double x = series[s].x[k], y = series[s].y[k];
      if (!std::isfinite(x) || !std::isfinite(y) || (ax.log && x <= 0.0) || (ay.log && y <= 0.0)) continue;
      const double px = ax.map(x), py = ay.map(y);
      pts[s].emplace_back(px, py);
      xlo = std::min(xlo, px);
      xhi = std::max(xhi, px);
      ylo = std::min(ylo, py);
      yhi = std::max(yhi, py);
    }
  if (!(xlo <= xhi)) xlo = 0.0, xhi = 1.0;
  if (!(ylo <= yhi)) ylo = 0.0, yhi = 1.0;
  if (xhi - xlo < 1e-300) xlo -= 0.5, xhi += 0.5;
  if (yhi - ylo < 1e-300) ylo -= 0.5, yhi += 0.5;
  const double ypad = 0.05 * (yhi - ylo);
  ax.lo = xlo, ax.hi = xhi, ay.lo = ylo - ypad, ay.hi = yhi + ypad;

  const double W = spec.width, H = spec.height, ml = 70, mr = 20, mt = 36, mb = 50;
  auto sx = [&](double v) { return ml + (v - ax.lo) / (ax.hi - ax.lo) * (W - ml - mr); };
  auto sy = [&](double v) { return H - mb - (v - ay.lo) / (ay.hi - ay.lo) * (H - mt - mb); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\"" << spec.height
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << fmt(W / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(spec.title)
     << "</text>\n";
  os << "<rect x=\"" << fmt(ml) << "\" y=\"" << fmt(mt) << "\" width=\"" << fmt(W - ml - mr) << "\" height=\""
     << fmt(H - mt - mb) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : ax.ticks())
    os << "<line x1=\"" << fmt(sx(t)) << "\" y1=\"" << fmt(H - mb) << "\" x2=\"" << fmt(sx(t)) << "\" y2=\""
       << fmt(H - mb + 5) << "\" stroke=\"black\"/><text x=\"" << fmt(sx(t)) << "\" y=\"" << fmt(H - mb + 18)
       << "\" text-anchor=\"middle\">" << ax.label(t) << "</text>\n";
  for (double t : ay.ticks())
    os << "<line x1=\"" << fmt(ml - 5) << "\" y1=\"" << fmt(sy(t)) << "\" x2=\"" << fmt(ml) << "\" y2=\""
       << fmt(sy(t)) << "\" stroke=\"black\"/><text x=\"" << fmt(ml - 8) << "\" y=\"" << fmt(sy(t) + 4)
       << "\" text-anchor=\"end\">" << ay.label(t) << "</text>\n";
  os << "<text x=\"" << fmt((ml + W - mr) / 2) << "\" y=\"" << fmt(H - 12) << "\" text-anchor=\"middle\">"
     << escape(spec.x_label) << "</text>\n";
  os << "<text transform=\"translate(16," << fmt((mt + H - mb) / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
     << escape(spec.y_label) << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kColors[s % 6];
    if (!pts[s].empty()) {
      os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t k = 0; k < pts[s].size(); ++k)
        os << (k ? " " : "") << fmt(sx(pts[s][k].first)) << "," << fmt(sy(pts[s][k].second));
      os << "\"/>\n";
    }
    const double ly = mt + 14 + 16 * static_cast<double>(s);
    os << "<line x1=\"" << fmt(W - mr - 150) << "\" y1=\"" << fmt(ly - 4) << "\" x2=\"" << fmt(W - mr - 130)
       << "\" y2=\"" << fmt(ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/><text x=\""
       << fmt(W - mr - 125) << "\" y=\"" << fmt(ly) << "\">" << escape(series[s].label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void write_svg(const std::string& path, const PlotSpec& spec, const std::vector<Series>& series) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::Config, "cannot write " + path);
  os << svg_plot(spec, series);
}

}  // namespace shockforge
