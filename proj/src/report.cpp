#include "tbel/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "tbel/common.hpp"

namespace tbel {

namespace {

constexpr double kW = 640, kH = 420, kL = 70, kR = 150, kT = 40, kB = 50;
const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

std::string escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '<') o += "&lt;";
    else if (c == '>') o += "&gt;";
    else if (c == '&') o += "&amp;";
    else o += c;
  }
  return o;
}

struct Axis {
  double lo = 0, hi = 1;
  bool log = false;
  double map(double v) const {
    const double a = log ? std::log10(v) : v;
    return (a - lo) / (hi - lo);
  }
  bool ok(double v) const { return std::isfinite(v) && (!log || v > 0); }
};

Axis fit_axis(const PlotSpec& spec, bool is_x, bool log) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& s : spec.series) {
    const auto& v = is_x ? s.x : s.y;
    for (std::size_t i = 0; i < v.size(); ++i) {
      double vals[3] = {v[i], v[i], v[i]};
      if (!is_x && i < s.err.size()) {
        vals[1] = v[i] - s.err[i];
        vals[2] = v[i] + s.err[i];
      }
      for (double a : vals) {
        if (!std::isfinite(a) || (log && a <= 0)) continue;
        const double t = log ? std::log10(a) : a;
        lo = std::min(lo, t);
        hi = std::max(hi, t);
      }
    }
  }
  Axis ax;
  ax.log = log;
  if (!std::isfinite(lo)) {
    lo = 0;
    hi = 1;
  }
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  ax.lo = lo - pad;
  ax.hi = hi + pad;
  return ax;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

}  // namespace

std::string render_svg(const PlotSpec& spec) {
  const Axis ax = fit_axis(spec, true, spec.logx);
  const Axis ay = fit_axis(spec, false, spec.logy);
  const double pw = kW - kL - kR, ph = kH - kT - kB;
  auto px = [&](double v) { return kL + pw * ax.map(v); };
  auto py = [&](double v) { return kT + ph * (1.0 - ay.map(v)); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(spec.title)
     << "</text>\n";
  os << "<rect x=\"" << kL << "\" y=\"" << kT << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = ax.lo + (ax.hi - ax.lo) * i / 4.0;
    const double fy = ay.lo + (ay.hi - ay.lo) * i / 4.0;
    const double vx = ax.log ? std::pow(10.0, fx) : fx;
    const double vy = ay.log ? std::pow(10.0, fy) : fy;
    const double gx = kL + pw * i / 4.0, gy = kT + ph * (1.0 - i / 4.0);
    os << "<line x1=\"" << gx << "\" y1=\"" << kT + ph << "\" x2=\"" << gx << "\" y2=\"" << kT + ph + 5
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << gx << "\" y=\"" << kT + ph + 18 << "\" text-anchor=\"middle\">" << fmt(vx) << "</text>\n";
    os << "<line x1=\"" << kL - 5 << "\" y1=\"" << gy << "\" x2=\"" << kL << "\" y2=\"" << gy
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << kL - 8 << "\" y=\"" << gy + 4 << "\" text-anchor=\"end\">" << fmt(vy) << "</text>\n";
  }
  os << "<text x=\"" << kL + pw / 2 << "\" y=\"" << kH - 10 << "\" text-anchor=\"middle\">" << escape(spec.xlabel)
     << (spec.logx ? " (log)" : "") << "</text>\n";
  os << "<text transform=\"translate(16," << kT + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
     << escape(spec.ylabel) << (spec.logy ? " (log)" : "") << "</text>\n";

  for (std::size_t si = 0; si < spec.series.size(); ++si) {
    const Series& s = spec.series[si];
    const char* col = kColors[si % 7];
    std::ostringstream pts;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!ax.ok(s.x[i]) || !ay.ok(s.y[i])) continue;
      const double X = px(s.x[i]), Y = py(s.y[i]);
      pts << X << "," << Y << " ";
      os << "<circle cx=\"" << X << "\" cy=\"" << Y << "\" r=\"3\" fill=\"" << col << "\"/>\n";
      if (i < s.err.size() && s.err[i] > 0) {
        const double lo = s.y[i] - s.err[i], hi = s.y[i] + s.err[i];
        if (ay.ok(lo) && ay.ok(hi))
          os << "<line x1=\"" << X << "\" y1=\"" << py(lo) << "\" x2=\"" << X << "\" y2=\"" << py(hi)
             << "\" stroke=\"" << col << "\"/>\n";
      }
    }
    if (s.line)
      os << "<polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\"/>\n";
    const double ly = kT + 10 + 18 * si;
    os << "<line x1=\"" << kL + pw + 10 << "\" y1=\"" << ly << "\" x2=\"" << kL + pw + 30 << "\" y2=\"" << ly
       << "\" stroke=\"" << col << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << kL + pw + 35 << "\" y=\"" << ly + 4 << "\">" << escape(s.name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void write_svg(const std::string& path, const PlotSpec& spec) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("write_svg: cannot open " + path);
  out << render_svg(spec);
}

}  // namespace tbel
