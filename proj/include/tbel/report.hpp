#pragma once

#include <string>
#include <vector>

namespace tbel {

struct Series {
  std::string name;
  std::vector<double> x, y;
  std::vector<double> err;  // optional symmetric error bars
  bool line = true;
};

struct PlotSpec {
  std::string title;
  std::string xlabel, ylabel;
  bool logx = false;
  bool logy = false;
  std::vector<Series> series;
};

// Static SVG line/marker plot; non-positive values are skipped on log axes.
std::string render_svg(const PlotSpec& spec);
void write_svg(const std::string& path, const PlotSpec& spec);

}  // namespace tbel
