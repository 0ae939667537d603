#pragma once

#include <string>
#include <vector>

namespace shockforge {

struct Series {
  std::string label;
  std::vector<double> x, y;
};

struct PlotSpec {
  std::string title, x_label, y_label;
  bool log_x = false, log_y = false;  ///< nonpositive samples are dropped on log axes
  int width = 640, height = 420;
};

/// Self-contained SVG line plot; the same input gives the same bytes.
std::string svg_plot(const PlotSpec& spec, const std::vector<Series>& series);
void write_svg(const std::string& path, const PlotSpec& spec, const std::vector<Series>& series);

}  // namespace shockforge
