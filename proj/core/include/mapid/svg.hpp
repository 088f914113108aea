#pragma once

#include <string>
#include <vector>

namespace mapid {

struct SvgSeries {
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  bool line = true;  // polyline; false draws scatter dots
  std::string label;
};

// Minimal self-contained SVG chart: axes, ticks, legend, and the given
// series. NaN points break line segments and are skipped in scatters.
void write_svg_plot(const std::string& path, const std::string& title,
                    const std::string& x_label, const std::string& y_label,
                    const std::vector<SvgSeries>& series, int width = 720,
                    int height = 480);

}  // namespace mapid
