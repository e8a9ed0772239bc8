#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace helene {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotReport {
  std::size_t skipped = 0;  // non-finite points dropped
  bool log_y = true;
};

/// Renders loss curves as standalone SVG: one polyline and one legend entry
/// per series. Uses a log y-axis when every kept value is positive.
std::string render_svg(const std::vector<PlotSeries>& series, const std::string& title,
                       PlotReport* report = nullptr);

/// Writes render_svg() to `path`. Throws std::invalid_argument on empty input.
PlotReport emit_plot(const std::vector<PlotSeries>& series, const std::string& path,
                     const std::string& title = "loss");

}  // namespace helene
