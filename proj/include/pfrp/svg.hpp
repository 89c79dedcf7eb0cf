#pragma once

#include <string>
#include <vector>

namespace pfrp {

struct SvgSeries {
    std::string label;
    std::string color;
    std::vector<double> y;
};

// Standalone SVG line chart; series share the x axis (sample index).
void write_line_chart_svg(const std::string& path, const std::string& title,
                          const std::vector<SvgSeries>& series, int width = 960,
                          int height = 320);

void write_scatter_svg(const std::string& path, const std::string& title,
                       const std::vector<double>& xs, const std::vector<double>& ys,
                       const std::string& xlabel, const std::string& ylabel, int width = 640,
                       int height = 480);

}  // namespace pfrp
