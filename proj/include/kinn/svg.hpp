#ifndef KINN_SVG_HPP
#define KINN_SVG_HPP

#include <string>
#include <vector>

namespace kinn {

/// One polyline of a chart. `values` are y samples at x = x_start, x_start+1, ...
struct ChartSeries {
    std::string label;
    std::string color;
    std::vector<double> values;
};

/**
 * Self-contained SVG line chart (axes, ticks, legend), no external
 * renderer. Output is deterministic for identical inputs.
 */
void write_svg_chart(const std::string& path, const std::string& title,
                     const std::vector<ChartSeries>& series,
                     std::size_t x_start = 0,
                     const std::string& x_label = "step",
                     const std::string& y_label = "value");

} // namespace kinn

#endif // KINN_SVG_HPP
