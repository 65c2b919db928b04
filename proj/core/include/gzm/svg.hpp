#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gzm/data.hpp"
#include "gzm/harness.hpp"

namespace gzm {

struct SvgSeries {
    std::string label;
    std::string color;
    bool dashed = false;
    std::vector<std::pair<double, double>> points;
};

struct SvgPanel {
    std::string title;
    std::vector<SvgSeries> series;
};

/// Multi-panel line chart; panels share the y scale.
struct SvgChart {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<SvgPanel> panels;
};

void write_svg_chart(const SvgChart& chart, const std::string& path);

/// Error-vs-input-frames charts (one per metric, panels per validation mode,
/// red = gaze, green = no gaze, gray dashed = reconstruction floor), plus an
/// error-vs-noise chart when the report sweeps noise levels. Noise values are
/// squared (MSE convention). Returns the written paths.
std::vector<std::string> write_report_charts(const MetricReport& report,
                                             const std::string& out_dir);

/// Top-view hand prediction plot: observed palm track, predicted waypoints
/// linked by arrows, object markers, and a dashed target zone.
struct TopViewPlot {
    std::string title;
    std::vector<Vec3> right_input, right_pred;  // palm positions
    std::vector<Vec3> left_input, left_pred;
    std::vector<std::pair<Vec3, bool>> objects;  // centroid, is_target
    double target_zone_radius = 0.06;
};

void write_top_view_svg(const TopViewPlot& plot, const std::string& path);

}  // namespace gzm
