#include "gzm/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace gzm {

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

// Round a range outward to tidy tick positions.
std::pair<double, double> nice_range(double lo, double hi) {
    if (lo > hi) std::swap(lo, hi);
    if (hi - lo < 1e-12) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double span = hi - lo;
    return {lo - 0.07 * span, hi + 0.07 * span};
}

struct Mapper {
    double x0, x1, y0, y1;          // data range
    double px0, px1, py0, py1;      // pixel range (py0 is the top)
    double x(double v) const { return px0 + (v - x0) / (x1 - x0) * (px1 - px0); }
    double y(double v) const { return py1 - (v - y0) / (y1 - y0) * (py1 - py0); }
};

void draw_axes(std::ostream& out, const Mapper& m, const std::string& x_label,
               const std::string& y_label, bool y_ticks) {
    out << "<rect x='" << m.px0 << "' y='" << m.py0 << "' width='" << m.px1 - m.px0
        << "' height='" << m.py1 - m.py0 << "' fill='none' stroke='#444' stroke-width='1'/>\n";
    const int n_ticks = 5;
    for (int i = 0; i <= n_ticks; ++i) {
        const double xv = m.x0 + (m.x1 - m.x0) * i / n_ticks;
        const double yv = m.y0 + (m.y1 - m.y0) * i / n_ticks;
        out << "<line x1='" << m.x(xv) << "' y1='" << m.py1 << "' x2='" << m.x(xv) << "' y2='"
            << m.py1 + 4 << "' stroke='#444'/>\n";
        out << "<text x='" << m.x(xv) << "' y='" << m.py1 + 16
            << "' font-size='10' text-anchor='middle' fill='#333'>" << fmt(xv) << "</text>\n";
        if (y_ticks) {
            out << "<line x1='" << m.px0 - 4 << "' y1='" << m.y(yv) << "' x2='" << m.px0
                << "' y2='" << m.y(yv) << "' stroke='#444'/>\n";
            out << "<text x='" << m.px0 - 7 << "' y='" << m.y(yv) + 3
                << "' font-size='10' text-anchor='end' fill='#333'>" << fmt(yv) << "</text>\n";
        }
    }
    out << "<text x='" << (m.px0 + m.px1) / 2 << "' y='" << m.py1 + 32
        << "' font-size='11' text-anchor='middle' fill='#111'>" << x_label << "</text>\n";
    if (y_ticks) {
        out << "<text x='" << m.px0 - 38 << "' y='" << (m.py0 + m.py1) / 2
            << "' font-size='11' text-anchor='middle' fill='#111' transform='rotate(-90 "
            << m.px0 - 38 << " " << (m.py0 + m.py1) / 2 << ")'>" << y_label << "</text>\n";
    }
}

}  // namespace

void write_svg_chart(const SvgChart& chart, const std::string& path) {
    if (chart.panels.empty()) throw param_error("svg chart: no panels");
    const double panel_w = 260, panel_h = 220, gap = 28;
    const double margin_l = 56, margin_r = 14, margin_t = 48, margin_b = 52;
    const double width = margin_l + margin_r +
                         chart.panels.size() * panel_w +
                         (chart.panels.size() - 1) * gap;
    const double height = margin_t + panel_h + margin_b;

    // Shared ranges across panels.
    double x_lo = 1e300, x_hi = -1e300, y_lo = 1e300, y_hi = -1e300;
    for (const auto& panel : chart.panels) {
        for (const auto& s : panel.series) {
            for (const auto& [px, py] : s.points) {
                x_lo = std::min(x_lo, px);
                x_hi = std::max(x_hi, px);
                y_lo = std::min(y_lo, py);
                y_hi = std::max(y_hi, py);
            }
        }
    }
    if (x_lo > x_hi) throw param_error("svg chart: no data points");
    std::tie(y_lo, y_hi) = nice_range(std::min(0.0, y_lo), y_hi);
    std::tie(x_lo, x_hi) = nice_range(x_lo, x_hi);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot open '" + path + "' for writing");
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
        << "' viewBox='0 0 " << width << " " << height << "'>\n";
    out << "<rect width='100%' height='100%' fill='white'/>\n";
    out << "<text x='" << width / 2 << "' y='20' font-size='14' text-anchor='middle' fill='#111'>"
        << chart.title << "</text>\n";

    for (std::size_t pi = 0; pi < chart.panels.size(); ++pi) {
        const auto& panel = chart.panels[pi];
        Mapper m{x_lo, x_hi, y_lo, y_hi,
                 margin_l + pi * (panel_w + gap), margin_l + pi * (panel_w + gap) + panel_w,
                 margin_t, margin_t + panel_h};
        out << "<text x='" << (m.px0 + m.px1) / 2 << "' y='" << margin_t - 8
            << "' font-size='12' text-anchor='middle' fill='#111'>" << panel.title << "</text>\n";
        draw_axes(out, m, chart.x_label, chart.y_label, pi == 0);
        for (const auto& s : panel.series) {
            if (s.points.empty()) continue;
            out << "<polyline fill='none' stroke='" << s.color << "' stroke-width='1.6'";
            if (s.dashed) out << " stroke-dasharray='6,4'";
            out << " points='";
            for (const auto& [px, py] : s.points) out << m.x(px) << ',' << m.y(py) << ' ';
            out << "'/>\n";
            for (const auto& [px, py] : s.points) {
                out << "<circle cx='" << m.x(px) << "' cy='" << m.y(py) << "' r='2.2' fill='"
                    << s.color << "'/>\n";
            }
        }
    }
    // Legend from the first panel.
    double ly = margin_t + 10;
    for (const auto& s : chart.panels.front().series) {
        const double lx = width - margin_r - 150;
        out << "<line x1='" << lx << "' y1='" << ly << "' x2='" << lx + 26 << "' y2='" << ly
            << "' stroke='" << s.color << "' stroke-width='1.6'"
            << (s.dashed ? " stroke-dasharray='6,4'" : "") << "/>\n";
        out << "<text x='" << lx + 32 << "' y='" << ly + 3 << "' font-size='10' fill='#333'>"
            << s.label << "</text>\n";
        ly += 14;
    }
    out << "</svg>\n";
}

std::vector<std::string> write_report_charts(const MetricReport& report,
                                             const std::string& out_dir) {
    const MetricReport means = aggregate_mean(report);
    std::vector<std::string> written;
    const std::vector<std::string> modes{"CS", "CM", "CSM"};

    auto series_points = [&](const std::string& mode, const std::string& metric, bool gaze,
                             bool by_noise, bool squared) {
        std::vector<std::pair<double, double>> pts;
        for (const auto& row : means.rows) {
            if (row.validation != mode || row.metric != metric || row.gaze != gaze) continue;
            if (by_noise) {
                if (row.noise_e == 0.0) continue;
                pts.emplace_back(row.noise_e, squared ? row.value * row.value : row.value);
            } else {
                if (row.noise_e != 0.0) continue;
                pts.emplace_back(row.input_frames, squared ? row.value * row.value : row.value);
            }
        }
        std::sort(pts.begin(), pts.end());
        return pts;
    };
    auto floor_value = [&](const std::string& mode, const std::string& floor_metric,
                           double* out_value) {
        for (const auto& row : means.rows) {
            if (row.validation == mode && row.metric == floor_metric) {
                *out_value = row.value;
                return true;
            }
        }
        return false;
    };

    struct PanelDef {
        const char* metric;
        const char* floor_metric;
        const char* label;
        const char* unit;
    };
    const PanelDef panels_meta[] = {
        {kMetricEndPose, kMetricFloorEnd, "end-pose position error", "m"},
        {kMetricAvgPosition, kMetricFloorAvg, "average position error", "m"},
        {kMetricKeyPoseAngle, kMetricFloorAngle, "key-pose angle error", "rad"},
    };

    bool has_noise = false;
    for (const auto& row : means.rows) has_noise = has_noise || row.noise_e > 0.0;

    for (const auto& def : panels_meta) {
        // frame sweep chart
        SvgChart chart;
        chart.title = std::string(def.label) + " vs input frames";
        chart.x_label = "input frames";
        chart.y_label = std::string("error (") + def.unit + ")";
        bool any = false;
        for (const auto& mode : modes) {
            SvgPanel panel;
            panel.title = mode;
            SvgSeries with{"with gaze", "#c62828", false,
                           series_points(mode, def.metric, true, false, false)};
            SvgSeries without{"without gaze", "#2e7d32", false,
                              series_points(mode, def.metric, false, false, false)};
            double floor = 0.0;
            if (!with.points.empty() || !without.points.empty()) {
                if (floor_value(mode, def.floor_metric, &floor)) {
                    SvgSeries fl{"vq-vae floor", "#757575", true, {}};
                    double x_min = 1e300, x_max = -1e300;
                    for (const auto& s : {with, without}) {
                        for (const auto& [px, py] : s.points) {
                            x_min = std::min(x_min, px);
                            x_max = std::max(x_max, px);
                        }
                    }
                    fl.points = {{x_min, floor}, {x_max, floor}};
                    panel.series.push_back(fl);
                }
                panel.series.push_back(with);
                panel.series.push_back(without);
                any = true;
            }
            chart.panels.push_back(std::move(panel));
        }
        if (any) {
            const std::string path = out_dir + "/" + def.metric + "_vs_frames.svg";
            write_svg_chart(chart, path);
            written.push_back(path);
        }

        if (!has_noise) continue;
        // noise sweep chart, squared values per the MSE convention
        SvgChart noise_chart;
        noise_chart.title = std::string(def.label) + " (squared) vs input noise";
        noise_chart.x_label = "mean joint noise e (m)";
        noise_chart.y_label = std::string("MSE (") + def.unit + "^2)";
        bool any_noise = false;
        for (const auto& mode : modes) {
            SvgPanel panel;
            panel.title = mode;
            SvgSeries with{"with gaze", "#c62828", false,
                           series_points(mode, def.metric, true, true, true)};
            SvgSeries without{"without gaze", "#2e7d32", false,
                              series_points(mode, def.metric, false, true, true)};
            if (!with.points.empty() || !without.points.empty()) {
                // no-noise reference as the dashed gray line
                std::vector<std::pair<double, double>> clean =
                    series_points(mode, def.metric, true, false, true);
                if (!clean.empty() && !with.points.empty()) {
                    SvgSeries ref{"no-noise reference", "#757575", true, {}};
                    double y = clean.front().second;
                    for (const auto& [px, py] : clean) y = std::min(y, py);
                    ref.points = {{with.points.front().first, y}, {with.points.back().first, y}};
                    panel.series.push_back(ref);
                }
                panel.series.push_back(with);
                panel.series.push_back(without);
                any_noise = true;
            }
            noise_chart.panels.push_back(std::move(panel));
        }
        if (any_noise) {
            const std::string path = out_dir + "/" + def.metric + "_vs_noise.svg";
            write_svg_chart(noise_chart, path);
            written.push_back(path);
        }
    }
    return written;
}

void write_top_view_svg(const TopViewPlot& plot, const std::string& path) {
    double x_lo = 1e300, x_hi = -1e300, y_lo = 1e300, y_hi = -1e300;
    auto extend = [&](const Vec3& p) {
        x_lo = std::min(x_lo, p.x);
        x_hi = std::max(x_hi, p.x);
        y_lo = std::min(y_lo, p.y);
        y_hi = std::max(y_hi, p.y);
    };
    for (const auto& v : plot.right_input) extend(v);
    for (const auto& v : plot.right_pred) extend(v);
    for (const auto& v : plot.left_input) extend(v);
    for (const auto& v : plot.left_pred) extend(v);
    for (const auto& [p, is_target] : plot.objects) extend(p);
    if (x_lo > x_hi) throw param_error("top view: nothing to draw");
    std::tie(x_lo, x_hi) = nice_range(x_lo, x_hi);
    std::tie(y_lo, y_hi) = nice_range(y_lo, y_hi);

    const double width = 560, height = 520;
    const Mapper m{x_lo, x_hi, y_lo, y_hi, 60, width - 20, 50, height - 60};

    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot open '" + path + "' for writing");
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
        << "' viewBox='0 0 " << width << " " << height << "'>\n"
        << "<defs>"
           "<marker id='arr_r' viewBox='0 0 10 10' refX='9' refY='5' markerWidth='7' "
           "markerHeight='7' orient='auto-start-reverse'>"
           "<path d='M 0 0 L 10 5 L 0 10 z' fill='#c62828'/></marker>"
           "<marker id='arr_b' viewBox='0 0 10 10' refX='9' refY='5' markerWidth='7' "
           "markerHeight='7' orient='auto-start-reverse'>"
           "<path d='M 0 0 L 10 5 L 0 10 z' fill='#1565c0'/></marker>"
           "</defs>\n";
    out << "<rect width='100%' height='100%' fill='white'/>\n";
    out << "<text x='" << width / 2 << "' y='22' font-size='14' text-anchor='middle' fill='#111'>"
        << plot.title << "</text>\n";
    draw_axes(out, m, "x (m)", "y (m)", true);

    auto polyline = [&](const std::vector<Vec3>& pts, const char* color, bool dashed) {
        if (pts.size() < 2) return;
        out << "<polyline fill='none' stroke='" << color << "' stroke-width='1.4'"
            << (dashed ? " stroke-dasharray='4,3'" : "") << " points='";
        for (const auto& p : pts) out << m.x(p.x) << ',' << m.y(p.y) << ' ';
        out << "'/>\n";
    };
    auto arrows = [&](const std::vector<Vec3>& pts, const char* color, const char* marker) {
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
            out << "<line x1='" << m.x(pts[i].x) << "' y1='" << m.y(pts[i].y) << "' x2='"
                << m.x(pts[i + 1].x) << "' y2='" << m.y(pts[i + 1].y) << "' stroke='" << color
                << "' stroke-width='1.8' marker-end='url(#" << marker << ")'/>\n";
        }
        for (const auto& p : pts) {
            out << "<circle cx='" << m.x(p.x) << "' cy='" << m.y(p.y) << "' r='3.4' fill='"
                << color << "'/>\n";
        }
    };
    // observed palm tracks in light strokes, predictions with arrows
    polyline(plot.right_input, "#e57373", true);
    polyline(plot.left_input, "#64b5f6", true);
    arrows(plot.right_pred, "#c62828", "arr_r");
    arrows(plot.left_pred, "#1565c0", "arr_b");

    auto star = [&](const Vec3& p, const char* color) {
        const double cx = m.x(p.x), cy = m.y(p.y), r1 = 9, r2 = 3.8;
        out << "<polygon fill='" << color << "' points='";
        for (int i = 0; i < 10; ++i) {
            const double r = i % 2 == 0 ? r1 : r2;
            const double a = -M_PI / 2 + i * M_PI / 5;
            out << cx + r * std::cos(a) << ',' << cy + r * std::sin(a) << ' ';
        }
        out << "'/>\n";
    };
    // pixels-per-meter for the target-zone circle
    const double ppm = (m.px1 - m.px0) / (m.x1 - m.x0);
    for (const auto& [p, is_target] : plot.objects) {
        if (is_target) {
            out << "<circle cx='" << m.x(p.x) << "' cy='" << m.y(p.y) << "' r='"
                << plot.target_zone_radius * ppm
                << "' fill='none' stroke='#616161' stroke-dasharray='5,4'/>\n";
            star(p, "#f9a825");
        } else {
            out << "<circle cx='" << m.x(p.x) << "' cy='" << m.y(p.y)
                << "' r='4' fill='none' stroke='#616161' stroke-width='1.4'/>\n";
        }
    }
    out << "</svg>\n";
}

}  // namespace gzm
