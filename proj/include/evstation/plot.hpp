#pragma once

// Minimal static SVG plotting: line charts for the daily time series and
// grouped bar charts for the Monte Carlo and sensitivity figures.

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <string>
#include <vector>

#include "evstation/common.hpp"

namespace evstation {

struct PlotSeries {
    std::string name;
    std::vector<double> values;
};

namespace plot_detail {

constexpr double kWidth = 720.0;
constexpr double kHeight = 360.0;
constexpr double kMarginLeft = 70.0;
constexpr double kMarginRight = 20.0;
constexpr double kMarginTop = 40.0;
constexpr double kMarginBottom = 50.0;

inline const char* color(std::size_t i) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b"};
    return palette[i % 6];
}

inline void header(std::ofstream& out, const std::string& title) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"15\">" << title << "</text>\n";
}

inline void axes(std::ofstream& out, const std::string& xlabel, const std::string& ylabel,
                 double x_min, double x_max, double y_min, double y_max) {
    const double x0 = kMarginLeft, x1 = kWidth - kMarginRight;
    const double y0 = kHeight - kMarginBottom, y1 = kMarginTop;
    out << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y0
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1
        << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << kHeight - 12
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << xlabel
        << "</text>\n";
    out << "<text x=\"16\" y=\"" << (y0 + y1) / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
        << "transform=\"rotate(-90 16 " << (y0 + y1) / 2 << ")\">" << ylabel << "</text>\n";
    out << std::setprecision(4);
    for (int t = 0; t <= 4; ++t) {
        const double fx = x_min + (x_max - x_min) * t / 4.0;
        const double px = x0 + (x1 - x0) * t / 4.0;
        out << "<text x=\"" << px << "\" y=\"" << y0 + 16
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << fx
            << "</text>\n";
        const double fy = y_min + (y_max - y_min) * t / 4.0;
        const double py = y0 + (y1 - y0) * t / 4.0;
        out << "<text x=\"" << x0 - 6 << "\" y=\"" << py + 3
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << fy
            << "</text>\n";
    }
}

} // namespace plot_detail

inline void write_line_chart(const std::string& path, const std::string& title,
                             const std::string& xlabel, const std::string& ylabel,
                             const std::vector<double>& x,
                             const std::vector<PlotSeries>& series) {
    namespace pd = plot_detail;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write plot file: " + path);
    double y_min = 0.0, y_max = 1.0;
    bool first = true;
    for (const auto& s : series)
        for (double v : s.values) {
            if (first) {
                y_min = y_max = v;
                first = false;
            }
            y_min = std::min(y_min, v);
            y_max = std::max(y_max, v);
        }
    if (y_max - y_min < 1e-12) y_max = y_min + 1.0;
    const double x_min = x.empty() ? 0.0 : x.front();
    const double x_max = x.empty() ? 1.0 : x.back();
    pd::header(out, title);
    pd::axes(out, xlabel, ylabel, x_min, x_max, y_min, y_max);
    const double px0 = pd::kMarginLeft, px1 = pd::kWidth - pd::kMarginRight;
    const double py0 = pd::kHeight - pd::kMarginBottom, py1 = pd::kMarginTop;
    out << std::setprecision(6);
    for (std::size_t si = 0; si < series.size(); ++si) {
        out << "<polyline fill=\"none\" stroke=\"" << pd::color(si)
            << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < x.size() && i < series[si].values.size(); ++i) {
            const double px = px0 + (px1 - px0) * (x[i] - x_min) / (x_max - x_min + 1e-300);
            const double py =
                py0 + (py1 - py0) * (series[si].values[i] - y_min) / (y_max - y_min);
            out << px << "," << py << " ";
        }
        out << "\"/>\n";
        out << "<text x=\"" << px1 - 140 << "\" y=\"" << pd::kMarginTop + 14 * (si + 1)
            << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" << pd::color(si) << "\">"
            << series[si].name << "</text>\n";
    }
    out << "</svg>\n";
}

inline void write_bar_chart(const std::string& path, const std::string& title,
                            const std::string& xlabel, const std::string& ylabel,
                            const std::vector<std::string>& categories,
                            const std::vector<PlotSeries>& series) {
    namespace pd = plot_detail;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write plot file: " + path);
    double y_min = 0.0, y_max = 0.0;
    for (const auto& s : series)
        for (double v : s.values) {
            y_min = std::min(y_min, v);
            y_max = std::max(y_max, v);
        }
    if (y_max - y_min < 1e-12) y_max = y_min + 1.0;
    pd::header(out, title);
    pd::axes(out, xlabel, ylabel, 0.0, static_cast<double>(categories.size()), y_min, y_max);
    const double px0 = pd::kMarginLeft, px1 = pd::kWidth - pd::kMarginRight;
    const double py0 = pd::kHeight - pd::kMarginBottom, py1 = pd::kMarginTop;
    const double group_w = (px1 - px0) / std::max<std::size_t>(1, categories.size());
    const double bar_w = group_w / (static_cast<double>(series.size()) + 1.0);
    const auto y_of = [&](double v) { return py0 + (py1 - py0) * (v - y_min) / (y_max - y_min); };
    out << std::setprecision(6);
    for (std::size_t c = 0; c < categories.size(); ++c) {
        for (std::size_t si = 0; si < series.size(); ++si) {
            if (c >= series[si].values.size()) continue;
            const double v = series[si].values[c];
            const double x =
                px0 + group_w * static_cast<double>(c) + bar_w * (0.5 + static_cast<double>(si));
            const double top = y_of(std::max(v, 0.0));
            const double bottom = y_of(std::min(v, 0.0));
            out << "<rect x=\"" << x << "\" y=\"" << top << "\" width=\"" << bar_w
                << "\" height=\"" << std::max(1e-9, bottom - top) << "\" fill=\""
                << pd::color(si) << "\"/>\n";
        }
        out << "<text x=\"" << px0 + group_w * (static_cast<double>(c) + 0.5) << "\" y=\""
            << py0 + 16 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
            << "font-size=\"10\">" << categories[c] << "</text>\n";
    }
    // zero line
    out << "<line x1=\"" << px0 << "\" y1=\"" << y_of(0.0) << "\" x2=\"" << px1 << "\" y2=\""
        << y_of(0.0) << "\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n";
    for (std::size_t si = 0; si < series.size(); ++si)
        out << "<text x=\"" << px1 - 140 << "\" y=\"" << pd::kMarginTop + 14 * (si + 1)
            << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" << pd::color(si) << "\">"
            << series[si].name << "</text>\n";
    out << "</svg>\n";
}

} // namespace evstation
