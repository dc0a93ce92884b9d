#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fmx/metrics.hpp"

namespace fmx::exp {

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> mean;
    std::vector<double> stddev;
};

struct PlotStyle {
    std::string title;
    std::string x_label = "x";
    std::string y_label = "value";
    int width = 800;
    int height = 480;
    bool bands = true;
    std::size_t max_points = 400;
};

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

namespace detail {

inline std::string fmt(double v, int precision = 2) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

inline std::string tick_label(double v) {
    if (v == 0.0) return "0";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

/// 1-2-5 tick spacing giving roughly `target` intervals.
inline double nice_step(double span, int target = 5) {
    if (!(span > 0.0)) return 1.0;
    const double raw = span / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double r = raw / mag;
    return (r <= 1.0 ? 1.0 : r <= 2.0 ? 2.0 : r <= 5.0 ? 5.0 : 10.0) * mag;
}

}  // namespace detail

/// Line chart: one mean line per series with an optional +/- std band.
/// Output depends only on the inputs.
inline std::string render_svg(const std::vector<PlotSeries>& series, const PlotStyle& style) {
    if (series.empty()) throw std::invalid_argument("plot: no series");
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};

    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : series) {
        if (s.x.empty()) throw std::invalid_argument("plot: series '" + s.label + "' is empty");
        if (s.mean.size() != s.x.size() || s.stddev.size() != s.x.size())
            throw std::invalid_argument("plot: ragged series '" + s.label + "'");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            const double band = style.bands ? s.stddev[i] : 0.0;
            y0 = std::min(y0, s.mean[i] - band);
            y1 = std::max(y1, s.mean[i] + band);
        }
    }
    if (x1 == x0) x1 = x0 + 1.0;
    if (y1 == y0) y1 = y0 + 1.0;
    const double ystep = detail::nice_step(y1 - y0);
    y0 = std::floor(y0 / ystep) * ystep;
    y1 = std::ceil(y1 / ystep) * ystep;
    const double xstep = detail::nice_step(x1 - x0);

    const double left = 70, right = 170, top = style.title.empty() ? 20 : 40, bottom = 55;
    const double pw = style.width - left - right;
    const double ph = style.height - top - bottom;
    auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << style.width << "\" height=\"" << style.height
      << "\" viewBox=\"0 0 " << style.width << ' ' << style.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!style.title.empty())
        o << "<text x=\"" << detail::fmt(left + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
          << xml_escape(style.title) << "</text>\n";

    // Grid and ticks.
    for (double y = y0; y <= y1 + ystep * 1e-6; y += ystep) {
        o << "<line x1=\"" << detail::fmt(left) << "\" y1=\"" << detail::fmt(py(y)) << "\" x2=\"" << detail::fmt(left + pw)
          << "\" y2=\"" << detail::fmt(py(y)) << "\" stroke=\"#e5e5e5\"/>\n";
        o << "<text x=\"" << detail::fmt(left - 6) << "\" y=\"" << detail::fmt(py(y) + 4) << "\" text-anchor=\"end\">"
          << detail::tick_label(std::abs(y) < ystep * 1e-9 ? 0.0 : y) << "</text>\n";
    }
    for (double x = std::ceil(x0 / xstep) * xstep; x <= x1 + xstep * 1e-6; x += xstep) {
        o << "<line x1=\"" << detail::fmt(px(x)) << "\" y1=\"" << detail::fmt(top + ph) << "\" x2=\"" << detail::fmt(px(x))
          << "\" y2=\"" << detail::fmt(top + ph + 5) << "\" stroke=\"black\"/>\n";
        o << "<text x=\"" << detail::fmt(px(x)) << "\" y=\"" << detail::fmt(top + ph + 19) << "\" text-anchor=\"middle\">"
          << detail::tick_label(x) << "</text>\n";
    }
    o << "<rect x=\"" << detail::fmt(left) << "\" y=\"" << detail::fmt(top) << "\" width=\"" << detail::fmt(pw)
      << "\" height=\"" << detail::fmt(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
    o << "<text x=\"" << detail::fmt(left + pw / 2) << "\" y=\"" << style.height - 12 << "\" text-anchor=\"middle\">"
      << xml_escape(style.x_label) << "</text>\n";
    o << "<text transform=\"translate(18 " << detail::fmt(top + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
      << xml_escape(style.y_label) << "</text>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* color = palette[k % (sizeof palette / sizeof *palette)];
        const auto idx = thinning_indices(s.x.size(), style.max_points);
        if (style.bands) {
            o << "<polygon fill=\"" << color << "\" fill-opacity=\"0.18\" stroke=\"none\" points=\"";
            for (std::size_t i : idx) o << detail::fmt(px(s.x[i])) << ',' << detail::fmt(py(s.mean[i] + s.stddev[i])) << ' ';
            for (auto it = idx.rbegin(); it != idx.rend(); ++it)
                o << detail::fmt(px(s.x[*it])) << ',' << detail::fmt(py(s.mean[*it] - s.stddev[*it])) << ' ';
            o << "\"/>\n";
        }
        o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"";
        for (std::size_t i : idx) o << detail::fmt(px(s.x[i])) << ',' << detail::fmt(py(s.mean[i])) << ' ';
        o << "\"/>\n";
        const double ly = top + 14 + 18.0 * static_cast<double>(k);
        o << "<line x1=\"" << detail::fmt(left + pw + 12) << "\" y1=\"" << detail::fmt(ly) << "\" x2=\""
          << detail::fmt(left + pw + 32) << "\" y2=\"" << detail::fmt(ly) << "\" stroke=\"" << color
          << "\" stroke-width=\"3\"/>\n";
        o << "<text x=\"" << detail::fmt(left + pw + 38) << "\" y=\"" << detail::fmt(ly + 4) << "\">" << xml_escape(s.label)
          << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

/// Reads an aggregate CSV (x, mean, std, n_seeds).
inline PlotSeries load_aggregate_series(const std::filesystem::path& path, std::string label = {}) {
    const CsvTable t = read_csv_file(path.string(), aggregate_columns());
    if (t.rows.empty()) throw std::runtime_error("plot: empty aggregate file " + path.string());
    if (label.empty()) label = path.parent_path().filename().string();
    if (label.empty()) label = path.stem().string();
    return {label, t.values("x"), t.values("mean"), t.values("std")};
}

/// Axis labels implied by the aggregate file name.
inline PlotStyle default_style_for(const std::filesystem::path& first) {
    PlotStyle s;
    const std::string stem = first.stem().string();
    if (stem == "aggregate_pseudo") {
        s.x_label = "t";
        s.y_label = "pseudo-regret";
    } else if (stem == "aggregate_realized") {
        s.x_label = "t";
        s.y_label = "realized regret";
    } else if (stem == "aggregate_return") {
        s.x_label = "environment steps";
        s.y_label = "episodic return";
    }
    return s;
}

}  // namespace fmx::exp
