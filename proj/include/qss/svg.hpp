#pragma once

// Standalone SVG line charts: one polyline per series, a legend, linear axes
// auto-scaled with a 5% margin and optional shaded time windows.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <tuple>
#include <vector>

#include "qss/error.hpp"

namespace qss {

struct PlotSeries {
    std::string label;
    std::vector<double> times;
    std::vector<double> values;
};

/// Time window drawn as a translucent band in the color of `series`.
struct PlotBand {
    double start = 0.0;
    double end = 0.0;
    std::size_t series = 0;
};

struct PlotOptions {
    std::string title;
    std::string x_label = "t";
    std::string y_label = "T";
    int width = 720;
    int height = 480;
    std::vector<PlotBand> bands;
};

namespace detail {

inline std::string fixed(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", std::abs(v) < 1e-12 ? 0.0 : v);
    return buf;
}

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

/// [lo, hi] widened by 5% of the range on each side; a zero range widens by 5% of |v| (or 1).
inline std::pair<double, double> padded(double lo, double hi) {
    double margin = 0.05 * (hi - lo);
    if (!(margin > 0.0)) margin = std::abs(lo) > 0.0 ? 0.05 * std::abs(lo) : 1.0;
    return {lo - margin, hi + margin};
}

inline constexpr std::array<const char*, 8> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                                        "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

}  // namespace detail

inline std::string render_plot(const std::vector<PlotSeries>& series, const PlotOptions& options = {}) {
    if (series.empty()) throw UsageError("render_plot needs at least one series");
    double x_lo = INFINITY, x_hi = -INFINITY, y_lo = INFINITY, y_hi = -INFINITY;
    for (const auto& s : series) {
        if (s.times.empty() || s.times.size() != s.values.size()) {
            throw UsageError("series '" + s.label + "' must be non-empty with one value per time");
        }
        for (std::size_t i = 0; i < s.times.size(); ++i) {
            if (!std::isfinite(s.times[i]) || !std::isfinite(s.values[i])) {
                throw UsageError("series '" + s.label + "' contains nonfinite data");
            }
            if (i > 0 && !(s.times[i] > s.times[i - 1])) {
                throw UsageError("series '" + s.label + "' times must be increasing");
            }
        }
        x_lo = std::min(x_lo, s.times.front());
        x_hi = std::max(x_hi, s.times.back());
        y_lo = std::min(y_lo, *std::min_element(s.values.begin(), s.values.end()));
        y_hi = std::max(y_hi, *std::max_element(s.values.begin(), s.values.end()));
    }
    for (const auto& band : options.bands) {
        if (band.series >= series.size() || !(band.end >= band.start)) throw UsageError("invalid plot band");
    }
    std::tie(x_lo, x_hi) = detail::padded(x_lo, x_hi);
    std::tie(y_lo, y_hi) = detail::padded(y_lo, y_hi);

    const double W = options.width, H = options.height;
    const double left = 70, right = 170, top = 40, bottom = 50;
    const double pw = W - left - right, ph = H - top - bottom;
    auto sx = [&](double x) { return left + (x - x_lo) / (x_hi - x_lo) * pw; };
    auto sy = [&](double y) { return top + (y_hi - y) / (y_hi - y_lo) * ph; };
    auto color = [](std::size_t i) { return detail::kPalette[i % detail::kPalette.size()]; };

    std::string svg;
    svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(options.width) + "\" height=\"" +
           std::to_string(options.height) + "\" viewBox=\"0 0 " + std::to_string(options.width) + " " +
           std::to_string(options.height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg += "<rect x=\"0\" y=\"0\" width=\"" + detail::fixed(W) + "\" height=\"" + detail::fixed(H) +
           "\" fill=\"white\"/>\n";
    if (!options.title.empty()) {
        svg += "<text x=\"" + detail::fixed(left + pw / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" +
               detail::xml_escape(options.title) + "</text>\n";
    }
    for (const auto& band : options.bands) {
        const double b0 = sx(std::max(band.start, x_lo)), b1 = sx(std::min(band.end, x_hi));
        svg += "<rect class=\"band\" x=\"" + detail::fixed(b0) + "\" y=\"" + detail::fixed(top) + "\" width=\"" +
               detail::fixed(b1 - b0) + "\" height=\"" + detail::fixed(ph) + "\" fill=\"" + color(band.series) +
               "\" fill-opacity=\"0.12\"/>\n";
    }

    // Axes and ticks.
    svg += "<g stroke=\"#333\" stroke-width=\"1\">\n";
    svg += "<line x1=\"" + detail::fixed(left) + "\" y1=\"" + detail::fixed(top + ph) + "\" x2=\"" +
           detail::fixed(left + pw) + "\" y2=\"" + detail::fixed(top + ph) + "\"/>\n";
    svg += "<line x1=\"" + detail::fixed(left) + "\" y1=\"" + detail::fixed(top) + "\" x2=\"" + detail::fixed(left) +
           "\" y2=\"" + detail::fixed(top + ph) + "\"/>\n";
    svg += "</g>\n<g fill=\"#333\">\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = x_lo + (x_hi - x_lo) * i / 4.0, yv = y_lo + (y_hi - y_lo) * i / 4.0;
        svg += "<text x=\"" + detail::fixed(sx(xv)) + "\" y=\"" + detail::fixed(top + ph + 18) +
               "\" text-anchor=\"middle\">" + detail::tick_label(xv) + "</text>\n";
        svg += "<text x=\"" + detail::fixed(left - 6) + "\" y=\"" + detail::fixed(sy(yv) + 4) +
               "\" text-anchor=\"end\">" + detail::tick_label(yv) + "</text>\n";
    }
    svg += "<text x=\"" + detail::fixed(left + pw / 2) + "\" y=\"" + detail::fixed(H - 10) +
           "\" text-anchor=\"middle\">" + detail::xml_escape(options.x_label) + "</text>\n";
    svg += "<text x=\"18\" y=\"" + detail::fixed(top + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
           detail::fixed(top + ph / 2) + ")\">" + detail::xml_escape(options.y_label) + "</text>\n";
    svg += "</g>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        svg += "<polyline fill=\"none\" stroke=\"" + std::string(color(k)) + "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.times.size(); ++i) {
            if (i > 0) svg += ' ';
            svg += detail::fixed(sx(s.times[i])) + "," + detail::fixed(sy(s.values[i]));
        }
        svg += "\"/>\n";
    }

    svg += "<g class=\"legend\">\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const double ly = top + 10 + 20.0 * static_cast<double>(k);
        const double lx = left + pw + 15;
        svg += "<line x1=\"" + detail::fixed(lx) + "\" y1=\"" + detail::fixed(ly) + "\" x2=\"" + detail::fixed(lx + 20) +
               "\" y2=\"" + detail::fixed(ly) + "\" stroke=\"" + color(k) + "\" stroke-width=\"2\"/>\n";
        svg += "<text x=\"" + detail::fixed(lx + 26) + "\" y=\"" + detail::fixed(ly + 4) + "\">" +
               detail::xml_escape(series[k].label) + "</text>\n";
    }
    svg += "</g>\n</svg>\n";
    return svg;
}

}  // namespace qss
