#include "kinn/svg.hpp"
#include "kinn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace kinn {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string fmt_tick(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

// A readable step for roughly `count` ticks across `span`.
double nice_step(double span, int count) {
    const double raw = span / count;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
        if (raw <= m * mag) return m * mag;
    }
    return 10.0 * mag;
}

} // namespace

void write_svg_chart(const std::string& path, const std::string& title,
                     const std::vector<ChartSeries>& series,
                     std::size_t x_start, const std::string& x_label,
                     const std::string& y_label) {
    if (series.empty()) throw ConfigError("chart needs at least one series");
    std::size_t n = 0;
    double y_min = std::numeric_limits<double>::infinity();
    double y_max = -std::numeric_limits<double>::infinity();
    for (const auto& s : series) {
        n = std::max(n, s.values.size());
        for (double v : s.values) {
            y_min = std::min(y_min, v);
            y_max = std::max(y_max, v);
        }
    }
    if (n < 2) throw ConfigError("chart needs at least two points");
    if (y_min == y_max) {
        y_min -= 1.0;
        y_max += 1.0;
    }

    const double width = 960, height = 440;
    const double left = 70, right = 20, top = 40, bottom = 55;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;

    const double x_max = static_cast<double>(x_start + n - 1);
    const double x_min = static_cast<double>(x_start);
    auto sx = [&](double x) {
        return left + (x - x_min) / (x_max - x_min) * plot_w;
    };
    auto sy = [&](double y) {
        return top + (y_max - y) / (y_max - y_min) * plot_h;
    };

    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
        << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << ' '
        << height << "\">\n";
    out << "<rect width=\"" << width << "\" height=\"" << height
        << "\" fill=\"white\"/>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"15\">"
        << escape(title) << "</text>\n";

    // Axes.
    out << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\""
        << left + plot_w << "\" y2=\"" << top + plot_h
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left
        << "\" y2=\"" << top + plot_h << "\" stroke=\"black\"/>\n";

    const double ys = nice_step(y_max - y_min, 6);
    for (double y = std::ceil(y_min / ys) * ys; y <= y_max + 1e-12; y += ys) {
        out << "<line x1=\"" << left << "\" y1=\"" << fmt(sy(y)) << "\" x2=\""
            << left + plot_w << "\" y2=\"" << fmt(sy(y))
            << "\" stroke=\"#dddddd\"/>\n";
        out << "<text x=\"" << left - 8 << "\" y=\"" << fmt(sy(y) + 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
               "font-size=\"11\">"
            << fmt_tick(y) << "</text>\n";
    }
    const double xs = nice_step(x_max - x_min, 8);
    for (double x = std::ceil(x_min / xs) * xs; x <= x_max + 1e-12; x += xs) {
        out << "<text x=\"" << fmt(sx(x)) << "\" y=\"" << top + plot_h + 18
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
               "font-size=\"11\">"
            << fmt_tick(x) << "</text>\n";
    }
    out << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 12
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"12\">"
        << escape(x_label) << "</text>\n";
    out << "<text x=\"16\" y=\"" << top + plot_h / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"12\" transform=\"rotate(-90 16 "
        << top + plot_h / 2 << ")\">" << escape(y_label) << "</text>\n";

    for (const auto& s : series) {
        out << "<polyline fill=\"none\" stroke=\"" << s.color
            << "\" stroke-width=\"1.2\" points=\"";
        for (std::size_t i = 0; i < s.values.size(); ++i) {
            if (i) out << ' ';
            out << fmt(sx(static_cast<double>(x_start + i))) << ','
                << fmt(sy(s.values[i]));
        }
        out << "\"/>\n";
    }

    double lx = left + 12;
    for (const auto& s : series) {
        out << "<rect x=\"" << fmt(lx) << "\" y=\"" << top + 6
            << "\" width=\"14\" height=\"4\" fill=\"" << s.color << "\"/>\n";
        out << "<text x=\"" << fmt(lx + 18) << "\" y=\"" << top + 12
            << "\" font-family=\"sans-serif\" font-size=\"11\">"
            << escape(s.label) << "</text>\n";
        lx += 22 + 7.0 * static_cast<double>(s.label.size()) + 14;
    }

    out << "</svg>\n";
    if (!out) throw IoError("write failed: " + path);
}

} // namespace kinn
