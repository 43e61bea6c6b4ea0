// Minimal SVG line plots: BER (log y) versus SNR (linear x), one polyline per
// series. Plots are derived artifacts; the CSV rows stay the primary data.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "mind/core.hpp"

namespace mind::plot {

struct Series {
    std::string label;
    std::vector<std::pair<double, double>> points;  // (snr_db, ber)
};

namespace detail {

inline const char* color(size_t i) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    return palette[i % 10];
}

inline std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

}  // namespace detail

// Zero/negative BER points cannot sit on a log axis and are dropped from the
// polyline (their neighbors still draw).
inline void write_svg(const std::string& path, const std::string& title,
                      const std::vector<Series>& series) {
    const double W = 760, H = 520;
    const double ml = 70, mr = 180, mt = 44, mb = 52;
    const double pw = W - ml - mr, ph = H - mt - mb;

    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series)
        for (auto [x, y] : s.points) {
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            if (y > 0.0) {
                ymin = std::min(ymin, y);
                ymax = std::max(ymax, y);
            }
        }
    if (xmin > xmax) {
        xmin = 0;
        xmax = 1;
    }
    if (ymin > ymax) {
        ymin = 1e-5;
        ymax = 1;
    }
    if (xmax == xmin) xmax = xmin + 1;
    double lo = std::floor(std::log10(ymin));
    double hi = std::ceil(std::log10(ymax));
    if (hi <= lo) hi = lo + 1;

    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return mt + (hi - std::log10(y)) / (hi - lo) * ph; };

    std::ofstream f(path);
    require(f.good(), "write_svg: cannot open " + path);
    f << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
    f << "<rect width='100%' height='100%' fill='white'/>\n";
    f << "<text x='" << ml << "' y='24' font-family='sans-serif' font-size='15'>" << title
      << "</text>\n";

    // y grid: decades
    for (double d = lo; d <= hi + 1e-9; d += 1.0) {
        double y = py(std::pow(10.0, d));
        f << "<line x1='" << ml << "' y1='" << y << "' x2='" << ml + pw << "' y2='" << y
          << "' stroke='#dddddd'/>\n";
        f << "<text x='" << ml - 8 << "' y='" << y + 4
          << "' font-family='sans-serif' font-size='11' text-anchor='end'>1e" << (int)d
          << "</text>\n";
    }
    // x ticks on integer grid points
    double step = (xmax - xmin) > 12 ? 2.0 : 1.0;
    for (double x = std::ceil(xmin); x <= xmax + 1e-9; x += step) {
        double xx = px(x);
        f << "<line x1='" << xx << "' y1='" << mt << "' x2='" << xx << "' y2='" << mt + ph
          << "' stroke='#eeeeee'/>\n";
        f << "<text x='" << xx << "' y='" << mt + ph + 18
          << "' font-family='sans-serif' font-size='11' text-anchor='middle'>" << detail::fmt(x)
          << "</text>\n";
    }
    f << "<text x='" << ml + pw / 2 << "' y='" << H - 12
      << "' font-family='sans-serif' font-size='12' text-anchor='middle'>SNR (dB)</text>\n";
    f << "<text x='16' y='" << mt + ph / 2
      << "' font-family='sans-serif' font-size='12' transform='rotate(-90 16 " << mt + ph / 2
      << ")' text-anchor='middle'>BER</text>\n";
    f << "<rect x='" << ml << "' y='" << mt << "' width='" << pw << "' height='" << ph
      << "' fill='none' stroke='#444444'/>\n";

    for (size_t i = 0; i < series.size(); ++i) {
        const char* col = detail::color(i);
        std::string poly;
        for (auto [x, y] : series[i].points) {
            if (y <= 0.0) continue;
            poly += detail::fmt(px(x)) + "," + detail::fmt(py(y)) + " ";
        }
        if (!poly.empty())
            f << "<polyline points='" << poly << "' fill='none' stroke='" << col
              << "' stroke-width='1.8'/>\n";
        for (auto [x, y] : series[i].points) {
            if (y <= 0.0) continue;
            f << "<circle cx='" << px(x) << "' cy='" << py(y) << "' r='2.6' fill='" << col
              << "'/>\n";
        }
        double ly = mt + 16 + 18 * static_cast<double>(i);
        f << "<line x1='" << ml + pw + 10 << "' y1='" << ly - 4 << "' x2='" << ml + pw + 34
          << "' y2='" << ly - 4 << "' stroke='" << col << "' stroke-width='2'/>\n";
        f << "<text x='" << ml + pw + 40 << "' y='" << ly
          << "' font-family='sans-serif' font-size='11'>" << series[i].label << "</text>\n";
    }
    f << "</svg>\n";
}

}  // namespace mind::plot
