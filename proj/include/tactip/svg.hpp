#pragma once

// Minimal SVG charts: scatter and line series on linear axes. Output depends
// only on the data, so reruns are byte-identical.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "tactip/error.hpp"

namespace tactip::svg {

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> err;  // optional symmetric error bars
    bool line = false;        // false: markers only
    std::string color = "#1f77b4";
};

struct Chart {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
    int width = 640;
    int height = 420;
    bool diagonal = false;  // draw y = x (predicted vs true plots)
};

inline const std::vector<std::string>& palette() {
    static const std::vector<std::string> p = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
    return p;
}

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

inline std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

inline std::string render(const Chart& c) {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const Series& s : c.series) {
        if (s.x.size() != s.y.size() || (!s.err.empty() && s.err.size() != s.y.size()))
            throw ParameterError("svg: series \"" + s.name + "\" has mismatched lengths");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            const double e = s.err.empty() ? 0.0 : s.err[i];
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i] - e);
            y1 = std::max(y1, s.y[i] + e);
        }
    }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (c.diagonal) {
        x0 = y0 = std::min(x0, y0);
        x1 = y1 = std::max(x1, y1);
    }
    if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
    if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
    const double padx = 0.04 * (x1 - x0), pady = 0.06 * (y1 - y0);
    x0 -= padx, x1 += padx, y0 -= pady, y1 += pady;

    const double left = 70, right = 150, top = 40, bottom = 55;
    const double pw = c.width - left - right, ph = c.height - top - bottom;
    auto px = [&](double v) { return left + (v - x0) / (x1 - x0) * pw; };
    auto py = [&](double v) { return top + ph - (v - y0) / (y1 - y0) * ph; };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << c.width << "\" height=\"" << c.height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << num(c.width / 2.0) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(c.title)
      << "</text>\n";
    o << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 5; ++t) {
        const double vx = x0 + (x1 - x0) * t / 5.0, vy = y0 + (y1 - y0) * t / 5.0;
        o << "<text x=\"" << num(px(vx)) << "\" y=\"" << num(top + ph + 16) << "\" text-anchor=\"middle\">"
          << tick_label(vx) << "</text>\n";
        o << "<text x=\"" << num(left - 6) << "\" y=\"" << num(py(vy) + 4) << "\" text-anchor=\"end\">" << tick_label(vy)
          << "</text>\n";
        o << "<line x1=\"" << num(left) << "\" y1=\"" << num(py(vy)) << "\" x2=\"" << num(left + pw) << "\" y2=\""
          << num(py(vy)) << "\" stroke=\"#eeeeee\"/>\n";
    }
    o << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(c.height - 12.0) << "\" text-anchor=\"middle\">"
      << escape(c.x_label) << "</text>\n";
    o << "<text transform=\"translate(16," << num(top + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(c.y_label) << "</text>\n";
    if (c.diagonal)
        o << "<line x1=\"" << num(px(x0)) << "\" y1=\"" << num(py(y0)) << "\" x2=\"" << num(px(x1)) << "\" y2=\""
          << num(py(y1)) << "\" stroke=\"#999999\" stroke-dasharray=\"4 3\"/>\n";

    for (std::size_t k = 0; k < c.series.size(); ++k) {
        const Series& s = c.series[k];
        if (s.line && s.x.size() > 1) {
            o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t i = 0; i < s.x.size(); ++i) o << (i ? " " : "") << num(px(s.x[i])) << ',' << num(py(s.y[i]));
            o << "\"/>\n";
        }
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!s.err.empty())
                o << "<line x1=\"" << num(px(s.x[i])) << "\" y1=\"" << num(py(s.y[i] - s.err[i])) << "\" x2=\""
                  << num(px(s.x[i])) << "\" y2=\"" << num(py(s.y[i] + s.err[i])) << "\" stroke=\"" << s.color << "\"/>\n";
            if (!s.line || !s.err.empty())
                o << "<circle cx=\"" << num(px(s.x[i])) << "\" cy=\"" << num(py(s.y[i])) << "\" r=\"2.5\" fill=\""
                  << s.color << "\"/>\n";
        }
        const double ly = top + 14 + 18.0 * static_cast<double>(k);
        o << "<rect x=\"" << num(left + pw + 12) << "\" y=\"" << num(ly - 9) << "\" width=\"10\" height=\"10\" fill=\""
          << s.color << "\"/>\n";
        o << "<text x=\"" << num(left + pw + 28) << "\" y=\"" << num(ly) << "\">" << escape(s.name) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

inline void save(const Chart& c, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << render(c);
}

} // namespace tactip::svg
