#pragma once

#include "sepode/harness.hpp"
#include "sepode/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace sepode {

/// Full-precision decimal formatting; round-trips doubles exactly.
inline std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string fmt_fixed(double v, int digits = 2) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
    if (!out) throw std::runtime_error("write failed for " + path);
}

// ---------------------------------------------------------------------------
// Minimal static SVG plotting: enough for line charts, scatter plots with a
// reference diagonal, and boxplots. Outputs are deterministic text.
// ---------------------------------------------------------------------------

class SvgCanvas {
public:
    SvgCanvas(double x_min, double x_max, double y_min, double y_max, int width = 640,
              int height = 480)
        : x_min_(x_min), x_max_(x_max), y_min_(y_min), y_max_(y_max), width_(width),
          height_(height) {
        body_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
              << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " " << height
              << "\">\n";
        body_ << "<rect width=\"" << width << "\" height=\"" << height
              << "\" fill=\"white\"/>\n";
    }

    double px(double x) const {
        return margin_ + (x - x_min_) / (x_max_ - x_min_) * (width_ - 2 * margin_);
    }
    double py(double y) const {
        return height_ - margin_ -
               (y - y_min_) / (y_max_ - y_min_) * (height_ - 2 * margin_);
    }

    void line(double x1, double y1, double x2, double y2, const std::string& color,
              double width = 1.0, const std::string& dash = "") {
        body_ << "<line x1=\"" << fmt_fixed(px(x1)) << "\" y1=\"" << fmt_fixed(py(y1))
              << "\" x2=\"" << fmt_fixed(px(x2)) << "\" y2=\"" << fmt_fixed(py(y2))
              << "\" stroke=\"" << color << "\" stroke-width=\"" << width << "\"";
        if (!dash.empty()) body_ << " stroke-dasharray=\"" << dash << "\"";
        body_ << "/>\n";
    }

    void polyline(const std::vector<double>& xs, const std::vector<double>& ys,
                  const std::string& color, double width = 1.5) {
        body_ << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\""
              << width << "\" points=\"";
        for (size_t i = 0; i < xs.size(); ++i)
            body_ << fmt_fixed(px(xs[i])) << "," << fmt_fixed(py(ys[i])) << " ";
        body_ << "\"/>\n";
    }

    void circle(double x, double y, double r, const std::string& color,
                double opacity = 0.7) {
        body_ << "<circle cx=\"" << fmt_fixed(px(x)) << "\" cy=\"" << fmt_fixed(py(y))
              << "\" r=\"" << r << "\" fill=\"" << color << "\" fill-opacity=\""
              << opacity << "\"/>\n";
    }

    void rect(double x1, double y1, double x2, double y2, const std::string& fill,
              const std::string& stroke) {
        const double xa = std::min(px(x1), px(x2)), xb = std::max(px(x1), px(x2));
        const double ya = std::min(py(y1), py(y2)), yb = std::max(py(y1), py(y2));
        body_ << "<rect x=\"" << fmt_fixed(xa) << "\" y=\"" << fmt_fixed(ya)
              << "\" width=\"" << fmt_fixed(xb - xa) << "\" height=\""
              << fmt_fixed(yb - ya) << "\" fill=\"" << fill << "\" stroke=\"" << stroke
              << "\"/>\n";
    }

    void text(double x_pixel, double y_pixel, const std::string& s, int size = 12,
              const std::string& anchor = "start", const std::string& color = "#202020") {
        body_ << "<text x=\"" << fmt_fixed(x_pixel) << "\" y=\"" << fmt_fixed(y_pixel)
              << "\" font-size=\"" << size << "\" font-family=\"sans-serif\" fill=\""
              << color << "\" text-anchor=\"" << anchor << "\">" << s << "</text>\n";
    }

    void axes(const std::string& x_label, const std::string& y_label,
              const std::string& title,
              const std::vector<std::pair<double, std::string>>& x_ticks,
              const std::vector<std::pair<double, std::string>>& y_ticks) {
        body_ << "<rect x=\"" << margin_ << "\" y=\"" << margin_ << "\" width=\""
              << width_ - 2 * margin_ << "\" height=\"" << height_ - 2 * margin_
              << "\" fill=\"none\" stroke=\"#404040\"/>\n";
        for (const auto& [v, label] : x_ticks) {
            const double xp = px(v);
            body_ << "<line x1=\"" << fmt_fixed(xp) << "\" y1=\"" << height_ - margin_
                  << "\" x2=\"" << fmt_fixed(xp) << "\" y2=\"" << height_ - margin_ + 5
                  << "\" stroke=\"#404040\"/>\n";
            text(xp, height_ - margin_ + 18, label, 11, "middle");
        }
        for (const auto& [v, label] : y_ticks) {
            const double yp = py(v);
            body_ << "<line x1=\"" << margin_ - 5 << "\" y1=\"" << fmt_fixed(yp)
                  << "\" x2=\"" << margin_ << "\" y2=\"" << fmt_fixed(yp)
                  << "\" stroke=\"#404040\"/>\n";
            text(margin_ - 8, yp + 4, label, 11, "end");
        }
        text(width_ / 2.0, height_ - 8, x_label, 12, "middle");
        body_ << "<text x=\"14\" y=\"" << height_ / 2.0
              << "\" font-size=\"12\" font-family=\"sans-serif\" fill=\"#202020\" "
                 "text-anchor=\"middle\" transform=\"rotate(-90 14 "
              << height_ / 2.0 << ")\">" << y_label << "</text>\n";
        text(width_ / 2.0, margin_ - 10, title, 14, "middle");
    }

    std::string finish() {
        body_ << "</svg>\n";
        return body_.str();
    }

    static constexpr double margin_ = 56.0;

private:
    double x_min_, x_max_, y_min_, y_max_;
    int width_, height_;
    std::ostringstream body_;
};

inline std::vector<std::pair<double, std::string>> nice_ticks(double lo, double hi,
                                                              int count = 5) {
    std::vector<std::pair<double, std::string>> ticks;
    if (!(hi > lo)) {
        ticks.emplace_back(lo, fmt_fixed(lo, 2));
        return ticks;
    }
    for (int i = 0; i < count; ++i) {
        const double v = lo + (hi - lo) * i / (count - 1);
        ticks.emplace_back(v, fmt_fixed(v, 2));
    }
    return ticks;
}

struct BoxStats {
    double lo = 0, q1 = 0, med = 0, q3 = 0, hi = 0;
};

inline BoxStats box_stats(std::vector<double> v) {
    BoxStats s;
    if (v.empty()) return s;
    std::sort(v.begin(), v.end());
    const auto quantile = [&](double q) {
        const double pos = q * (v.size() - 1);
        const size_t i = static_cast<size_t>(pos);
        const double w = pos - i;
        return i + 1 < v.size() ? (1 - w) * v[i] + w * v[i + 1] : v[i];
    };
    s.lo = v.front();
    s.q1 = quantile(0.25);
    s.med = quantile(0.5);
    s.q3 = quantile(0.75);
    s.hi = v.back();
    return s;
}

inline double log10_clipped(double v) {
    return std::log10(std::max(v, 1e-300));
}

inline const std::vector<std::string>& prior_palette() {
    static const std::vector<std::string> colors = {"#1b9e77", "#d95f02", "#7570b3"};
    return colors;
}

}  // namespace sepode
