#include "pfrp/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "pfrp/errors.hpp"

namespace pfrp {

namespace {

constexpr int kMargin = 50;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

void bounds(const std::vector<double>& v, double& lo, double& hi) {
    for (double x : v) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
}

void open_svg(std::ofstream& out, const std::string& title, int width, int height) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << width / 2 << "\" y=\"18\" text-anchor=\"middle\" font-family=\"sans-serif\""
        << " font-size=\"14\">" << title << "</text>\n";
}

}  // namespace

void write_line_chart_svg(const std::string& path, const std::string& title,
                          const std::vector<SvgSeries>& series, int width, int height) {
    if (series.empty()) throw std::invalid_argument("write_line_chart_svg: no series");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    std::size_t n = 0;
    for (const auto& s : series) {
        bounds(s.y, lo, hi);
        n = std::max(n, s.y.size());
    }
    if (n < 2) throw std::invalid_argument("write_line_chart_svg: series too short");
    if (hi == lo) {
        hi += 1.0;
        lo -= 1.0;
    }

    const double plot_w = width - 2.0 * kMargin;
    const double plot_h = height - 2.0 * kMargin;
    auto sx = [&](std::size_t i) {
        return kMargin + plot_w * static_cast<double>(i) / static_cast<double>(n - 1);
    };
    auto sy = [&](double v) { return kMargin + plot_h * (1.0 - (v - lo) / (hi - lo)); };

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    open_svg(out, title, width, height);
    out << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << fmt(plot_w)
        << "\" height=\"" << fmt(plot_h) << "\" fill=\"none\" stroke=\"#888\"/>\n";
    out << "<text x=\"8\" y=\"" << fmt(sy(hi)) << "\" font-family=\"sans-serif\" font-size=\"11\">"
        << fmt(hi) << "</text>\n";
    out << "<text x=\"8\" y=\"" << fmt(sy(lo)) << "\" font-family=\"sans-serif\" font-size=\"11\">"
        << fmt(lo) << "</text>\n";

    for (const auto& s : series) {
        out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.3\" points=\"";
        for (std::size_t i = 0; i < s.y.size(); ++i)
            out << fmt(sx(i)) << "," << fmt(sy(s.y[i])) << " ";
        out << "\"/>\n";
    }
    // legend
    double ly = kMargin + 14.0;
    for (const auto& s : series) {
        out << "<rect x=\"" << width - kMargin - 130 << "\" y=\"" << fmt(ly - 9)
            << "\" width=\"12\" height=\"4\" fill=\"" << s.color << "\"/>\n"
            << "<text x=\"" << width - kMargin - 112 << "\" y=\"" << fmt(ly)
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << s.label << "</text>\n";
        ly += 16.0;
    }
    out << "</svg>\n";
}

void write_scatter_svg(const std::string& path, const std::string& title,
                       const std::vector<double>& xs, const std::vector<double>& ys,
                       const std::string& xlabel, const std::string& ylabel, int width,
                       int height) {
    if (xs.size() != ys.size() || xs.empty())
        throw std::invalid_argument("write_scatter_svg: bad input");
    double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo;
    double ylo = xlo, yhi = -xlo;
    bounds(xs, xlo, xhi);
    bounds(ys, ylo, yhi);
    if (xhi == xlo) {
        xhi += 1.0;
        xlo -= 1.0;
    }
    if (yhi == ylo) {
        yhi += 1.0;
        ylo -= 1.0;
    }
    const double plot_w = width - 2.0 * kMargin;
    const double plot_h = height - 2.0 * kMargin;
    auto sx = [&](double v) { return kMargin + plot_w * (v - xlo) / (xhi - xlo); };
    auto sy = [&](double v) { return kMargin + plot_h * (1.0 - (v - ylo) / (yhi - ylo)); };

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    open_svg(out, title, width, height);
    out << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << fmt(plot_w)
        << "\" height=\"" << fmt(plot_h) << "\" fill=\"none\" stroke=\"#888\"/>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"" << height - 12
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << xlabel
        << "</text>\n";
    out << "<text x=\"14\" y=\"" << height / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 14 "
        << height / 2 << ")\">" << ylabel << "</text>\n";
    for (std::size_t i = 0; i < xs.size(); ++i)
        out << "<circle cx=\"" << fmt(sx(xs[i])) << "\" cy=\"" << fmt(sy(ys[i]))
            << "\" r=\"2.2\" fill=\"#1f77b4\" fill-opacity=\"0.6\"/>\n";
    out << "</svg>\n";
}

}  // namespace pfrp
