#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace oploc::plot {

namespace {

constexpr double margin_left = 80.0;
constexpr double margin_right = 30.0;
constexpr double margin_top = 50.0;
constexpr double margin_bottom = 60.0;

std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        default: out += c;
        }
    }
    return out;
}

double nice_step(double span)
{
    const double raw = span / 6.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (raw <= m * mag) return m * mag;
    return 10.0 * mag;
}

int lerp(int a, int b, double t)
{
    return static_cast<int>(std::lround(a + (b - a) * t));
}

} // namespace

std::string to_hex(Rgb c)
{
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
    return buf;
}

Rgb diverging(double value, double limit)
{
    if (!std::isfinite(value)) return {128, 128, 128};
    const double t = std::clamp(value / limit, -1.0, 1.0);
    if (t >= 0.0) return {lerp(247, 178, t), lerp(247, 24, t), lerp(247, 43, t)};
    return {lerp(247, 33, -t), lerp(247, 102, -t), lerp(247, 172, -t)};
}

Rgb sequential(double value)
{
    const double t = std::clamp(value, 0.0, 1.0);
    return {lerp(255, 8, t), lerp(255, 48, t), lerp(255, 107, t)};
}

Rgb categorical(int index)
{
    static const Rgb palette[] = {{31, 119, 180}, {255, 127, 14}, {44, 160, 44},  {214, 39, 40},
                                  {148, 103, 189}, {140, 86, 75},  {227, 119, 194}, {127, 127, 127},
                                  {188, 189, 34},  {23, 190, 207}};
    const int n = static_cast<int>(std::size(palette));
    return palette[((index % n) + n) % n];
}

SvgPlot::SvgPlot(std::string title, std::string x_label, std::string y_label, int width, int height)
    : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)), width_(width), height_(height)
{
}

void SvgPlot::set_range(double x_min, double x_max, double y_min, double y_max)
{
    if (!(x_max > x_min)) x_max = x_min + 1.0;
    if (!(y_max > y_min)) y_max = y_min + 1.0;
    x_min_ = x_min;
    x_max_ = x_max;
    y_min_ = y_min;
    y_max_ = y_max;
}

double SvgPlot::sx(double x) const
{
    return margin_left + (x - x_min_) / (x_max_ - x_min_) * (width_ - margin_left - margin_right);
}

double SvgPlot::sy(double y) const
{
    return height_ - margin_bottom - (y - y_min_) / (y_max_ - y_min_) * (height_ - margin_top - margin_bottom);
}

void SvgPlot::point(double x, double y, Rgb color, double radius)
{
    if (!std::isfinite(x) || !std::isfinite(y)) return;
    body_ += "<circle cx=\"" + num(sx(x)) + "\" cy=\"" + num(sy(y)) + "\" r=\"" + num(radius) + "\" fill=\"" +
             to_hex(color) + "\"/>\n";
}

void SvgPlot::polyline(const std::vector<double>& x, const std::vector<double>& y, Rgb color, double stroke,
                       bool dashed)
{
    std::string pts;
    const std::size_t n = std::min(x.size(), y.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(x[i]) || !std::isfinite(y[i])) continue;
        pts += num(sx(x[i])) + "," + num(sy(y[i])) + " ";
    }
    body_ += "<polyline fill=\"none\" stroke=\"" + to_hex(color) + "\" stroke-width=\"" + num(stroke) + "\"" +
             (dashed ? " stroke-dasharray=\"6,4\"" : "") + " points=\"" + pts + "\"/>\n";
}

void SvgPlot::cell(double x0, double y0, double x1, double y1, Rgb color)
{
    const double left = sx(std::min(x0, x1));
    const double top = sy(std::max(y0, y1));
    body_ += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(std::abs(sx(x1) - sx(x0)) + 0.3) +
             "\" height=\"" + num(std::abs(sy(y1) - sy(y0)) + 0.3) + "\" fill=\"" + to_hex(color) + "\"/>\n";
}

void SvgPlot::vline(double x, Rgb color, bool dashed)
{
    polyline({x, x}, {y_min_, y_max_}, color, 1.2, dashed);
}

void SvgPlot::legend(const std::string& text, Rgb color)
{
    legend_.emplace_back(text, color);
}

void SvgPlot::save(const std::string& path) const
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    const double x0 = margin_left;
    const double x1 = width_ - margin_right;
    const double y0 = margin_top;
    const double y1 = height_ - margin_bottom;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_ << "\" height=\"" << height_
        << "\" font-family=\"sans-serif\" font-size=\"13\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<svg x=\"" << x0 << "\" y=\"" << y0 << "\" width=\"" << x1 - x0 << "\" height=\"" << y1 - y0
        << "\" viewBox=\"" << x0 << ' ' << y0 << ' ' << x1 - x0 << ' ' << y1 - y0 << "\">\n"
        << body_ << "</svg>\n";
    out << "<rect x=\"" << x0 << "\" y=\"" << y0 << "\" width=\"" << x1 - x0 << "\" height=\"" << y1 - y0
        << "\" fill=\"none\" stroke=\"black\"/>\n";

    const double xs = nice_step(x_max_ - x_min_);
    for (double v = std::ceil(x_min_ / xs) * xs; v <= x_max_ + 1e-9 * xs; v += xs) {
        const double px = sx(v);
        out << "<line x1=\"" << num(px) << "\" y1=\"" << y1 << "\" x2=\"" << num(px) << "\" y2=\"" << y1 + 5
            << "\" stroke=\"black\"/>\n<text x=\"" << num(px) << "\" y=\"" << y1 + 20 << "\" text-anchor=\"middle\">"
            << (std::abs(v) < 1e-12 * xs ? 0.0 : v) << "</text>\n";
    }
    const double ys = nice_step(y_max_ - y_min_);
    for (double v = std::ceil(y_min_ / ys) * ys; v <= y_max_ + 1e-9 * ys; v += ys) {
        const double py = sy(v);
        out << "<line x1=\"" << x0 - 5 << "\" y1=\"" << num(py) << "\" x2=\"" << x0 << "\" y2=\"" << num(py)
            << "\" stroke=\"black\"/>\n<text x=\"" << x0 - 8 << "\" y=\"" << num(py + 4) << "\" text-anchor=\"end\">"
            << (std::abs(v) < 1e-12 * ys ? 0.0 : v) << "</text>\n";
    }
    out << "<text x=\"" << width_ / 2 << "\" y=\"" << 28 << "\" text-anchor=\"middle\" font-size=\"16\">"
        << escape(title_) << "</text>\n";
    out << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << height_ - 15 << "\" text-anchor=\"middle\">"
        << escape(x_label_) << "</text>\n";
    out << "<text transform=\"translate(20," << (y0 + y1) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
        << escape(y_label_) << "</text>\n";
    double ly = y0 + 18;
    for (const auto& [text, color] : legend_) {
        out << "<rect x=\"" << x1 - 190 << "\" y=\"" << ly - 10 << "\" width=\"12\" height=\"12\" fill=\""
            << to_hex(color) << "\"/>\n<text x=\"" << x1 - 172 << "\" y=\"" << ly << "\">" << escape(text)
            << "</text>\n";
        ly += 18;
    }
    out << "</svg>\n";
}

} // namespace oploc::plot
