#pragma once

#include <string>
#include <vector>

namespace oploc::plot {

struct Rgb {
    int r = 0;
    int g = 0;
    int b = 0;
};

std::string to_hex(Rgb c);

/// Diverging map: cool blue for -limit, white at 0, warm red for +limit;
/// values beyond the limit are clipped.
Rgb diverging(double value, double limit);
/// White to dark blue for [0, 1].
Rgb sequential(double value);
/// Distinct colours for small integer labels (winding numbers, groups).
Rgb categorical(int index);

/// Minimal 2-D chart written as SVG: axes with ticks, markers, polylines
/// and filled cells, all in data coordinates.
class SvgPlot {
public:
    SvgPlot(std::string title, std::string x_label, std::string y_label, int width = 900, int height = 700);

    void set_range(double x_min, double x_max, double y_min, double y_max);
    void point(double x, double y, Rgb color, double radius = 1.2);
    void polyline(const std::vector<double>& x, const std::vector<double>& y, Rgb color, double stroke = 1.2,
                  bool dashed = false);
    void cell(double x0, double y0, double x1, double y1, Rgb color);
    void vline(double x, Rgb color, bool dashed = true);
    void legend(const std::string& text, Rgb color);

    void save(const std::string& path) const;

private:
    double sx(double x) const;
    double sy(double y) const;

    std::string title_;
    std::string x_label_;
    std::string y_label_;
    int width_;
    int height_;
    double x_min_ = 0.0, x_max_ = 1.0, y_min_ = 0.0, y_max_ = 1.0;
    std::string body_;
    std::vector<std::pair<std::string, Rgb>> legend_;
};

} // namespace oploc::plot
