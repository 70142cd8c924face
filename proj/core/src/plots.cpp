#include "lungcam/plots.hpp"

#include <algorithm>
#include <cmath>

#include "lungcam/error.hpp"

namespace lungcam {

namespace {

constexpr Rgb kAxis{40, 40, 40};
constexpr Rgb kGrid{220, 220, 220};
constexpr Rgb kBlue{31, 119, 180};
constexpr Rgb kPalette[] = {{31, 119, 180}, {255, 127, 14}, {44, 160, 44}, {214, 39, 40},
                            {148, 103, 189}, {140, 86, 75}, {227, 119, 194}, {127, 127, 127}};
constexpr int kMargin = 24;

struct Frame {
    int x0, y0, x1, y1;  // plot area in pixels, y0 at the top
    double lo_x, hi_x, lo_y, hi_y;

    int px(double x) const { return x0 + static_cast<int>(std::lround((x - lo_x) / (hi_x - lo_x) * (x1 - x0))); }
    int py(double y) const { return y1 - static_cast<int>(std::lround((y - lo_y) / (hi_y - lo_y) * (y1 - y0))); }
};

Frame make_frame(const Canvas& c, double lo_x, double hi_x, double lo_y, double hi_y) {
    if (!(hi_x > lo_x)) hi_x = lo_x + 1.0;
    if (!(hi_y > lo_y)) hi_y = lo_y + 1.0;
    return {kMargin, kMargin / 2, c.width() - kMargin / 2, c.height() - kMargin, lo_x, hi_x, lo_y, hi_y};
}

void draw_axes(Canvas& c, const Frame& f, int ticks = 4) {
    for (int i = 0; i <= ticks; ++i) {
        const int x = f.x0 + (f.x1 - f.x0) * i / ticks;
        const int y = f.y0 + (f.y1 - f.y0) * i / ticks;
        c.line(x, f.y0, x, f.y1, kGrid);
        c.line(f.x0, y, f.x1, y, kGrid);
        c.line(x, f.y1, x, f.y1 + 4, kAxis);
        c.line(f.x0 - 4, y, f.x0, y, kAxis);
    }
    c.rect(f.x0, f.y0, f.x1, f.y1, kAxis);
}

std::pair<double, double> padded_range(const std::vector<double>& v) {
    if (v.empty()) return {0.0, 1.0};
    auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    const double pad = std::max(1e-9, (*hi - *lo) * 0.05);
    return {*lo - pad, *hi + pad};
}

}  // namespace

Canvas plot_roc(const std::vector<RocPoint>& curve, int size) {
    Canvas c(size, size);
    const Frame f = make_frame(c, 0.0, 1.0, 0.0, 1.0);
    draw_axes(c, f);
    c.line(f.px(0), f.py(0), f.px(1), f.py(1), {160, 160, 160});
    for (std::size_t i = 1; i < curve.size(); ++i) {
        const int ax = f.px(curve[i - 1].fpr), ay = f.py(curve[i - 1].tpr);
        const int bx = f.px(curve[i].fpr), by = f.py(curve[i].tpr);
        c.line(ax, ay, bx, by, kBlue);
        c.line(ax, ay - 1, bx, by - 1, kBlue);
    }
    return c;
}

Canvas plot_boxes(const std::vector<BoxGroup>& groups, int width, int height) {
    if (groups.empty()) throw ArgumentError("plot_boxes: no groups");
    Canvas c(width, height);
    std::vector<double> all;
    for (const auto& g : groups) all.insert(all.end(), g.values.begin(), g.values.end());
    const auto [lo, hi] = padded_range(all);
    const Frame f = make_frame(c, 0.0, static_cast<double>(groups.size()), lo, hi);
    draw_axes(c, f);
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const auto& v = groups[gi].values;
        if (v.empty()) continue;
        const Rgb col = kPalette[gi % std::size(kPalette)];
        const int cx = f.px(static_cast<double>(gi) + 0.5);
        const int half = (f.x1 - f.x0) / static_cast<int>(groups.size()) / 4;
        const double q1 = quantile(v, 0.25), q2 = quantile(v, 0.5), q3 = quantile(v, 0.75);
        const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
        c.line(cx, f.py(*mn), cx, f.py(*mx), kAxis);
        c.line(cx - half / 2, f.py(*mn), cx + half / 2, f.py(*mn), kAxis);
        c.line(cx - half / 2, f.py(*mx), cx + half / 2, f.py(*mx), kAxis);
        c.fill_rect(cx - half, f.py(q3), cx + half, f.py(q1), col);
        c.rect(cx - half, f.py(q3), cx + half, f.py(q1), kAxis);
        c.fill_rect(cx - half, f.py(q2) - 1, cx + half, f.py(q2) + 1, kAxis);
        for (double x : v) c.disc(cx + half + 6, f.py(x), 2, kAxis);
    }
    return c;
}

Canvas plot_scatter(const std::vector<double>& xy, const std::vector<int>& cluster, const std::vector<int>& marker,
                    int size) {
    const std::size_t n = xy.size() / 2;
    if (xy.size() % 2 != 0 || cluster.size() != n || marker.size() != n) throw ShapeError("plot_scatter: size mismatch");
    Canvas c(size, size);
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < n; ++i) xs.push_back(xy[2 * i]), ys.push_back(xy[2 * i + 1]);
    const auto [lx, hx] = padded_range(xs);
    const auto [ly, hy] = padded_range(ys);
    const Frame f = make_frame(c, lx, hx, ly, hy);
    draw_axes(c, f);
    for (std::size_t i = 0; i < n; ++i) {
        const Rgb col = kPalette[static_cast<std::size_t>(std::max(0, cluster[i])) % std::size(kPalette)];
        const int x = f.px(xs[i]), y = f.py(ys[i]);
        switch (std::max(0, marker[i]) % 3) {
            case 0: c.disc(x, y, 3, col); break;
            case 1: c.square(x, y, 2, col); break;
            default: c.cross(x, y, 3, col); break;
        }
    }
    return c;
}

Canvas plot_curve(const std::vector<double>& y, int highlight, int width, int height) {
    if (y.empty()) throw ArgumentError("plot_curve: empty series");
    Canvas c(width, height);
    const auto [lo, hi] = padded_range(y);
    const Frame f = make_frame(c, 1.0, std::max(2.0, static_cast<double>(y.size())), lo, hi);
    draw_axes(c, f);
    for (std::size_t i = 1; i < y.size(); ++i) {
        c.line(f.px(static_cast<double>(i)), f.py(y[i - 1]), f.px(static_cast<double>(i + 1)), f.py(y[i]), kBlue);
    }
    for (std::size_t i = 0; i < y.size(); ++i) {
        const int r = static_cast<int>(i) + 1 == highlight ? 5 : 2;
        c.disc(f.px(static_cast<double>(i + 1)), f.py(y[i]), r, static_cast<int>(i) + 1 == highlight ? kPalette[3] : kBlue);
    }
    return c;
}

}  // namespace lungcam
