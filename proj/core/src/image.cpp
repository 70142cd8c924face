#include "lungcam/image.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lungcam/error.hpp"

namespace lungcam {

Image::Image(int width, int height, float fill) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) throw ArgumentError("image dimensions must be positive");
    pixels_.assign(static_cast<std::size_t>(width) * height, fill);
}

Image::Image(int width, int height, std::vector<float> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (width <= 0 || height <= 0) throw ArgumentError("image dimensions must be positive");
    if (pixels_.size() != static_cast<std::size_t>(width) * height) {
        throw ShapeError("pixel count does not match image dimensions");
    }
}

float Image::min() const { return pixels_.empty() ? 0.0f : *std::min_element(pixels_.begin(), pixels_.end()); }
float Image::max() const { return pixels_.empty() ? 0.0f : *std::max_element(pixels_.begin(), pixels_.end()); }

BilinearTap bilinear_tap(int out_index, int in_size, int out_size) {
    double s = (out_index + 0.5) * static_cast<double>(in_size) / out_size - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(in_size - 1));
    const int i0 = static_cast<int>(std::floor(s));
    const int i1 = std::min(i0 + 1, in_size - 1);
    return {i0, i1, s - i0};
}

Image resize_bilinear(const Image& src, int out_width, int out_height) {
    if (out_width <= 0 || out_height <= 0) throw ArgumentError("resize target must be positive");
    Image out(out_width, out_height);
    std::vector<BilinearTap> xs(out_width);
    for (int x = 0; x < out_width; ++x) xs[x] = bilinear_tap(x, src.width(), out_width);
    for (int y = 0; y < out_height; ++y) {
        const auto ty = bilinear_tap(y, src.height(), out_height);
        for (int x = 0; x < out_width; ++x) {
            const auto& tx = xs[x];
            const double top = (1.0 - tx.w1) * src.at(tx.i0, ty.i0) + tx.w1 * src.at(tx.i1, ty.i0);
            const double bottom = (1.0 - tx.w1) * src.at(tx.i0, ty.i1) + tx.w1 * src.at(tx.i1, ty.i1);
            out.at(x, y) = static_cast<float>((1.0 - ty.w1) * top + ty.w1 * bottom);
        }
    }
    return out;
}

Image resize_nearest(const Image& src, int out_width, int out_height) {
    if (out_width <= 0 || out_height <= 0) throw ArgumentError("resize target must be positive");
    Image out(out_width, out_height);
    for (int y = 0; y < out_height; ++y) {
        const int sy = std::min(src.height() - 1, static_cast<int>((y + 0.5) * src.height() / out_height));
        for (int x = 0; x < out_width; ++x) {
            const int sx = std::min(src.width() - 1, static_cast<int>((x + 0.5) * src.width() / out_width));
            out.at(x, y) = src.at(sx, sy);
        }
    }
    return out;
}

Image flip_horizontal(const Image& src) {
    Image out(src.width(), src.height());
    for (int y = 0; y < src.height(); ++y)
        for (int x = 0; x < src.width(); ++x) out.at(x, y) = src.at(src.width() - 1 - x, y);
    return out;
}

Image rotate(const Image& src, double degrees, float fill) {
    const double theta = degrees * std::numbers::pi / 180.0;
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    const double cx = (src.width() - 1) / 2.0;
    const double cy = (src.height() - 1) / 2.0;
    auto sample = [&](int x, int y) -> double {
        if (x < 0 || y < 0 || x >= src.width() || y >= src.height()) return fill;
        return src.at(x, y);
    };
    Image out(src.width(), src.height());
    for (int y = 0; y < src.height(); ++y) {
        for (int x = 0; x < src.width(); ++x) {
            // inverse mapping: rotate the output coordinate back by -theta
            const double dx = x - cx;
            const double dy = y - cy;
            const double sx = c * dx - s * dy + cx;
            const double sy = s * dx + c * dy + cy;
            const int x0 = static_cast<int>(std::floor(sx));
            const int y0 = static_cast<int>(std::floor(sy));
            const double wx = sx - x0;
            const double wy = sy - y0;
            const double top = (1.0 - wx) * sample(x0, y0) + wx * sample(x0 + 1, y0);
            const double bottom = (1.0 - wx) * sample(x0, y0 + 1) + wx * sample(x0 + 1, y0 + 1);
            out.at(x, y) = static_cast<float>((1.0 - wy) * top + wy * bottom);
        }
    }
    return out;
}

Image crop(const Image& src, int x0, int y0, int x1, int y1) {
    if (x0 < 0 || y0 < 0 || x1 > src.width() || y1 > src.height() || x0 >= x1 || y0 >= y1) {
        throw ArgumentError("crop rectangle outside image or degenerate");
    }
    Image out(x1 - x0, y1 - y0);
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) out.at(x - x0, y - y0) = src.at(x, y);
    return out;
}

}  // namespace lungcam
