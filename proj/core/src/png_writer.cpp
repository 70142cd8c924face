#include "lungcam/png_writer.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "lungcam/error.hpp"
#include "lungcam/files.hpp"

namespace lungcam {

Canvas::Canvas(int width, int height, Rgb background) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) throw ArgumentError("canvas size must be positive");
    rgb_.resize(static_cast<std::size_t>(width) * height * 3);
    for (std::size_t i = 0; i < rgb_.size(); i += 3) std::copy(background.begin(), background.end(), rgb_.begin() + i);
}

Rgb Canvas::pixel(int x, int y) const {
    const auto i = (static_cast<std::size_t>(y) * width_ + x) * 3;
    return {rgb_[i], rgb_[i + 1], rgb_[i + 2]};
}

void Canvas::set(int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= width_ || y >= height_) return;
    const auto i = (static_cast<std::size_t>(y) * width_ + x) * 3;
    std::copy(c.begin(), c.end(), rgb_.begin() + i);
}

void Canvas::blend(int x, int y, Rgb c, double alpha) {
    if (x < 0 || y < 0 || x >= width_ || y >= height_) return;
    const auto i = (static_cast<std::size_t>(y) * width_ + x) * 3;
    for (int k = 0; k < 3; ++k) {
        const double v = (1.0 - alpha) * rgb_[i + k] + alpha * c[k];
        rgb_[i + k] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
}

void Canvas::line(int x0, int y0, int x1, int y1, Rgb c) {
    const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
        set(x0, y0, c);
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) err += dy, x0 += sx;
        if (e2 <= dx) err += dx, y0 += sy;
    }
}

void Canvas::fill_rect(int x0, int y0, int x1, int y1, Rgb c) {
    if (x0 > x1) std::swap(x0, x1);
    if (y0 > y1) std::swap(y0, y1);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) set(x, y, c);
}

void Canvas::rect(int x0, int y0, int x1, int y1, Rgb c) {
    line(x0, y0, x1, y0, c);
    line(x1, y0, x1, y1, c);
    line(x1, y1, x0, y1, c);
    line(x0, y1, x0, y0, c);
}

void Canvas::disc(int cx, int cy, int r, Rgb c) {
    for (int y = -r; y <= r; ++y)
        for (int x = -r; x <= r; ++x)
            if (x * x + y * y <= r * r) set(cx + x, cy + y, c);
}

void Canvas::square(int cx, int cy, int r, Rgb c) { fill_rect(cx - r, cy - r, cx + r, cy + r, c); }

void Canvas::cross(int cx, int cy, int r, Rgb c) {
    line(cx - r, cy - r, cx + r, cy + r, c);
    line(cx - r, cy + r, cx + r, cy - r, c);
}

namespace {

void append_bytes(png_structp png, png_bytep data, png_size_t length) {
    auto* out = static_cast<std::string*>(png_get_io_ptr(png));
    out->append(reinterpret_cast<const char*>(data), length);
}

void flush_nothing(png_structp) {}

}  // namespace

std::string encode_png(const Canvas& canvas) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng: cannot create write struct");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng: cannot create info struct");
    }
    std::string out;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng: encoding failed");
    }
    png_set_write_fn(png, &out, append_bytes, flush_nothing);
    png_set_IHDR(png, info, canvas.width(), canvas.height(), 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const auto& bytes = canvas.bytes();
    for (int y = 0; y < canvas.height(); ++y) {
        png_write_row(png, const_cast<png_bytep>(bytes.data() + static_cast<std::size_t>(y) * canvas.width() * 3));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

void write_png(const std::filesystem::path& path, const Canvas& canvas) { write_file_atomic(path, encode_png(canvas)); }

namespace {

// Black -> red -> yellow -> white ramp.
Rgb heat_color(double v) {
    v = std::clamp(v, 0.0, 1.0);
    const auto ch = [](double t) { return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(t, 0.0, 1.0))); };
    return {ch(3.0 * v), ch(3.0 * v - 1.0), ch(3.0 * v - 2.0)};
}

}  // namespace

Canvas render_overlay(const Image& gray, const Image* heat, int zoom) {
    if (zoom < 1) throw ArgumentError("render_overlay: zoom must be >= 1");
    if (heat && (heat->width() != gray.width() || heat->height() != gray.height())) {
        throw ShapeError("render_overlay: heat map size differs from the image");
    }
    Canvas c(gray.width() * zoom, gray.height() * zoom);
    for (int y = 0; y < gray.height(); ++y)
        for (int x = 0; x < gray.width(); ++x) {
            const auto g = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp<double>(gray.at(x, y), 0.0, 1.0)));
            for (int dy = 0; dy < zoom; ++dy)
                for (int dx = 0; dx < zoom; ++dx) {
                    c.set(x * zoom + dx, y * zoom + dy, {g, g, g});
                    if (heat) c.blend(x * zoom + dx, y * zoom + dy, heat_color(heat->at(x, y)), 0.6 * std::clamp<double>(heat->at(x, y), 0.0, 1.0));
                }
        }
    return c;
}

}  // namespace lungcam
