#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lungcam/image.hpp"

namespace lungcam {

using Rgb = std::array<std::uint8_t, 3>;

/// 8-bit RGB raster with simple drawing primitives for report plots.
class Canvas {
public:
    Canvas(int width, int height, Rgb background = {255, 255, 255});

    int width() const { return width_; }
    int height() const { return height_; }
    Rgb pixel(int x, int y) const;

    void set(int x, int y, Rgb c);  // ignores out-of-bounds pixels
    void blend(int x, int y, Rgb c, double alpha);
    void line(int x0, int y0, int x1, int y1, Rgb c);
    void fill_rect(int x0, int y0, int x1, int y1, Rgb c);
    void rect(int x0, int y0, int x1, int y1, Rgb c);
    void disc(int cx, int cy, int r, Rgb c);
    void square(int cx, int cy, int r, Rgb c);
    void cross(int cx, int cy, int r, Rgb c);

    const std::vector<std::uint8_t>& bytes() const { return rgb_; }

private:
    int width_, height_;
    std::vector<std::uint8_t> rgb_;
};

/// PNG encoding of the canvas (8-bit RGB, no interlace).
std::string encode_png(const Canvas& canvas);
void write_png(const std::filesystem::path& path, const Canvas& canvas);

/// Grayscale rendering of a [0,1] image with an optional heat overlay
/// (alpha-blended, transparent where the overlay is 0), scaled by `zoom`.
Canvas render_overlay(const Image& gray, const Image* heat = nullptr, int zoom = 4);

}  // namespace lungcam
