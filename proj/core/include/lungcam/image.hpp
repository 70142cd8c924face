#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace lungcam {

/// Row-major single-channel float image.
class Image {
public:
    Image() = default;
    Image(int width, int height, float fill = 0.0f);
    Image(int width, int height, std::vector<float> pixels);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return pixels_.size(); }
    bool empty() const { return pixels_.empty(); }

    float& at(int x, int y) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
    float at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }

    std::span<float> pixels() { return pixels_; }
    std::span<const float> pixels() const { return pixels_; }

    float min() const;
    float max() const;

    bool operator==(const Image&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<float> pixels_;
};

/// Bilinear resampling with align-corners=false semantics.
///
/// Output pixel (x, y) samples the source at
///   sx = (x + 0.5) * in_w / out_w - 0.5,  sy likewise,
/// with sx, sy clamped to [0, in_w - 1] and [0, in_h - 1]; the four
/// neighbours floor(s) and min(floor(s) + 1, in - 1) are blended linearly.
Image resize_bilinear(const Image& src, int out_width, int out_height);

/// Source index pair and blend weight for one output coordinate of a
/// bilinear resize along one axis.
struct BilinearTap {
    int i0;
    int i1;
    double w1;  // weight of i1; weight of i0 is 1 - w1
};
BilinearTap bilinear_tap(int out_index, int in_size, int out_size);

/// Nearest-neighbour resize (used for binary masks).
Image resize_nearest(const Image& src, int out_width, int out_height);

Image flip_horizontal(const Image& src);

/// Rotates about the image centre by `degrees` (counter-clockwise), bilinear,
/// out-of-frame samples read as `fill`.
Image rotate(const Image& src, double degrees, float fill = 0.0f);

/// Copies the half-open rectangle [x0, x1) x [y0, y1).
Image crop(const Image& src, int x0, int y0, int x1, int y1);

}  // namespace lungcam
