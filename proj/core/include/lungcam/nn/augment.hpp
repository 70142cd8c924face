#pragma once

#include "lungcam/image.hpp"
#include "lungcam/rng.hpp"

namespace lungcam::nn {

struct AugmentConfig {
    double p_rotate = 0.5;
    double max_degrees = 15.0;
    double p_flip = 0.5;
    double p_crop = 0.5;
    double crop_ratio = 0.9;
};

/// Concrete random choices for one augmentation; applying a plan is pure.
struct AugmentPlan {
    bool rotate = false;
    double degrees = 0.0;
    bool flip = false;
    bool crop = false;
    int crop_x = 0;
    int crop_y = 0;
    int crop_size = 0;

    bool is_identity() const { return !rotate && !flip && !crop; }
};

AugmentPlan draw_augment_plan(Rng& rng, int image_size, const AugmentConfig& cfg = {});

/// Rotation (bilinear, zero fill), then horizontal flip, then crop and
/// bilinear resize back to the input size.
Image apply_augment(const Image& img, const AugmentPlan& plan);

/// Draws a plan and applies it. Requires a square image.
Image augment(const Image& img, Rng& rng, const AugmentConfig& cfg = {});

}  // namespace lungcam::nn
