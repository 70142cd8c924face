#include "lungcam/nn/augment.hpp"

#include <cmath>

#include "lungcam/error.hpp"

namespace lungcam::nn {

AugmentPlan draw_augment_plan(Rng& rng, int image_size, const AugmentConfig& cfg) {
    // Every draw is consumed unconditionally so the stream position does not
    // depend on which branches fire.
    AugmentPlan plan;
    plan.rotate = rng.bernoulli(cfg.p_rotate);
    plan.degrees = rng.uniform(-cfg.max_degrees, cfg.max_degrees);
    plan.flip = rng.bernoulli(cfg.p_flip);
    plan.crop = rng.bernoulli(cfg.p_crop);
    plan.crop_size = std::max(1, static_cast<int>(std::lround(cfg.crop_ratio * image_size)));
    const int slack = image_size - plan.crop_size;
    plan.crop_x = rng.between(0, std::max(0, slack));
    plan.crop_y = rng.between(0, std::max(0, slack));
    if (!plan.rotate) plan.degrees = 0.0;
    return plan;
}

Image apply_augment(const Image& img, const AugmentPlan& plan) {
    Image out = img;
    if (plan.rotate) out = rotate(out, plan.degrees, 0.0f);
    if (plan.flip) out = flip_horizontal(out);
    if (plan.crop) {
        out = crop(out, plan.crop_x, plan.crop_y, plan.crop_x + plan.crop_size, plan.crop_y + plan.crop_size);
        out = resize_bilinear(out, img.width(), img.height());
    }
    return out;
}

Image augment(const Image& img, Rng& rng, const AugmentConfig& cfg) {
    if (img.width() != img.height()) throw ArgumentError("augment expects a square image");
    return apply_augment(img, draw_augment_plan(rng, img.width(), cfg));
}

}  // namespace lungcam::nn
