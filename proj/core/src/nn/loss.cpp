#include "lungcam/nn/loss.hpp"

#include <algorithm>
#include <cmath>

#include "lungcam/error.hpp"

namespace lungcam::nn {

LossResult bce_loss(std::span<const double> pred, std::span<const std::uint8_t> label) {
    if (pred.size() != label.size()) throw ShapeError("bce_loss: prediction and label counts differ");
    if (pred.empty()) throw ArgumentError("bce_loss: empty batch");
    LossResult r;
    r.grad.resize(pred.size());
    const double n = static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double p = std::clamp(pred[i], kProbClamp, 1.0 - kProbClamp);
        const double y = label[i] ? 1.0 : 0.0;
        r.loss -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
        r.grad[i] = (p - y) / (p * (1.0 - p)) / n;
    }
    r.loss /= n;
    return r;
}

LossResult soft_dice_loss(std::span<const double> pred, std::span<const double> target, int samples) {
    if (pred.size() != target.size()) throw ShapeError("soft_dice_loss: prediction and target sizes differ");
    if (samples <= 0 || pred.size() % samples != 0) throw ShapeError("soft_dice_loss: bad sample count");
    const std::size_t len = pred.size() / samples;
    LossResult r;
    r.grad.resize(pred.size());
    for (int s = 0; s < samples; ++s) {
        const std::size_t off = s * len;
        double inter = 0.0, sp = 0.0, sg = 0.0;
        for (std::size_t j = 0; j < len; ++j) {
            inter += pred[off + j] * target[off + j];
            sp += pred[off + j];
            sg += target[off + j];
        }
        const double num = 2.0 * inter + 1.0;
        const double den = sp + sg + 1.0;
        r.loss += 1.0 - num / den;
        for (std::size_t j = 0; j < len; ++j) {
            const double dd = (2.0 * target[off + j] * den - num) / (den * den);
            r.grad[off + j] = -dd / samples;
        }
    }
    r.loss /= samples;
    return r;
}

}  // namespace lungcam::nn
