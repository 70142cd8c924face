#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace lungcam::nn {

inline constexpr double kProbClamp = 1e-7;

struct LossResult {
    double loss = 0.0;
    std::vector<double> grad;  // d loss / d prediction, one per element
};

/// Mean binary cross-entropy over the batch. Predictions are clamped to
/// [1e-7, 1 - 1e-7] before evaluation.
LossResult bce_loss(std::span<const double> pred, std::span<const std::uint8_t> label);

/// Mean over samples of 1 - soft Dice, with smoothing 1:
///   dice = (2 sum(p g) + 1) / (sum(p) + sum(g) + 1).
/// `pred` and `target` hold `samples` equal-length blocks.
LossResult soft_dice_loss(std::span<const double> pred, std::span<const double> target, int samples);

}  // namespace lungcam::nn
