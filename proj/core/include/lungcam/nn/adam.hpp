#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace lungcam::nn {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// First/second moment accumulators for a fixed list of parameter tensors.
struct AdamState {
    AdamConfig cfg;
    std::int64_t step = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;

    AdamState() = default;
    AdamState(AdamConfig config, const std::vector<std::size_t>& sizes);
};

/// One bias-corrected Adam update; increments state.step. Throws ShapeError
/// when params, grads and the state disagree in layout.
template <typename T>
void adam_step(AdamState& state, std::vector<std::span<T>> params, const std::vector<std::vector<T>>& grads);

}  // namespace lungcam::nn
