#include "lungcam/nn/adam.hpp"

#include <cmath>

#include "lungcam/error.hpp"

namespace lungcam::nn {

AdamState::AdamState(AdamConfig config, const std::vector<std::size_t>& sizes) : cfg(config) {
    for (auto n : sizes) {
        m.emplace_back(n, 0.0);
        v.emplace_back(n, 0.0);
    }
}

template <typename T>
void adam_step(AdamState& state, std::vector<std::span<T>> params, const std::vector<std::vector<T>>& grads) {
    if (params.size() != grads.size() || params.size() != state.m.size()) {
        throw ShapeError("adam_step: parameter, gradient and state counts differ");
    }
    for (std::size_t p = 0; p < params.size(); ++p) {
        if (params[p].size() != grads[p].size() || params[p].size() != state.m[p].size()) {
            throw ShapeError("adam_step: shape mismatch in parameter " + std::to_string(p));
        }
    }
    const auto& c = state.cfg;
    const auto t = static_cast<double>(state.step + 1);
    const double bc1 = 1.0 - std::pow(c.beta1, t);
    const double bc2 = 1.0 - std::pow(c.beta2, t);
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto& m = state.m[p];
        auto& v = state.v[p];
        for (std::size_t i = 0; i < m.size(); ++i) {
            const double g = static_cast<double>(grads[p][i]);
            m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
            v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            params[p][i] = static_cast<T>(static_cast<double>(params[p][i]) - c.lr * m_hat / (std::sqrt(v_hat) + c.eps));
        }
    }
    ++state.step;
}

template void adam_step<float>(AdamState&, std::vector<std::span<float>>, const std::vector<std::vector<float>>&);
template void adam_step<double>(AdamState&, std::vector<std::span<double>>, const std::vector<std::vector<double>>&);

}  // namespace lungcam::nn
