#include "lungcam/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "lungcam/rng.hpp"

namespace lungcam::nn {

double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    return std::abs(analytic - numeric) / denom;
}

namespace {

double weighted_output(const Network<double>& net, const Tensor<double>& input, const Tensor<double>& weights) {
    Workspace<double> ws;
    const auto& out = net.forward(ws, input);
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * weights[i];
    return s;
}

}  // namespace

GradcheckResult gradcheck_network(Network<double> net, const Tensor<double>& input_in, std::uint64_t seed, double eps) {
    Tensor<double> input = input_in;
    Rng rng(mix_seed(seed, 0x6C5));
    Workspace<double> ws;
    const auto& out = net.forward(ws, input);
    Tensor<double> weights(out.shape());
    for (auto& v : weights.vec()) v = rng.normal();
    net.backward(ws, weights);
    const auto analytic_params = ws.param_grads;
    const auto analytic_input = ws.grads[0];

    GradcheckResult r;
    auto probe = [&](double& slot, double analytic) {
        const double saved = slot;
        slot = saved + eps;
        const double up = weighted_output(net, input, weights);
        slot = saved - eps;
        const double down = weighted_output(net, input, weights);
        slot = saved;
        const double numeric = (up - down) / (2.0 * eps);
        r.max_rel_error = std::max(r.max_rel_error, relative_error(analytic, numeric));
        ++r.checked;
    };
    for (std::size_t p = 0; p < net.params().size(); ++p)
        for (std::size_t i = 0; i < net.params()[p].value.size(); ++i) probe(net.params()[p].value[i], analytic_params[p][i]);
    for (std::size_t i = 0; i < input.size(); ++i) probe(input.vec()[i], analytic_input[i]);
    return r;
}

GradcheckResult gradcheck_layer(LayerKind kind, std::uint64_t seed, UpsampleMode mode) {
    Rng rng(seed);
    int c = 2, h = 4, w = 4;
    if (kind == LayerKind::Upsample) h = w = 3;
    NetworkBuilder b(c, h, w);
    std::string label = to_string(kind);
    switch (kind) {
        case LayerKind::Input:
        case LayerKind::ReLU:
            b.relu(b.input());
            break;
        case LayerKind::Conv:
            b.conv(b.conv(b.input(), 3, 3), 2, 1);
            break;
        case LayerKind::MaxPool:
            b.maxpool(b.input());
            break;
        case LayerKind::Upsample:
            b.upsample(b.input(), mode);
            label += mode == UpsampleMode::Bilinear ? "-bilinear" : "-nearest";
            break;
        case LayerKind::Add:
            b.add(b.conv(b.input(), c, 1), b.input());
            break;
        case LayerKind::Concat:
            b.concat(b.conv(b.input(), 3, 1), b.input());
            break;
        case LayerKind::GlobalAvgPool:
            b.global_avg_pool(b.input());
            break;
        case LayerKind::Dense:
            b.dense(b.input(), 3);
            break;
        case LayerKind::Sigmoid:
            b.sigmoid(b.input());
            break;
    }
    auto net = b.build<double>(mix_seed(seed, 1));
    for (auto& p : net.params())
        for (auto& v : p.value) v = rng.normal(0.0, 0.5);

    Tensor<double> input({2, c, h, w});
    if (kind == LayerKind::MaxPool) {
        // distinct values at least 0.01 apart so a 1e-4 probe never swaps the winner
        std::vector<double> vals(input.size());
        for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = 0.01 * static_cast<double>(i) - 0.3;
        rng.shuffle(vals.begin(), vals.end());
        input.vec() = vals;
    } else if (kind == LayerKind::ReLU || kind == LayerKind::Input) {
        // keep inputs away from the kink at zero
        for (auto& v : input.vec()) {
            const double n = rng.normal();
            v = (n < 0 ? -1.0 : 1.0) * (0.05 + std::abs(n));
        }
    } else {
        for (auto& v : input.vec()) v = rng.normal();
    }
    auto r = gradcheck_network(std::move(net), input, seed);
    r.label = label;
    return r;
}

std::vector<GradcheckResult> gradcheck_all_layers(int trials, std::uint64_t base_seed) {
    struct Case {
        LayerKind kind;
        UpsampleMode mode;
    };
    const std::vector<Case> cases = {
        {LayerKind::Conv, UpsampleMode::Nearest},      {LayerKind::ReLU, UpsampleMode::Nearest},
        {LayerKind::MaxPool, UpsampleMode::Nearest},   {LayerKind::Upsample, UpsampleMode::Nearest},
        {LayerKind::Upsample, UpsampleMode::Bilinear}, {LayerKind::Add, UpsampleMode::Nearest},
        {LayerKind::Concat, UpsampleMode::Nearest},    {LayerKind::GlobalAvgPool, UpsampleMode::Nearest},
        {LayerKind::Dense, UpsampleMode::Nearest},     {LayerKind::Sigmoid, UpsampleMode::Nearest},
    };
    std::vector<GradcheckResult> out;
    for (const auto& c : cases) {
        GradcheckResult agg;
        for (int t = 0; t < trials; ++t) {
            const auto r = gradcheck_layer(c.kind, mix_seed(base_seed, static_cast<std::uint64_t>(t)), c.mode);
            agg.label = r.label;
            agg.max_rel_error = std::max(agg.max_rel_error, r.max_rel_error);
            agg.checked += r.checked;
        }
        out.push_back(agg);
    }
    return out;
}

}  // namespace lungcam::nn
