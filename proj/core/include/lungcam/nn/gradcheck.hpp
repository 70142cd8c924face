#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lungcam/nn/network.hpp"

namespace lungcam::nn {

/// Central-difference derivative check of Network::backward.
struct GradcheckResult {
    std::string label;
    double max_rel_error = 0.0;
    std::size_t checked = 0;
};

/// Relative error |a - n| / max(|a|, |n|, 1e-6).
double relative_error(double analytic, double numeric);

/// Compares backprop against central differences (step `eps`) for the
/// scalar loss sum(R * output), R a fixed random tensor. Checks every input
/// element and every parameter.
GradcheckResult gradcheck_network(Network<double> net, const Tensor<double>& input, std::uint64_t seed,
                                  double eps = 1e-4);

/// Builds a small single-layer harness for `kind` with random input data
/// (`seed`) and checks it.
GradcheckResult gradcheck_layer(LayerKind kind, std::uint64_t seed, UpsampleMode mode = UpsampleMode::Nearest);

/// Every layer kind (both upsample modes) over `trials` seeds.
std::vector<GradcheckResult> gradcheck_all_layers(int trials, std::uint64_t base_seed);

}  // namespace lungcam::nn
