#pragma once

#include <filesystem>

#include "lungcam/kv_text.hpp"
#include "lungcam/nn/network.hpp"

namespace lungcam::nn {

/// Writes `<path>` (text manifest: layer list, shapes, seed, plus `extra`
/// keys) and the sibling `.weights` payload (little-endian float32, params
/// in manifest order).
void save_model(const std::filesystem::path& path, const Network<float>& net, const KeyValueText& extra = {});

struct LoadedModel {
    Network<float> net;
    KeyValueText manifest;
};

LoadedModel load_model(const std::filesystem::path& path);

/// SHA-256 over every parameter's bytes, in order.
std::string weights_digest(const Network<float>& net);

}  // namespace lungcam::nn
