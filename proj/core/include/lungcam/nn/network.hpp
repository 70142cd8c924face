#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lungcam/nn/tensor.hpp"

namespace lungcam::nn {

enum class LayerKind { Input, Conv, ReLU, MaxPool, Upsample, Add, Concat, GlobalAvgPool, Dense, Sigmoid };
enum class UpsampleMode { Nearest, Bilinear };

std::string to_string(LayerKind kind);
LayerKind parse_layer_kind(const std::string& text);

/// One node of the layer list. Nodes are stored in topological order and
/// refer to earlier nodes by index.
struct LayerSpec {
    LayerKind kind = LayerKind::Input;
    std::vector<int> inputs;
    int out_channels = 0;  // Conv, Dense
    int kernel = 0;        // Conv: 1 or 3 (odd, same padding)
    UpsampleMode mode = UpsampleMode::Nearest;
    std::string name;      // capture point / lookup name; unique when set

    // Derived at build time.
    int c = 0, h = 0, w = 0;  // per-sample output shape
    int param = -1;           // index of the weight param; bias is param + 1

    bool operator==(const LayerSpec&) const = default;
};

template <typename T>
struct Param {
    std::string name;
    std::vector<T> value;

    bool operator==(const Param&) const = default;
};

/// Forward activation and its gradient for one named node.
template <typename T>
struct Capture {
    Tensor<T> activation;
    Tensor<T> gradient;
};

template <typename T>
using CaptureRecord = std::map<std::string, Capture<T>>;

/// Per-call scratch state: node outputs, node gradients, parameter gradients
/// and captures. Networks are immutable during forward/backward, so concurrent
/// calls only need separate workspaces.
template <typename T>
struct Workspace {
    std::vector<Tensor<T>> outputs;
    std::vector<Tensor<T>> grads;
    std::vector<std::vector<std::uint32_t>> argmax;  // max-pool winners per node
    std::vector<std::vector<T>> param_grads;
    std::vector<T> col;  // im2col scratch
    CaptureRecord<T> captures;
    std::vector<std::string> capture_names;
    bool forward_done = false;
    bool backward_done = false;

    const Tensor<T>& output() const { return outputs.back(); }
};

template <typename T>
class Network {
public:
    Network() = default;
    Network(int in_channels, int in_h, int in_w, std::vector<LayerSpec> layers, std::vector<Param<T>> params,
            std::uint64_t seed);

    int input_channels() const { return layers_.front().c; }
    int input_height() const { return layers_.front().h; }
    int input_width() const { return layers_.front().w; }
    std::uint64_t seed() const { return seed_; }

    const std::vector<LayerSpec>& layers() const { return layers_; }
    std::vector<Param<T>>& params() { return params_; }
    const std::vector<Param<T>>& params() const { return params_; }
    std::size_t parameter_count() const;

    /// Index of the node named `name`; throws ArgumentError if none.
    int node_index(const std::string& name) const;
    bool has_node(const std::string& name) const;
    Shape4 node_shape(int node, int batch) const;

    /// Runs the network on `batch` (N x C x H x W matching the input spec).
    /// Activations of the nodes named in `capture` are copied into ws.captures.
    const Tensor<T>& forward(Workspace<T>& ws, const Tensor<T>& batch,
                             const std::vector<std::string>& capture = {}) const;

    /// Backpropagates `grad` from the node named `from` (default: the output
    /// node). Overwrites ws.param_grads and fills capture gradients.
    void backward(Workspace<T>& ws, const Tensor<T>& grad, const std::string& from = {}) const;

    std::vector<std::span<T>> param_spans();

    template <typename U>
    Network<U> cast() const {
        std::vector<Param<U>> p;
        p.reserve(params_.size());
        for (const auto& src : params_) p.push_back({src.name, std::vector<U>(src.value.begin(), src.value.end())});
        return Network<U>(input_channels(), input_height(), input_width(), layers_, std::move(p), seed_);
    }

    bool operator==(const Network&) const = default;

private:
    void validate_input(const Tensor<T>& batch) const;

    std::vector<LayerSpec> layers_;
    std::vector<Param<T>> params_;
    std::uint64_t seed_ = 0;
};

/// Incremental construction of a Network. Each call appends a node and
/// returns its index.
class NetworkBuilder {
public:
    NetworkBuilder(int in_channels, int in_h, int in_w);

    int input() const { return 0; }
    int conv(int in, int out_channels, int kernel = 3);
    int relu(int in);
    int maxpool(int in);
    int upsample(int in, UpsampleMode mode = UpsampleMode::Nearest);
    int add(int a, int b);
    int concat(int a, int b);
    int global_avg_pool(int in);
    int dense(int in, int out_features);
    int sigmoid(int in);

    /// Names a node so it can be captured or used as a backward source.
    NetworkBuilder& name(int node, const std::string& name);

    const std::vector<LayerSpec>& layers() const { return layers_; }

    /// He-uniform weights (bound sqrt(6 / fan_in)), zero biases, seeded.
    template <typename T>
    Network<T> build(std::uint64_t seed) const;

private:
    int push(LayerSpec spec);
    const LayerSpec& node(int i) const;

    int in_c_, in_h_, in_w_;
    std::vector<LayerSpec> layers_;
};

/// Resolves derived fields (shapes, param slots) and checks shape chaining.
/// Returns the parameter layout as (name, size) pairs.
std::vector<std::pair<std::string, std::size_t>> resolve_layers(std::vector<LayerSpec>& layers, int in_c, int in_h,
                                                                  int in_w);

extern template class Network<float>;
extern template class Network<double>;

}  // namespace lungcam::nn
