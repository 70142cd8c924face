#include "lungcam/nn/network.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <set>

#include "lungcam/image.hpp"
#include "lungcam/rng.hpp"

namespace lungcam::nn {

std::string to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::Input: return "input";
        case LayerKind::Conv: return "conv";
        case LayerKind::ReLU: return "relu";
        case LayerKind::MaxPool: return "maxpool";
        case LayerKind::Upsample: return "upsample";
        case LayerKind::Add: return "add";
        case LayerKind::Concat: return "concat";
        case LayerKind::GlobalAvgPool: return "gap";
        case LayerKind::Dense: return "dense";
        case LayerKind::Sigmoid: return "sigmoid";
    }
    return "?";
}

LayerKind parse_layer_kind(const std::string& text) {
    for (auto k : {LayerKind::Input, LayerKind::Conv, LayerKind::ReLU, LayerKind::MaxPool, LayerKind::Upsample,
                   LayerKind::Add, LayerKind::Concat, LayerKind::GlobalAvgPool, LayerKind::Dense, LayerKind::Sigmoid}) {
        if (to_string(k) == text) return k;
    }
    throw FormatError("unknown layer kind '" + text + "'");
}

std::vector<std::pair<std::string, std::size_t>> resolve_layers(std::vector<LayerSpec>& layers, int in_c, int in_h,
                                                                  int in_w) {
    if (layers.empty() || layers.front().kind != LayerKind::Input) {
        throw ShapeError("layer list must start with an input node");
    }
    std::vector<std::pair<std::string, std::size_t>> params;
    std::set<std::string> names;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        auto& L = layers[i];
        const std::string where = "layer " + std::to_string(i) + " (" + to_string(L.kind) + ")";
        const std::size_t arity = [&]() -> std::size_t {
            switch (L.kind) {
                case LayerKind::Input: return 0;
                case LayerKind::Add:
                case LayerKind::Concat: return 2;
                default: return 1;
            }
        }();
        if (L.inputs.size() != arity) throw ShapeError(where + ": wrong number of inputs");
        for (int in : L.inputs)
            if (in < 0 || static_cast<std::size_t>(in) >= i) throw ShapeError(where + ": input must be an earlier node");
        if (!L.name.empty() && !names.insert(L.name).second) throw ShapeError(where + ": duplicate name " + L.name);

        auto src = [&](int k) -> const LayerSpec& { return layers[L.inputs[k]]; };
        L.param = -1;
        switch (L.kind) {
            case LayerKind::Input:
                if (i != 0) throw ShapeError(where + ": input must be the first node");
                if (in_c <= 0 || in_h <= 0 || in_w <= 0) throw ShapeError("input shape must be positive");
                L.c = in_c, L.h = in_h, L.w = in_w;
                break;
            case LayerKind::Conv: {
                if (L.kernel <= 0 || L.kernel % 2 == 0) throw ShapeError(where + ": kernel must be odd");
                if (L.out_channels <= 0) throw ShapeError(where + ": out_channels must be positive");
                const auto& s = src(0);
                L.c = L.out_channels, L.h = s.h, L.w = s.w;
                L.param = static_cast<int>(params.size());
                params.emplace_back(std::to_string(i) + ".conv.weight",
                                    static_cast<std::size_t>(L.out_channels) * s.c * L.kernel * L.kernel);
                params.emplace_back(std::to_string(i) + ".conv.bias", L.out_channels);
                break;
            }
            case LayerKind::ReLU:
            case LayerKind::Sigmoid:
                L.c = src(0).c, L.h = src(0).h, L.w = src(0).w;
                break;
            case LayerKind::MaxPool:
                if (src(0).h % 2 || src(0).w % 2) throw ShapeError(where + ": max-pool needs even spatial size");
                L.c = src(0).c, L.h = src(0).h / 2, L.w = src(0).w / 2;
                break;
            case LayerKind::Upsample:
                L.c = src(0).c, L.h = src(0).h * 2, L.w = src(0).w * 2;
                break;
            case LayerKind::Add:
                if (src(0).c != src(1).c || src(0).h != src(1).h || src(0).w != src(1).w) {
                    throw ShapeError(where + ": add operands differ in shape");
                }
                L.c = src(0).c, L.h = src(0).h, L.w = src(0).w;
                break;
            case LayerKind::Concat:
                if (src(0).h != src(1).h || src(0).w != src(1).w) {
                    throw ShapeError(where + ": concat operands differ in spatial size");
                }
                L.c = src(0).c + src(1).c, L.h = src(0).h, L.w = src(0).w;
                break;
            case LayerKind::GlobalAvgPool:
                L.c = src(0).c, L.h = 1, L.w = 1;
                break;
            case LayerKind::Dense: {
                if (L.out_channels <= 0) throw ShapeError(where + ": out_features must be positive");
                const auto& s = src(0);
                L.c = L.out_channels, L.h = 1, L.w = 1;
                L.param = static_cast<int>(params.size());
                params.emplace_back(std::to_string(i) + ".dense.weight",
                                    static_cast<std::size_t>(L.out_channels) * s.c * s.h * s.w);
                params.emplace_back(std::to_string(i) + ".dense.bias", L.out_channels);
                break;
            }
        }
    }
    return params;
}

// ---------------------------------------------------------------------------
// Network

template <typename T>
Network<T>::Network(int in_channels, int in_h, int in_w, std::vector<LayerSpec> layers, std::vector<Param<T>> params,
                    std::uint64_t seed)
    : layers_(std::move(layers)), params_(std::move(params)), seed_(seed) {
    const auto layout = resolve_layers(layers_, in_channels, in_h, in_w);
    if (layout.size() != params_.size()) throw ShapeError("parameter count does not match layer list");
    for (std::size_t i = 0; i < layout.size(); ++i) {
        if (params_[i].value.size() != layout[i].second) {
            throw ShapeError("parameter " + layout[i].first + " has " + std::to_string(params_[i].value.size()) +
                             " values, expected " + std::to_string(layout[i].second));
        }
        if (params_[i].name.empty()) params_[i].name = layout[i].first;
    }
}

template <typename T>
std::size_t Network<T>::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

template <typename T>
int Network<T>::node_index(const std::string& name) const {
    for (std::size_t i = 0; i < layers_.size(); ++i)
        if (layers_[i].name == name) return static_cast<int>(i);
    throw ArgumentError("no node named '" + name + "'");
}

template <typename T>
bool Network<T>::has_node(const std::string& name) const {
    return std::any_of(layers_.begin(), layers_.end(), [&](const LayerSpec& l) { return l.name == name; });
}

template <typename T>
Shape4 Network<T>::node_shape(int node, int batch) const {
    const auto& L = layers_.at(node);
    return {batch, L.c, L.h, L.w};
}

template <typename T>
std::vector<std::span<T>> Network<T>::param_spans() {
    std::vector<std::span<T>> out;
    for (auto& p : params_) out.emplace_back(p.value);
    return out;
}

template <typename T>
void Network<T>::validate_input(const Tensor<T>& batch) const {
    const auto& s = batch.shape();
    if (s.n <= 0 || s.c != input_channels() || s.h != input_height() || s.w != input_width()) {
        throw ShapeError("input batch " + to_string(s) + " does not match network input " +
                         std::to_string(input_channels()) + "x" + std::to_string(input_height()) + "x" +
                         std::to_string(input_width()));
    }
}

namespace {

template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Eigen's SIMD kernels peel loops according to each operand's address, so a
// product or sum over a plain std::vector can round differently depending on
// where the heap put it. Operands are copied into Eigen-owned storage, which
// is always maximally aligned, so results are bitwise reproducible.
template <typename T>
MatR<T> staged(const T* p, int rows, int cols) {
    return Eigen::Map<const MatR<T>>(p, rows, cols);
}

template <typename T>
void store(const MatR<T>& m, T* dst) {
    Eigen::Map<MatR<T>>(dst, m.rows(), m.cols()) = m;
}

template <typename T>
void store_add(const MatR<T>& m, T* dst) {
    Eigen::Map<MatR<T>>(dst, m.rows(), m.cols()) += m;
}

// col[(ci*k*k + ky*k + kx) * H*W + y*W + x] = in[ci][y + ky - p][x + kx - p]
template <typename T>
void im2col(const T* in, int c, int h, int w, int k, T* col) {
    const int p = k / 2;
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    for (int ci = 0; ci < c; ++ci)
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                T* row = col + (static_cast<std::size_t>(ci) * k * k + ky * k + kx) * hw;
                const T* plane = in + static_cast<std::size_t>(ci) * hw;
                for (int y = 0; y < h; ++y) {
                    const int sy = y + ky - p;
                    T* dst = row + static_cast<std::size_t>(y) * w;
                    if (sy < 0 || sy >= h) {
                        std::fill(dst, dst + w, T{0});
                        continue;
                    }
                    const T* srow = plane + static_cast<std::size_t>(sy) * w;
                    const int dx = kx - p;
                    const int x_begin = std::max(0, -dx);
                    const int x_end = std::min(w, w - dx);
                    for (int x = 0; x < x_begin; ++x) dst[x] = T{0};
                    for (int x = x_begin; x < x_end; ++x) dst[x] = srow[x + dx];
                    for (int x = std::max(x_end, x_begin); x < w; ++x) dst[x] = T{0};
                }
            }
}

template <typename T>
void col2im_add(const T* col, int c, int h, int w, int k, T* in_grad) {
    const int p = k / 2;
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    for (int ci = 0; ci < c; ++ci)
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                const T* row = col + (static_cast<std::size_t>(ci) * k * k + ky * k + kx) * hw;
                T* plane = in_grad + static_cast<std::size_t>(ci) * hw;
                for (int y = 0; y < h; ++y) {
                    const int sy = y + ky - p;
                    if (sy < 0 || sy >= h) continue;
                    const T* src = row + static_cast<std::size_t>(y) * w;
                    T* drow = plane + static_cast<std::size_t>(sy) * w;
                    const int dx = kx - p;
                    const int x_begin = std::max(0, -dx);
                    const int x_end = std::min(w, w - dx);
                    for (int x = x_begin; x < x_end; ++x) drow[x + dx] += src[x];
                }
            }
}

template <typename T>
T sigmoid(T x) {
    if (x >= 0) return T{1} / (T{1} + std::exp(-x));
    const T e = std::exp(x);
    return e / (T{1} + e);
}

}  // namespace

template <typename T>
const Tensor<T>& Network<T>::forward(Workspace<T>& ws, const Tensor<T>& batch,
                                     const std::vector<std::string>& capture) const {
    validate_input(batch);
    for (const auto& name : capture) node_index(name);  // throws on unknown names

    const int N = batch.shape().n;
    const std::size_t L = layers_.size();
    ws.outputs.resize(L);
    ws.argmax.resize(L);
    ws.forward_done = false;
    ws.backward_done = false;
    ws.outputs[0] = batch;

    for (std::size_t i = 1; i < L; ++i) {
        const auto& S = layers_[i];
        Tensor<T>& out = ws.outputs[i];
        out.reset(node_shape(static_cast<int>(i), N));
        const Tensor<T>& in = ws.outputs[S.inputs[0]];
        const auto& is = in.shape();
        switch (S.kind) {
            case LayerKind::Input: break;
            case LayerKind::Conv: {
                const int k = S.kernel;
                const int K = is.c * k * k;
                const int hw = is.h * is.w;
                const auto& wt = params_[S.param].value;
                const auto& bias = params_[S.param + 1].value;
                const MatR<T> W = staged(wt.data(), S.c, K);
                if (k > 1) ws.col.resize(static_cast<std::size_t>(K) * hw);
                for (int n = 0; n < N; ++n) {
                    const T* col = in.sample(n);
                    if (k > 1) {
                        im2col(in.sample(n), is.c, is.h, is.w, k, ws.col.data());
                        col = ws.col.data();
                    }
                    MatR<T> O = W * staged(col, K, hw);
                    for (int co = 0; co < S.c; ++co) O.row(co).array() += bias[co];
                    store(O, out.sample(n));
                }
                break;
            }
            case LayerKind::ReLU:
                for (std::size_t j = 0; j < out.size(); ++j) out[j] = in[j] > T{0} ? in[j] : T{0};
                break;
            case LayerKind::Sigmoid:
                for (std::size_t j = 0; j < out.size(); ++j) out[j] = sigmoid(in[j]);
                break;
            case LayerKind::MaxPool: {
                auto& am = ws.argmax[i];
                am.resize(out.size());
                std::size_t j = 0;
                for (int n = 0; n < N; ++n)
                    for (int c = 0; c < S.c; ++c)
                        for (int y = 0; y < S.h; ++y)
                            for (int x = 0; x < S.w; ++x, ++j) {
                                std::size_t best = in.index(n, c, 2 * y, 2 * x);
                                for (int dy = 0; dy < 2; ++dy)
                                    for (int dx = 0; dx < 2; ++dx) {
                                        const std::size_t idx = in.index(n, c, 2 * y + dy, 2 * x + dx);
                                        if (in[idx] > in[best]) best = idx;
                                    }
                                out[j] = in[best];
                                am[j] = static_cast<std::uint32_t>(best);
                            }
                break;
            }
            case LayerKind::Upsample: {
                for (int n = 0; n < N; ++n)
                    for (int c = 0; c < S.c; ++c) {
                        if (S.mode == UpsampleMode::Nearest) {
                            for (int y = 0; y < S.h; ++y)
                                for (int x = 0; x < S.w; ++x) out.at(n, c, y, x) = in.at(n, c, y / 2, x / 2);
                        } else {
                            for (int y = 0; y < S.h; ++y) {
                                const auto ty = bilinear_tap(y, is.h, S.h);
                                for (int x = 0; x < S.w; ++x) {
                                    const auto tx = bilinear_tap(x, is.w, S.w);
                                    const T wy1 = static_cast<T>(ty.w1), wx1 = static_cast<T>(tx.w1);
                                    const T top = (1 - wx1) * in.at(n, c, ty.i0, tx.i0) + wx1 * in.at(n, c, ty.i0, tx.i1);
                                    const T bot = (1 - wx1) * in.at(n, c, ty.i1, tx.i0) + wx1 * in.at(n, c, ty.i1, tx.i1);
                                    out.at(n, c, y, x) = (1 - wy1) * top + wy1 * bot;
                                }
                            }
                        }
                    }
                break;
            }
            case LayerKind::Add: {
                const Tensor<T>& b = ws.outputs[S.inputs[1]];
                for (std::size_t j = 0; j < out.size(); ++j) out[j] = in[j] + b[j];
                break;
            }
            case LayerKind::Concat: {
                const Tensor<T>& b = ws.outputs[S.inputs[1]];
                for (int n = 0; n < N; ++n) {
                    std::copy(in.sample(n), in.sample(n) + is.sample(), out.sample(n));
                    std::copy(b.sample(n), b.sample(n) + b.shape().sample(), out.sample(n) + is.sample());
                }
                break;
            }
            case LayerKind::GlobalAvgPool: {
                const std::size_t hw = is.plane();
                for (int n = 0; n < N; ++n)
                    for (int c = 0; c < is.c; ++c) {
                        const T* p = in.sample(n) + static_cast<std::size_t>(c) * hw;
                        T s = 0;
                        for (std::size_t j = 0; j < hw; ++j) s += p[j];
                        out.at(n, c, 0, 0) = s / static_cast<T>(hw);
                    }
                break;
            }
            case LayerKind::Dense: {
                const int F = static_cast<int>(is.sample());
                MatR<T> O = staged(in.data(), N, F) * staged(params_[S.param].value.data(), S.c, F).transpose();
                const auto& bias = params_[S.param + 1].value;
                for (int n = 0; n < N; ++n)
                    for (int o = 0; o < S.c; ++o) O(n, o) += bias[o];
                store(O, out.data());
                break;
            }
        }
    }

    ws.captures.clear();
    ws.capture_names = capture;
    for (const auto& name : capture) ws.captures[name].activation = ws.outputs[node_index(name)];
    ws.forward_done = true;
    return ws.outputs.back();
}

template <typename T>
void Network<T>::backward(Workspace<T>& ws, const Tensor<T>& grad, const std::string& from) const {
    if (!ws.forward_done) throw ArgumentError("backward called without a preceding forward pass");
    const int top = from.empty() ? static_cast<int>(layers_.size()) - 1 : node_index(from);
    if (grad.shape() != ws.outputs[top].shape()) {
        throw ShapeError("output gradient " + to_string(grad.shape()) + " does not match node output " +
                         to_string(ws.outputs[top].shape()));
    }
    const int N = grad.shape().n;
    ws.grads.resize(layers_.size());
    for (int i = 0; i <= top; ++i) ws.grads[i].reset(ws.outputs[i].shape());
    for (std::size_t i = top + 1; i < layers_.size(); ++i) ws.grads[i] = Tensor<T>();
    ws.grads[top] = grad;

    ws.param_grads.resize(params_.size());
    for (std::size_t p = 0; p < params_.size(); ++p) ws.param_grads[p].assign(params_[p].value.size(), T{0});

    std::vector<char> reached(layers_.size(), 0);
    reached[top] = 1;

    for (int i = top; i >= 1; --i) {
        if (!reached[i]) continue;
        const auto& S = layers_[i];
        for (int in : S.inputs) reached[in] = 1;
        const Tensor<T>& g = ws.grads[i];
        const Tensor<T>& in = ws.outputs[S.inputs[0]];
        Tensor<T>& gin = ws.grads[S.inputs[0]];
        const auto& is = in.shape();
        switch (S.kind) {
            case LayerKind::Input: break;
            case LayerKind::Conv: {
                const int k = S.kernel;
                const int K = is.c * k * k;
                const int hw = is.h * is.w;
                const MatR<T> W = staged(params_[S.param].value.data(), S.c, K);
                MatR<T> dW = MatR<T>::Zero(S.c, K);
                auto& db = ws.param_grads[S.param + 1];
                if (k > 1) ws.col.resize(static_cast<std::size_t>(K) * hw);
                std::vector<T> dcol(static_cast<std::size_t>(K) * hw);
                for (int n = 0; n < N; ++n) {
                    const T* col = in.sample(n);
                    if (k > 1) {
                        im2col(in.sample(n), is.c, is.h, is.w, k, ws.col.data());
                        col = ws.col.data();
                    }
                    const MatR<T> dO = staged(g.sample(n), S.c, hw);
                    dW.noalias() += dO * staged(col, K, hw).transpose();
                    for (int co = 0; co < S.c; ++co) db[co] += dO.row(co).sum();
                    const MatR<T> dC = W.transpose() * dO;
                    if (k > 1) {
                        store(dC, dcol.data());
                        col2im_add(dcol.data(), is.c, is.h, is.w, k, gin.sample(n));
                    } else {
                        store_add(dC, gin.sample(n));
                    }
                }
                store_add(dW, ws.param_grads[S.param].data());
                break;
            }
            case LayerKind::ReLU:
                for (std::size_t j = 0; j < g.size(); ++j)
                    if (in[j] > T{0}) gin[j] += g[j];
                break;
            case LayerKind::Sigmoid: {
                const Tensor<T>& y = ws.outputs[i];
                for (std::size_t j = 0; j < g.size(); ++j) gin[j] += g[j] * y[j] * (T{1} - y[j]);
                break;
            }
            case LayerKind::MaxPool: {
                const auto& am = ws.argmax[i];
                for (std::size_t j = 0; j < g.size(); ++j) gin[am[j]] += g[j];
                break;
            }
            case LayerKind::Upsample: {
                for (int n = 0; n < N; ++n)
                    for (int c = 0; c < S.c; ++c) {
                        if (S.mode == UpsampleMode::Nearest) {
                            for (int y = 0; y < S.h; ++y)
                                for (int x = 0; x < S.w; ++x) gin.at(n, c, y / 2, x / 2) += g.at(n, c, y, x);
                        } else {
                            for (int y = 0; y < S.h; ++y) {
                                const auto ty = bilinear_tap(y, is.h, S.h);
                                for (int x = 0; x < S.w; ++x) {
                                    const auto tx = bilinear_tap(x, is.w, S.w);
                                    const T wy1 = static_cast<T>(ty.w1), wx1 = static_cast<T>(tx.w1);
                                    const T v = g.at(n, c, y, x);
                                    gin.at(n, c, ty.i0, tx.i0) += (1 - wy1) * (1 - wx1) * v;
                                    gin.at(n, c, ty.i0, tx.i1) += (1 - wy1) * wx1 * v;
                                    gin.at(n, c, ty.i1, tx.i0) += wy1 * (1 - wx1) * v;
                                    gin.at(n, c, ty.i1, tx.i1) += wy1 * wx1 * v;
                                }
                            }
                        }
                    }
                break;
            }
            case LayerKind::Add: {
                for (std::size_t j = 0; j < g.size(); ++j) gin[j] += g[j];
                Tensor<T>& gb = ws.grads[S.inputs[1]];
                for (std::size_t j = 0; j < g.size(); ++j) gb[j] += g[j];
                break;
            }
            case LayerKind::Concat: {
                Tensor<T>& gb = ws.grads[S.inputs[1]];
                const std::size_t a_len = is.sample();
                const std::size_t b_len = gb.shape().sample();
                for (int n = 0; n < N; ++n) {
                    const T* src = g.sample(n);
                    T* da = gin.sample(n);
                    T* dbp = gb.sample(n);
                    for (std::size_t j = 0; j < a_len; ++j) da[j] += src[j];
                    for (std::size_t j = 0; j < b_len; ++j) dbp[j] += src[a_len + j];
                }
                break;
            }
            case LayerKind::GlobalAvgPool: {
                const std::size_t hw = is.plane();
                const T scale = T{1} / static_cast<T>(hw);
                for (int n = 0; n < N; ++n)
                    for (int c = 0; c < is.c; ++c) {
                        const T v = g.at(n, c, 0, 0) * scale;
                        T* p = gin.sample(n) + static_cast<std::size_t>(c) * hw;
                        for (std::size_t j = 0; j < hw; ++j) p[j] += v;
                    }
                break;
            }
            case LayerKind::Dense: {
                const int F = static_cast<int>(is.sample());
                const MatR<T> X = staged(in.data(), N, F);
                const MatR<T> W = staged(params_[S.param].value.data(), S.c, F);
                const MatR<T> dO = staged(g.data(), N, S.c);
                store_add(MatR<T>(dO.transpose() * X), ws.param_grads[S.param].data());
                auto& db = ws.param_grads[S.param + 1];
                for (int n = 0; n < N; ++n)
                    for (int o = 0; o < S.c; ++o) db[o] += dO(n, o);
                store_add(MatR<T>(dO * W), gin.data());
                break;
            }
        }
    }

    for (const auto& name : ws.capture_names) {
        const int idx = node_index(name);
        auto& cap = ws.captures[name];
        cap.gradient = idx <= top ? ws.grads[idx] : Tensor<T>(ws.outputs[idx].shape());
    }
    ws.backward_done = true;
}

template class Network<float>;
template class Network<double>;

// ---------------------------------------------------------------------------
// Builder

NetworkBuilder::NetworkBuilder(int in_channels, int in_h, int in_w) : in_c_(in_channels), in_h_(in_h), in_w_(in_w) {
    LayerSpec input;
    input.kind = LayerKind::Input;
    input.c = in_channels, input.h = in_h, input.w = in_w;
    layers_.push_back(input);
}

const LayerSpec& NetworkBuilder::node(int i) const {
    if (i < 0 || static_cast<std::size_t>(i) >= layers_.size()) throw ArgumentError("builder: bad node index");
    return layers_[i];
}

int NetworkBuilder::push(LayerSpec spec) {
    for (int in : spec.inputs) node(in);
    layers_.push_back(std::move(spec));
    // resolve eagerly so shape errors surface at the offending call
    auto copy = layers_;
    try {
        resolve_layers(copy, in_c_, in_h_, in_w_);
    } catch (...) {
        layers_.pop_back();
        throw;
    }
    layers_ = std::move(copy);
    return static_cast<int>(layers_.size()) - 1;
}

int NetworkBuilder::conv(int in, int out_channels, int kernel) {
    LayerSpec s;
    s.kind = LayerKind::Conv;
    s.inputs = {in};
    s.out_channels = out_channels;
    s.kernel = kernel;
    return push(std::move(s));
}

#define LUNGCAM_UNARY(fn, K)             \
    int NetworkBuilder::fn(int in) {     \
        LayerSpec s;                     \
        s.kind = LayerKind::K;           \
        s.inputs = {in};                 \
        return push(std::move(s));       \
    }
LUNGCAM_UNARY(relu, ReLU)
LUNGCAM_UNARY(maxpool, MaxPool)
LUNGCAM_UNARY(global_avg_pool, GlobalAvgPool)
LUNGCAM_UNARY(sigmoid, Sigmoid)
#undef LUNGCAM_UNARY

int NetworkBuilder::upsample(int in, UpsampleMode mode) {
    LayerSpec s;
    s.kind = LayerKind::Upsample;
    s.inputs = {in};
    s.mode = mode;
    return push(std::move(s));
}

int NetworkBuilder::add(int a, int b) {
    LayerSpec s;
    s.kind = LayerKind::Add;
    s.inputs = {a, b};
    return push(std::move(s));
}

int NetworkBuilder::concat(int a, int b) {
    LayerSpec s;
    s.kind = LayerKind::Concat;
    s.inputs = {a, b};
    return push(std::move(s));
}

int NetworkBuilder::dense(int in, int out_features) {
    LayerSpec s;
    s.kind = LayerKind::Dense;
    s.inputs = {in};
    s.out_channels = out_features;
    return push(std::move(s));
}

NetworkBuilder& NetworkBuilder::name(int n, const std::string& name) {
    node(n);
    for (const auto& l : layers_)
        if (l.name == name) throw ArgumentError("duplicate node name '" + name + "'");
    layers_[n].name = name;
    return *this;
}

template <typename T>
Network<T> NetworkBuilder::build(std::uint64_t seed) const {
    auto layers = layers_;
    const auto layout = resolve_layers(layers, in_c_, in_h_, in_w_);
    std::vector<Param<T>> params;
    Rng rng(seed);
    for (const auto& L : layers) {
        if (L.param < 0) continue;
        const auto& src = layers[L.inputs[0]];
        const std::size_t fan_in = L.kind == LayerKind::Conv
                                       ? static_cast<std::size_t>(src.c) * L.kernel * L.kernel
                                       : static_cast<std::size_t>(src.c) * src.h * src.w;
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        Param<T> w{layout[L.param].first, std::vector<T>(layout[L.param].second)};
        for (auto& v : w.value) v = static_cast<T>(rng.uniform(-bound, bound));
        Param<T> b{layout[L.param + 1].first, std::vector<T>(layout[L.param + 1].second, T{0})};
        params.push_back(std::move(w));
        params.push_back(std::move(b));
    }
    return Network<T>(in_c_, in_h_, in_w_, std::move(layers), std::move(params), seed);
}

template Network<float> NetworkBuilder::build<float>(std::uint64_t) const;
template Network<double> NetworkBuilder::build<double>(std::uint64_t) const;

}  // namespace lungcam::nn
