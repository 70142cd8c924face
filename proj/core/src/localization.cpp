#include "lungcam/localization.hpp"

#include <algorithm>

#include "lungcam/error.hpp"
#include "lungcam/training.hpp"

namespace lungcam {

namespace {

constexpr std::size_t kBatch = 32;

double plane_mean(const float* p, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += p[i];
    return s / static_cast<double>(n);
}

void run_pass(const nn::Network<float>& net, nn::Workspace<float>& ws, const nn::Tensor<float>& batch,
              const std::vector<std::string>& captures, const std::string& target) {
    for (const auto& c : captures)
        if (!net.has_node(c)) throw ArgumentError("unknown capture point '" + c + "'");
    const int t = net.node_index(target);
    net.forward(ws, batch, captures);
    nn::Tensor<float> seed(net.node_shape(t, batch.shape().n), 1.0f);
    net.backward(ws, seed, target);
}

}  // namespace

std::vector<double> channel_weights(const nn::Capture<float>& cap, int sample) {
    const auto& s = cap.gradient.shape();
    std::vector<double> alpha(s.c);
    for (int k = 0; k < s.c; ++k) alpha[k] = plane_mean(&cap.gradient.vec()[cap.gradient.index(sample, k, 0, 0)], s.plane());
    return alpha;
}

Image cam_from_capture(const nn::Capture<float>& cap, int sample) {
    const auto& s = cap.activation.shape();
    if (!(s == cap.gradient.shape())) throw ShapeError("capture activation and gradient shapes differ");
    const auto alpha = channel_weights(cap, sample);
    std::vector<double> acc(s.plane(), 0.0);
    for (int k = 0; k < s.c; ++k) {
        const float* a = &cap.activation.vec()[cap.activation.index(sample, k, 0, 0)];
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += alpha[k] * a[i];
    }
    Image out(s.w, s.h);
    for (std::size_t i = 0; i < acc.size(); ++i) out.pixels()[i] = static_cast<float>(std::max(0.0, acc[i]));
    return out;
}

std::vector<GradcamMap> gradcam_batch(const nn::Network<float>& net, const nn::Tensor<float>& batch,
                                      const std::string& capture, const std::string& target) {
    nn::Workspace<float> ws;
    run_pass(net, ws, batch, {capture}, target);
    const auto& cap = ws.captures.at(capture);
    std::vector<GradcamMap> out;
    for (int n = 0; n < batch.shape().n; ++n) out.push_back({cam_from_capture(cap, n), capture});
    return out;
}

GradcamMap gradcam(const ClsModel& model, const Image& roi_slice, const std::string& capture) {
    if (roi_slice.width() != model.input_size || roi_slice.height() != model.input_size) {
        throw ShapeError("gradcam: slice does not match the classifier input size");
    }
    return gradcam_batch(model.net, stack_images({&roi_slice}), capture).front();
}

Image normalize01(const Image& map) {
    Image out(map.width(), map.height());
    if (map.empty()) return out;
    const float lo = map.min(), hi = map.max();
    if (!(hi > lo)) return out;
    const double range = static_cast<double>(hi) - lo;
    for (std::size_t i = 0; i < map.size(); ++i) {
        const double v = (static_cast<double>(map.pixels()[i]) - lo) / range;
        out.pixels()[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
    return out;
}

Image fuse_multiscale(const Image& coarse, const Image& fine, int out_width, int out_height) {
    if (out_width <= 0 || out_height <= 0) throw ArgumentError("fuse_multiscale: output size must be positive");
    const Image a = resize_bilinear(coarse, out_width, out_height);
    const Image b = resize_bilinear(fine, out_width, out_height);
    Image out(out_width, out_height);
    for (std::size_t i = 0; i < out.size(); ++i) out.pixels()[i] = a.pixels()[i] * b.pixels()[i];
    return out;
}

std::vector<SliceLocalization> localize_slices(const ClsModel& model, const std::vector<Image>& roi_slices) {
    for (const auto& s : roi_slices) {
        if (s.width() != model.input_size || s.height() != model.input_size) {
            throw ShapeError("localize_slices: slice does not match the classifier input size");
        }
    }
    std::vector<SliceLocalization> out;
    out.reserve(roi_slices.size());
    const std::vector<std::string> captures{kFineCapture, kCoarseCapture};
    nn::Workspace<float> ws;
    const int prob_node = static_cast<int>(model.net.layers().size()) - 1;
    for (std::size_t start = 0; start < roi_slices.size(); start += kBatch) {
        const std::size_t end = std::min(roi_slices.size(), start + kBatch);
        std::vector<const Image*> chunk;
        for (std::size_t i = start; i < end; ++i) chunk.push_back(&roi_slices[i]);
        run_pass(model.net, ws, stack_images(chunk), captures, kLogitNode);
        const auto& probs = ws.outputs[prob_node];
        const auto& fine = ws.captures.at(kFineCapture);
        const auto& coarse = ws.captures.at(kCoarseCapture);
        for (int n = 0; n < static_cast<int>(chunk.size()); ++n) {
            SliceLocalization r;
            r.probability = probs.vec()[n];
            r.fine_cam = cam_from_capture(fine, n);
            r.coarse_cam = cam_from_capture(coarse, n);
            r.fused = fuse_multiscale(normalize01(r.coarse_cam), normalize01(r.fine_cam), model.input_size);
            const auto alpha = channel_weights(coarse, n);
            const auto& s = coarse.activation.shape();
            r.feature.resize(s.c);
            for (int k = 0; k < s.c; ++k) {
                r.feature[k] = plane_mean(&coarse.activation.vec()[coarse.activation.index(n, k, 0, 0)], s.plane()) * alpha[k];
            }
            out.push_back(std::move(r));
        }
    }
    return out;
}

}  // namespace lungcam
