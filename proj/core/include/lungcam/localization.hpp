#pragma once

#include <string>
#include <vector>

#include "lungcam/classifier.hpp"
#include "lungcam/image.hpp"
#include "lungcam/nn/network.hpp"

namespace lungcam {

/// Non-negative class activation map at a capture point's resolution.
struct GradcamMap {
    Image map;
    std::string capture;
};

/// Channel weights alpha_k: spatial mean of the gradient plane k of `sample`.
std::vector<double> channel_weights(const nn::Capture<float>& cap, int sample);

/// ReLU(sum_k alpha_k A^k) for one sample of a filled capture.
Image cam_from_capture(const nn::Capture<float>& cap, int sample);

/// GradCAM maps for every sample of `batch` at `capture`, with the gradient
/// taken from the node named `target`. Throws ArgumentError for unknown names.
std::vector<GradcamMap> gradcam_batch(const nn::Network<float>& net, const nn::Tensor<float>& batch,
                                      const std::string& capture, const std::string& target = kLogitNode);

GradcamMap gradcam(const ClsModel& model, const Image& roi_slice, const std::string& capture);

/// (v - min) / (max - min); all zeros for a constant map.
Image normalize01(const Image& map);

/// Bilinear upsample of both maps to out_width x out_height, then
/// elementwise product.
Image fuse_multiscale(const Image& coarse, const Image& fine, int out_width, int out_height);
inline Image fuse_multiscale(const Image& coarse, const Image& fine, int out_size) {
    return fuse_multiscale(coarse, fine, out_size, out_size);
}

/// Everything a single forward/backward pass yields for one slice.
struct SliceLocalization {
    double probability = 0.0;
    Image fine_cam;
    Image coarse_cam;
    Image fused;                  // classifier input size, values in [0,1]
    std::vector<double> feature;  // mean(A_k) * alpha_k at the coarse capture
};

/// Batched classification + two-scale GradCAM + fusion + slice features.
/// Uses a private workspace per call, so concurrent calls on one model are safe.
std::vector<SliceLocalization> localize_slices(const ClsModel& model, const std::vector<Image>& roi_slices);

}  // namespace lungcam
