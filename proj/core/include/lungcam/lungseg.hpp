#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lungcam/image.hpp"
#include "lungcam/nn/network.hpp"
#include "lungcam/training.hpp"
#include "lungcam/volume.hpp"
#include "lungcam/volume_io.hpp"

namespace lungcam {

struct SegConfig {
    int input_size = 64;
    int base_channels = 8;
    int epochs = 8;
    int batch_size = 16;
    double learning_rate = 1e-3;
    double val_fraction = 0.15;
    std::uint64_t seed = 1;
    int window_lo = kWindowLowHu;
    int window_hi = kWindowHighHu;
};

/// Slice-wise U-Net lung segmenter plus the HU window its inputs use.
struct SegModel {
    nn::Network<float> net;
    int input_size = 64;
    int window_lo = kWindowLowHu;
    int window_hi = kWindowHighHu;
};

/// Half-open pixel rectangle [x0, x1) x [y0, y1) in volume coordinates.
struct RoiBox {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
    long long area() const { return static_cast<long long>(width()) * height(); }
    bool operator==(const RoiBox&) const = default;
};

/// 3-level U-Net with concatenate skips; output node "prob" (sigmoid of "logit").
nn::NetworkBuilder make_unet(int input_size, int base_channels);

struct SegTrainingCase {
    std::string case_id;
    NormalizedVolume image;
    MaskVolume lung_mask;
};

struct SegTrainResult {
    SegModel model;
    std::vector<EpochLog> log;
};

/// Dice-loss training with Adam; keeps the epoch with the lowest validation
/// loss (epoch 0 = initialization). Throws ArgumentError on an empty dataset.
SegTrainResult train_segmenter(const std::vector<SegTrainingCase>& cases, const SegConfig& cfg);

/// Per-pixel lung probability for a normalized slice of the model's size.
Image predict_probability(const SegModel& model, const Image& slice);
std::vector<Image> predict_probabilities(const SegModel& model, const std::vector<Image>& slices);

/// 1 where probability > threshold.
Image threshold_mask(const Image& probability, double threshold = 0.5);
Image predict_mask(const SegModel& model, const Image& slice, double threshold = 0.5);

/// Per-slice lung masks at volume resolution (slices resized to the model
/// input and back when sizes differ).
std::vector<Image> segment_volume(const SegModel& model, const NormalizedVolume& vol, double threshold = 0.5);

/// Tight bounding box of the non-zero pixels, or nullopt for an empty mask.
std::optional<RoiBox> mask_bbox(const Image& mask);

/// Largest-area per-slice bounding box; equal areas are broken by the
/// smallest (y0, x0, y1, x1) so slice order never matters. The full frame
/// when every mask is empty.
RoiBox case_roi(const std::vector<Image>& masks);

/// Crops every slice to `roi` and resizes bilinearly to out_size x out_size.
std::vector<Image> crop_resize(const NormalizedVolume& vol, const RoiBox& roi, int out_size);

/// 2|A n B| / (|A| + |B|) over pixels > 0.5; 1 when both are empty.
double dice(const Image& a, const Image& b);

void save_seg_model(const std::filesystem::path& path, const SegModel& model);
SegModel load_seg_model(const std::filesystem::path& path);

}  // namespace lungcam
