#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lungcam/image.hpp"
#include "lungcam/nn/augment.hpp"
#include "lungcam/nn/network.hpp"
#include "lungcam/training.hpp"

namespace lungcam {

/// Capture points of the classifier: "fine" has twice the spatial size of
/// "coarse". "logit" is the pre-sigmoid positive-class score.
inline constexpr const char* kFineCapture = "fine";
inline constexpr const char* kCoarseCapture = "coarse";
inline constexpr const char* kLogitNode = "logit";

struct ClsConfig {
    int input_size = 64;
    int base_channels = 8;
    int epochs = 30;
    int batch_size = 16;
    double learning_rate = 1e-4;
    double val_fraction = 0.15;
    bool augment = true;
    nn::AugmentConfig augment_config;
    std::uint64_t seed = 1;
};

struct ClsModel {
    nn::Network<float> net;
    int input_size = 64;
};

/// Residual slice classifier: stem conv, four residual blocks over three
/// resolutions, global average pool, dense logit, sigmoid. input_size must
/// be a multiple of 8.
nn::NetworkBuilder make_classifier(int input_size, int base_channels);

struct ClsSample {
    std::string case_id;
    Image image;  // ROI slice at the classifier input size
    std::uint8_t label = 0;
};

struct ClsTrainResult {
    ClsModel model;
    std::vector<EpochLog> log;
};

/// BCE + Adam training with a case-wise validation split. Augmentation is
/// drawn per training slice per epoch; the checkpoint with the lowest
/// validation loss (epoch 0 included) is returned. Throws ArgumentError when
/// the training labels contain a single class.
ClsTrainResult train_classifier(const std::vector<ClsSample>& samples, const ClsConfig& cfg);

double predict_slice(const ClsModel& model, const Image& slice);
std::vector<double> predict_batch(const ClsModel& model, const std::vector<Image>& slices);

struct SliceMetrics {
    double auc = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    double threshold = 0.5;
    int tp = 0, fp = 0, tn = 0, fn = 0;
};

/// Pair-counting AUC plus confusion counts with "positive iff p > threshold".
/// Throws ArgumentError unless both classes are present.
SliceMetrics evaluate_slices(std::span<const double> preds, std::span<const std::uint8_t> labels,
                             double threshold = 0.5);

void save_cls_model(const std::filesystem::path& path, const ClsModel& model);
ClsModel load_cls_model(const std::filesystem::path& path);

}  // namespace lungcam
