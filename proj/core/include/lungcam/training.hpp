#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "lungcam/csv.hpp"
#include "lungcam/image.hpp"
#include "lungcam/nn/tensor.hpp"

namespace lungcam {

/// One row of a training log. Epoch 0 is the initialization.
struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;  // mean over the epoch's batches (NaN for epoch 0)
    double val_loss = 0.0;
    double val_metric = 0.0;  // Dice for the segmenter, AUC for the classifier
};

CsvTable training_log_table(const std::vector<EpochLog>& log);

/// Case-wise validation split: round(fraction * n) distinct case ids (at
/// least one when n >= 2, never all of them), drawn with a seeded shuffle of
/// the sorted unique ids.
std::set<std::string> split_validation_cases(const std::vector<std::string>& case_ids, double fraction,
                                             std::uint64_t seed);

/// Stacks single-channel images into an N x 1 x H x W tensor.
nn::Tensor<float> stack_images(const std::vector<const Image*>& images);

}  // namespace lungcam
