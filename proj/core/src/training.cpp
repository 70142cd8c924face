#include "lungcam/training.hpp"

#include <algorithm>
#include <cmath>

#include "lungcam/error.hpp"
#include "lungcam/rng.hpp"

namespace lungcam {

CsvTable training_log_table(const std::vector<EpochLog>& log) {
    CsvTable t({"epoch", "train_loss", "val_loss", "val_metric"});
    for (const auto& e : log) {
        t.add_row({std::to_string(e.epoch), std::isnan(e.train_loss) ? "nan" : format_number(e.train_loss),
                   format_number(e.val_loss), format_number(e.val_metric)});
    }
    return t;
}

std::set<std::string> split_validation_cases(const std::vector<std::string>& case_ids, double fraction,
                                             std::uint64_t seed) {
    std::vector<std::string> ids(case_ids.begin(), case_ids.end());
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    if (ids.size() < 2 || fraction <= 0.0) return {};
    auto n_val = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(ids.size())));
    n_val = std::clamp<std::size_t>(n_val, 1, ids.size() - 1);
    Rng rng(mix_seed(seed, 0x5917));
    rng.shuffle(ids.begin(), ids.end());
    return {ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_val)};
}

nn::Tensor<float> stack_images(const std::vector<const Image*>& images) {
    if (images.empty()) throw ArgumentError("stack_images: no images");
    const int w = images.front()->width();
    const int h = images.front()->height();
    nn::Tensor<float> t({static_cast<int>(images.size()), 1, h, w});
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (images[i]->width() != w || images[i]->height() != h) throw ShapeError("stack_images: size mismatch");
        std::copy(images[i]->pixels().begin(), images[i]->pixels().end(), t.sample(static_cast<int>(i)));
    }
    return t;
}

}  // namespace lungcam
