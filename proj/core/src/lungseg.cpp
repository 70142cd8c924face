#include "lungcam/lungseg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

#include "lungcam/error.hpp"
#include "lungcam/nn/adam.hpp"
#include "lungcam/nn/loss.hpp"
#include "lungcam/nn/model_io.hpp"
#include "lungcam/rng.hpp"

namespace lungcam {

nn::NetworkBuilder make_unet(int input_size, int base_channels) {
    if (input_size <= 0 || input_size % 4 != 0) throw ArgumentError("U-Net input size must be a positive multiple of 4");
    const int c1 = base_channels, c2 = 2 * base_channels, c3 = 4 * base_channels;
    nn::NetworkBuilder b(1, input_size, input_size);
    const int e1 = b.relu(b.conv(b.input(), c1));
    const int e2 = b.relu(b.conv(b.maxpool(e1), c2));
    const int mid = b.relu(b.conv(b.maxpool(e2), c3));
    const int d2 = b.relu(b.conv(b.concat(b.upsample(mid), e2), c2));
    const int d1 = b.relu(b.conv(b.concat(b.upsample(d2), e1), c1));
    const int logit = b.conv(d1, 1, 1);
    b.name(logit, "logit");
    b.name(b.sigmoid(logit), "prob");
    return b;
}

namespace {

struct SegSlice {
    Image image;
    Image mask;
};

std::vector<SegSlice> collect(const SegTrainingCase& c, int size) {
    std::vector<SegSlice> out;
    if (!(c.image.dims() == c.lung_mask.dims())) throw ShapeError(c.case_id + ": image and mask dims differ");
    for (int z = 0; z < c.image.dims().nz; ++z) {
        Image img = extract_slice(c.image, z);
        Image mask = extract_slice(c.lung_mask, z);
        if (img.width() != size || img.height() != size) {
            img = resize_bilinear(img, size, size);
            mask = resize_nearest(mask, size, size);
        }
        out.push_back({std::move(img), std::move(mask)});
    }
    return out;
}

struct Evaluation {
    double loss = 0.0;
    double dice = 0.0;
};

Evaluation evaluate(const nn::Network<float>& net, const std::vector<SegSlice>& data, int batch_size) {
    Evaluation ev;
    if (data.empty()) return ev;
    double inter = 0.0, total = 0.0, loss_sum = 0.0;
    nn::Workspace<float> ws;
    for (std::size_t start = 0; start < data.size(); start += batch_size) {
        const std::size_t end = std::min(data.size(), start + batch_size);
        std::vector<const Image*> imgs;
        for (std::size_t i = start; i < end; ++i) imgs.push_back(&data[i].image);
        const auto& out = net.forward(ws, stack_images(imgs));
        std::vector<double> pred(out.vec().begin(), out.vec().end());
        std::vector<double> target;
        for (std::size_t i = start; i < end; ++i) target.insert(target.end(), data[i].mask.pixels().begin(), data[i].mask.pixels().end());
        loss_sum += nn::soft_dice_loss(pred, target, static_cast<int>(end - start)).loss * static_cast<double>(end - start);
        for (std::size_t j = 0; j < pred.size(); ++j) {
            const double p = pred[j] > 0.5 ? 1.0 : 0.0;
            inter += p * target[j];
            total += p + target[j];
        }
    }
    ev.loss = loss_sum / static_cast<double>(data.size());
    ev.dice = total > 0 ? 2.0 * inter / total : 1.0;
    return ev;
}

}  // namespace

SegTrainResult train_segmenter(const std::vector<SegTrainingCase>& cases, const SegConfig& cfg) {
    if (cases.empty()) throw ArgumentError("train_segmenter: empty dataset");
    if (cfg.epochs < 0 || cfg.batch_size <= 0) throw ArgumentError("train_segmenter: bad epochs or batch size");

    std::vector<std::string> ids;
    for (const auto& c : cases) ids.push_back(c.case_id);
    const auto val_ids = split_validation_cases(ids, cfg.val_fraction, cfg.seed);
    std::vector<SegSlice> train, val;
    for (const auto& c : cases) {
        auto slices = collect(c, cfg.input_size);
        auto& dst = val_ids.contains(c.case_id) ? val : train;
        for (auto& s : slices) dst.push_back(std::move(s));
    }
    if (train.empty()) throw ArgumentError("train_segmenter: no training slices");

    SegTrainResult result;
    result.model.input_size = cfg.input_size;
    result.model.window_lo = cfg.window_lo;
    result.model.window_hi = cfg.window_hi;
    nn::Network<float> net = make_unet(cfg.input_size, cfg.base_channels).build<float>(cfg.seed);

    std::vector<std::size_t> sizes;
    for (const auto& p : net.params()) sizes.push_back(p.value.size());
    nn::AdamState adam(nn::AdamConfig{cfg.learning_rate}, sizes);

    const auto& selection_set = val.empty() ? train : val;
    auto ev0 = evaluate(net, selection_set, cfg.batch_size);
    result.log.push_back({0, std::numeric_limits<double>::quiet_NaN(), ev0.loss, ev0.dice});
    double best_loss = ev0.loss;
    nn::Network<float> best = net;

    std::vector<std::size_t> order(train.size());
    nn::Workspace<float> ws;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
        rng.shuffle(order.begin(), order.end());
        double loss_sum = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const int n = static_cast<int>(end - start);
            std::vector<const Image*> imgs;
            std::vector<double> target;
            for (std::size_t i = start; i < end; ++i) {
                imgs.push_back(&train[order[i]].image);
                const auto& m = train[order[i]].mask.pixels();
                target.insert(target.end(), m.begin(), m.end());
            }
            const auto& out = net.forward(ws, stack_images(imgs));
            std::vector<double> pred(out.vec().begin(), out.vec().end());
            const auto loss = nn::soft_dice_loss(pred, target, n);
            nn::Tensor<float> grad(out.shape());
            for (std::size_t j = 0; j < grad.size(); ++j) grad[j] = static_cast<float>(loss.grad[j]);
            net.backward(ws, grad);
            nn::adam_step(adam, net.param_spans(), ws.param_grads);
            loss_sum += loss.loss;
            ++batches;
        }
        const auto ev = evaluate(net, selection_set, cfg.batch_size);
        result.log.push_back({epoch, loss_sum / std::max(1, batches), ev.loss, ev.dice});
        if (ev.loss < best_loss) {
            best_loss = ev.loss;
            best = net;
        }
    }
    result.model.net = std::move(best);
    return result;
}

std::vector<Image> predict_probabilities(const SegModel& model, const std::vector<Image>& slices) {
    std::vector<Image> out;
    if (slices.empty()) return out;
    for (const auto& s : slices) {
        if (s.width() != model.input_size || s.height() != model.input_size) {
            throw ShapeError("segmenter expects " + std::to_string(model.input_size) + "x" +
                             std::to_string(model.input_size) + " slices");
        }
    }
    nn::Workspace<float> ws;
    constexpr std::size_t kBatch = 16;
    for (std::size_t start = 0; start < slices.size(); start += kBatch) {
        const std::size_t end = std::min(slices.size(), start + kBatch);
        std::vector<const Image*> imgs;
        for (std::size_t i = start; i < end; ++i) imgs.push_back(&slices[i]);
        const auto& prob = model.net.forward(ws, stack_images(imgs));
        for (std::size_t i = start; i < end; ++i) {
            const float* p = prob.sample(static_cast<int>(i - start));
            out.emplace_back(model.input_size, model.input_size,
                             std::vector<float>(p, p + static_cast<std::size_t>(model.input_size) * model.input_size));
        }
    }
    return out;
}

Image predict_probability(const SegModel& model, const Image& slice) { return predict_probabilities(model, {slice}).front(); }

Image threshold_mask(const Image& probability, double threshold) {
    Image out(probability.width(), probability.height());
    for (std::size_t i = 0; i < out.size(); ++i) out.pixels()[i] = probability.pixels()[i] > threshold ? 1.0f : 0.0f;
    return out;
}

Image predict_mask(const SegModel& model, const Image& slice, double threshold) {
    return threshold_mask(predict_probability(model, slice), threshold);
}

std::vector<Image> segment_volume(const SegModel& model, const NormalizedVolume& vol, double threshold) {
    const int nx = vol.dims().nx, ny = vol.dims().ny;
    const bool resize = nx != model.input_size || ny != model.input_size;
    std::vector<Image> inputs;
    for (int z = 0; z < vol.dims().nz; ++z) {
        Image s = extract_slice(vol, z);
        inputs.push_back(resize ? resize_bilinear(s, model.input_size, model.input_size) : std::move(s));
    }
    auto probs = predict_probabilities(model, inputs);
    std::vector<Image> masks;
    for (auto& p : probs) masks.push_back(threshold_mask(resize ? resize_bilinear(p, nx, ny) : p, threshold));
    return masks;
}

std::optional<RoiBox> mask_bbox(const Image& mask) {
    int x0 = mask.width(), y0 = mask.height(), x1 = -1, y1 = -1;
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x)
            if (mask.at(x, y) > 0.5f) {
                x0 = std::min(x0, x), y0 = std::min(y0, y);
                x1 = std::max(x1, x), y1 = std::max(y1, y);
            }
    if (x1 < 0) return std::nullopt;
    return RoiBox{x0, y0, x1 + 1, y1 + 1};
}

RoiBox case_roi(const std::vector<Image>& masks) {
    if (masks.empty()) throw ArgumentError("case_roi needs at least one slice");
    std::optional<RoiBox> best;
    for (const auto& m : masks) {
        const auto box = mask_bbox(m);
        if (!box) continue;
        const auto key = [](const RoiBox& b) { return std::tuple(-b.area(), b.y0, b.x0, b.y1, b.x1); };
        if (!best || key(*box) < key(*best)) best = box;
    }
    return best.value_or(RoiBox{0, 0, masks.front().width(), masks.front().height()});
}

std::vector<Image> crop_resize(const NormalizedVolume& vol, const RoiBox& roi, int out_size) {
    const auto& d = vol.dims();
    if (roi.x0 < 0 || roi.y0 < 0 || roi.x1 > d.nx || roi.y1 > d.ny || roi.width() <= 0 || roi.height() <= 0) {
        throw ArgumentError("ROI is degenerate or outside the volume");
    }
    if (out_size <= 0) throw ArgumentError("crop_resize: output size must be positive");
    std::vector<Image> out;
    out.reserve(d.nz);
    for (int z = 0; z < d.nz; ++z) {
        const Image s = extract_slice(vol, z);
        const Image c = crop(s, roi.x0, roi.y0, roi.x1, roi.y1);
        out.push_back(c.width() == out_size && c.height() == out_size ? c : resize_bilinear(c, out_size, out_size));
    }
    return out;
}

double dice(const Image& a, const Image& b) {
    if (a.width() != b.width() || a.height() != b.height()) throw ShapeError("dice: mask sizes differ");
    std::size_t inter = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool pa = a.pixels()[i] > 0.5f, pb = b.pixels()[i] > 0.5f;
        na += pa, nb += pb, inter += pa && pb;
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

void save_seg_model(const std::filesystem::path& path, const SegModel& model) {
    KeyValueText extra;
    extra.set("model_kind", "segmenter");
    extra.set("window", std::to_string(model.window_lo) + " " + std::to_string(model.window_hi));
    nn::save_model(path, model.net, extra);
}

SegModel load_seg_model(const std::filesystem::path& path) {
    auto loaded = nn::load_model(path);
    if (loaded.manifest.get_or("model_kind", "") != "segmenter") throw FormatError(path.string() + ": not a segmenter model");
    SegModel m;
    m.input_size = loaded.net.input_height();
    const auto w = loaded.manifest.fields("window");
    if (w.size() != 2) throw FormatError(path.string() + ": bad window");
    m.window_lo = static_cast<int>(parse_int(w[0], "window lo"));
    m.window_hi = static_cast<int>(parse_int(w[1], "window hi"));
    m.net = std::move(loaded.net);
    return m;
}

}  // namespace lungcam
