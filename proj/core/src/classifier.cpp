#include "lungcam/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "lungcam/error.hpp"
#include "lungcam/nn/adam.hpp"
#include "lungcam/nn/loss.hpp"
#include "lungcam/nn/model_io.hpp"
#include "lungcam/rng.hpp"
#include "lungcam/stats.hpp"

namespace lungcam {

namespace {

int residual_block(nn::NetworkBuilder& b, int in, int channels) {
    const int h = b.relu(b.conv(in, channels));
    const int y = b.conv(h, channels);
    return b.relu(b.add(y, in));
}

constexpr std::size_t kInferBatch = 32;

}  // namespace

nn::NetworkBuilder make_classifier(int input_size, int base_channels) {
    if (input_size <= 0 || input_size % 8 != 0) throw ArgumentError("classifier input size must be a multiple of 8");
    if (base_channels <= 0) throw ArgumentError("classifier width must be positive");
    const int c1 = base_channels, c2 = 2 * base_channels, c3 = 4 * base_channels;
    nn::NetworkBuilder b(1, input_size, input_size);
    int x = b.maxpool(b.relu(b.conv(b.input(), c1)));
    x = residual_block(b, x, c1);
    x = b.maxpool(b.relu(b.conv(x, c2)));
    x = residual_block(b, x, c2);
    b.name(x, kFineCapture);
    x = b.maxpool(b.relu(b.conv(x, c3)));
    x = residual_block(b, x, c3);
    x = residual_block(b, x, c3);
    b.name(x, kCoarseCapture);
    const int logit = b.dense(b.global_avg_pool(x), 1);
    b.name(logit, kLogitNode);
    b.name(b.sigmoid(logit), "prob");
    return b;
}

namespace {

std::vector<double> forward_probs(const nn::Network<float>& net, const std::vector<const Image*>& imgs) {
    std::vector<double> out;
    out.reserve(imgs.size());
    nn::Workspace<float> ws;
    for (std::size_t start = 0; start < imgs.size(); start += kInferBatch) {
        const std::size_t end = std::min(imgs.size(), start + kInferBatch);
        std::vector<const Image*> chunk(imgs.begin() + static_cast<std::ptrdiff_t>(start),
                                        imgs.begin() + static_cast<std::ptrdiff_t>(end));
        const auto& p = net.forward(ws, stack_images(chunk));
        out.insert(out.end(), p.vec().begin(), p.vec().end());
    }
    return out;
}

bool both_classes(std::span<const std::uint8_t> labels) {
    bool pos = false, neg = false;
    for (auto l : labels) (l ? pos : neg) = true;
    return pos && neg;
}

}  // namespace

ClsTrainResult train_classifier(const std::vector<ClsSample>& samples, const ClsConfig& cfg) {
    if (samples.empty()) throw ArgumentError("train_classifier: empty dataset");
    if (cfg.epochs < 0 || cfg.batch_size <= 0) throw ArgumentError("train_classifier: bad epochs or batch size");
    for (const auto& s : samples) {
        if (s.image.width() != cfg.input_size || s.image.height() != cfg.input_size) {
            throw ShapeError("train_classifier: slice " + s.case_id + " does not match the input size");
        }
    }

    std::vector<std::string> ids;
    for (const auto& s : samples) ids.push_back(s.case_id);
    const auto val_ids = split_validation_cases(ids, cfg.val_fraction, cfg.seed);
    std::vector<const ClsSample*> train, val;
    for (const auto& s : samples) (val_ids.contains(s.case_id) ? val : train).push_back(&s);

    std::vector<std::uint8_t> train_labels;
    for (const auto* s : train) train_labels.push_back(s->label);
    if (!both_classes(train_labels)) throw ArgumentError("train_classifier: training labels contain a single class");
    if (val.empty()) val = train;

    std::vector<const Image*> val_imgs;
    std::vector<std::uint8_t> val_labels;
    for (const auto* s : val) val_imgs.push_back(&s->image), val_labels.push_back(s->label);

    nn::Network<float> net = make_classifier(cfg.input_size, cfg.base_channels).build<float>(cfg.seed);
    std::vector<std::size_t> sizes;
    for (const auto& p : net.params()) sizes.push_back(p.value.size());
    nn::AdamState adam(nn::AdamConfig{cfg.learning_rate}, sizes);

    auto evaluate = [&](const nn::Network<float>& n, double train_loss, int epoch) {
        const auto probs = forward_probs(n, val_imgs);
        const double loss = nn::bce_loss(probs, val_labels).loss;
        const double auc = both_classes(val_labels) ? auc_pair_count(probs, val_labels)
                                                    : std::numeric_limits<double>::quiet_NaN();
        return EpochLog{epoch, train_loss, loss, auc};
    };

    ClsTrainResult result;
    result.model.input_size = cfg.input_size;
    result.log.push_back(evaluate(net, std::numeric_limits<double>::quiet_NaN(), 0));
    double best_loss = result.log.back().val_loss;
    nn::Network<float> best = net;

    std::vector<std::size_t> order(train.size());
    nn::Workspace<float> ws;
    std::vector<Image> batch_imgs;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        Rng rng(mix_seed(cfg.seed, 0xC1A55000ULL + static_cast<std::uint64_t>(epoch)));
        rng.shuffle(order.begin(), order.end());
        double loss_sum = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            batch_imgs.clear();
            std::vector<std::uint8_t> labels;
            for (std::size_t i = start; i < end; ++i) {
                const auto* s = train[order[i]];
                batch_imgs.push_back(cfg.augment ? nn::augment(s->image, rng, cfg.augment_config) : s->image);
                labels.push_back(s->label);
            }
            std::vector<const Image*> ptrs;
            for (const auto& im : batch_imgs) ptrs.push_back(&im);
            const auto& out = net.forward(ws, stack_images(ptrs));
            std::vector<double> pred(out.vec().begin(), out.vec().end());
            const auto loss = nn::bce_loss(pred, labels);
            nn::Tensor<float> grad(out.shape());
            for (std::size_t j = 0; j < grad.size(); ++j) grad[j] = static_cast<float>(loss.grad[j]);
            net.backward(ws, grad);
            nn::adam_step(adam, net.param_spans(), ws.param_grads);
            loss_sum += loss.loss;
            ++batches;
        }
        result.log.push_back(evaluate(net, loss_sum / std::max(1, batches), epoch));
        if (result.log.back().val_loss < best_loss) {
            best_loss = result.log.back().val_loss;
            best = net;
        }
    }
    result.model.net = std::move(best);
    return result;
}

std::vector<double> predict_batch(const ClsModel& model, const std::vector<Image>& slices) {
    std::vector<const Image*> ptrs;
    for (const auto& s : slices) {
        if (s.width() != model.input_size || s.height() != model.input_size) {
            throw ShapeError("classifier expects " + std::to_string(model.input_size) + "x" +
                             std::to_string(model.input_size) + " slices");
        }
        ptrs.push_back(&s);
    }
    if (ptrs.empty()) return {};
    return forward_probs(model.net, ptrs);
}

double predict_slice(const ClsModel& model, const Image& slice) { return predict_batch(model, {slice}).front(); }

SliceMetrics evaluate_slices(std::span<const double> preds, std::span<const std::uint8_t> labels, double threshold) {
    SliceMetrics m;
    m.auc = auc_pair_count(preds, labels);
    m.threshold = threshold;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const bool pred = preds[i] > threshold;
        if (labels[i]) (pred ? m.tp : m.fn) += 1;
        else (pred ? m.fp : m.tn) += 1;
    }
    m.sensitivity = static_cast<double>(m.tp) / (m.tp + m.fn);
    m.specificity = static_cast<double>(m.tn) / (m.tn + m.fp);
    return m;
}

void save_cls_model(const std::filesystem::path& path, const ClsModel& model) {
    KeyValueText extra;
    extra.set("model_kind", "classifier");
    nn::save_model(path, model.net, extra);
}

ClsModel load_cls_model(const std::filesystem::path& path) {
    auto loaded = nn::load_model(path);
    if (loaded.manifest.get_or("model_kind", "") != "classifier") throw FormatError(path.string() + ": not a classifier model");
    for (const char* name : {kFineCapture, kCoarseCapture, kLogitNode}) {
        if (!loaded.net.has_node(name)) throw FormatError(path.string() + ": missing node " + name);
    }
    ClsModel m;
    m.input_size = loaded.net.input_height();
    m.net = std::move(loaded.net);
    return m;
}

}  // namespace lungcam
