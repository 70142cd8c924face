#include <benchmark/benchmark.h>

#include <vector>

#include "lungcam/classifier.hpp"
#include "lungcam/cluster.hpp"
#include "lungcam/localization.hpp"
#include "lungcam/lungseg.hpp"
#include "lungcam/rng.hpp"
#include "lungcam/scoring.hpp"
#include "lungcam/stats.hpp"

using namespace lungcam;

namespace {

nn::Tensor<float> random_batch(int n, int size, std::uint64_t seed) {
    Rng rng(seed);
    nn::Tensor<float> t({n, 1, size, size});
    for (auto& v : t.vec()) v = static_cast<float>(rng.uniform());
    return t;
}

std::vector<Image> random_slices(int n, int size, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Image> out;
    for (int i = 0; i < n; ++i) {
        Image img(size, size);
        for (auto& v : img.pixels()) v = static_cast<float>(rng.uniform());
        out.push_back(std::move(img));
    }
    return out;
}

void BM_ClassifierForward(benchmark::State& state) {
    const int batch = static_cast<int>(state.range(0));
    const auto net = make_classifier(64, 8).build<float>(1);
    const auto x = random_batch(batch, 64, 2);
    nn::Workspace<float> ws;
    for (auto _ : state) benchmark::DoNotOptimize(net.forward(ws, x).vec().data());
    state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_ClassifierForward)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_ClassifierTrainStep(benchmark::State& state) {
    const int batch = static_cast<int>(state.range(0));
    const auto net = make_classifier(64, 8).build<float>(1);
    const auto x = random_batch(batch, 64, 3);
    nn::Workspace<float> ws;
    for (auto _ : state) {
        const auto& y = net.forward(ws, x);
        nn::Tensor<float> g(y.shape(), 1.0f);
        net.backward(ws, g);
        benchmark::DoNotOptimize(ws.param_grads.data());
    }
    state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_ClassifierTrainStep)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_UnetForward(benchmark::State& state) {
    const auto net = make_unet(64, 8).build<float>(1);
    const auto x = random_batch(8, 64, 4);
    nn::Workspace<float> ws;
    for (auto _ : state) benchmark::DoNotOptimize(net.forward(ws, x).vec().data());
    state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_UnetForward)->Unit(benchmark::kMillisecond);

void BM_LocalizeSlices(benchmark::State& state) {
    ClsModel model;
    model.net = make_classifier(64, 8).build<float>(1);
    const auto slices = random_slices(8, 64, 5);
    for (auto _ : state) benchmark::DoNotOptimize(localize_slices(model, slices).data());
    state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_LocalizeSlices)->Unit(benchmark::kMillisecond);

void BM_CoronaScore(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    HeatmapVolume h({n, n, 64}, {0.7, 0.7, 1.5});
    Rng rng(6);
    for (auto& v : h.voxels()) v = static_cast<float>(rng.uniform());
    const ScoringConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(corona_score(h, cfg));
    state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(h.voxels().size() * sizeof(float)));
}
BENCHMARK(BM_CoronaScore)->Arg(64)->Arg(256);

struct ScoredLabels {
    std::vector<double> scores;
    std::vector<std::uint8_t> labels;
};

ScoredLabels scored(int n) {
    Rng rng(7);
    ScoredLabels s;
    for (int i = 0; i < n; ++i) {
        s.labels.push_back(static_cast<std::uint8_t>(i % 2));
        s.scores.push_back(rng.normal() + 0.8 * (i % 2));
    }
    return s;
}

void BM_AucPairCount(benchmark::State& state) {
    const auto s = scored(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(auc_pair_count(s.scores, s.labels));
}
BENCHMARK(BM_AucPairCount)->Arg(100)->Arg(2000);

void BM_AucMannWhitney(benchmark::State& state) {
    const auto s = scored(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(auc_mann_whitney(s.scores, s.labels));
}
BENCHMARK(BM_AucMannWhitney)->Arg(100)->Arg(2000);

void BM_RocBootstrap(benchmark::State& state) {
    const auto s = scored(40);
    for (auto _ : state) benchmark::DoNotOptimize(roc_auc_ci(s.scores, s.labels, 1000).auc);
}
BENCHMARK(BM_RocBootstrap)->Unit(benchmark::kMillisecond);

FeatureMatrix blobs(int n, int d) {
    Rng rng(8);
    FeatureMatrix fm(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) fm.at(i, j) = rng.normal() + 6.0 * (i % 3 == j % 3);
    return fm;
}

void BM_Kmeans(benchmark::State& state) {
    const auto fm = blobs(static_cast<int>(state.range(0)), 32);
    for (auto _ : state) benchmark::DoNotOptimize(kmeans(fm, 3, 1).inertia);
}
BENCHMARK(BM_Kmeans)->Arg(300)->Arg(1500)->Unit(benchmark::kMillisecond);

void BM_Pca2(benchmark::State& state) {
    const auto fm = blobs(1500, static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(pca2(fm).coords.data());
}
BENCHMARK(BM_Pca2)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
