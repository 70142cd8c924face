#include <doctest.h>

#include <thread>

#include "lungcam/classifier.hpp"
#include "lungcam/error.hpp"
#include "lungcam/image.hpp"
#include "lungcam/localization.hpp"
#include "lungcam/rng.hpp"
#include "oracles.hpp"

using namespace lungcam;
using namespace lungcam::nn;

namespace {

Tensor<float> to_batch(const Image& img) {
    return Tensor<float>({1, 1, img.height(), img.width()}, std::vector<float>(img.pixels().begin(), img.pixels().end()));
}

Image random_image(int w, int h, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    Rng rng(seed);
    Image m(w, h);
    for (auto& v : m.pixels()) v = static_cast<float>(rng.uniform(lo, hi));
    return m;
}

// input -> 1x1 conv "A" (identity) -> global average -> "logit"
Network<float> mean_head_net(int size) {
    NetworkBuilder b(1, size, size);
    const int a = b.conv(b.input(), 1, 1);
    b.name(a, "A");
    b.name(b.global_avg_pool(a), "logit");
    auto net = b.build<float>(1);
    net.params()[0].value = {1.0f};
    net.params()[1].value = {0.0f};
    return net;
}

}  // namespace

TEST_SUITE("localization") {

TEST_CASE("mean-head toy net: alpha is 1/Z, and the summed form recovers ReLU(A)") {
    const int size = 4;
    const auto net = mean_head_net(size);
    const Image x = random_image(size, size, 3, -1.0, 1.0);
    const auto maps = gradcam_batch(net, to_batch(x), "A", "logit");
    REQUIRE(maps.size() == 1);
    const Image& cam = maps.front().map;
    CHECK(maps.front().capture == "A");
    const double z = size * size;
    for (int y = 0; y < size; ++y)
        for (int xx = 0; xx < size; ++xx) {
            const double relu = std::max(0.0f, x.at(xx, y));
            CHECK(cam.at(xx, y) == doctest::Approx(relu / z).epsilon(1e-6));
            // summing the gradient instead of averaging scales alpha by Z
            CHECK(cam.at(xx, y) * z == doctest::Approx(relu).epsilon(1e-6));
        }

    Workspace<float> ws;
    const auto& out = net.forward(ws, to_batch(x), {"A"});
    net.backward(ws, Tensor<float>(out.shape(), 1.0f), "logit");
    const auto alpha = channel_weights(ws.captures.at("A"), 0);
    REQUIRE(alpha.size() == 1);
    CHECK(alpha[0] == doctest::Approx(1.0 / z).epsilon(1e-7));
}

TEST_CASE("zero gradients give an all-zero map") {
    NetworkBuilder b(1, 6, 6);
    const int a = b.relu(b.conv(b.input(), 2, 3));
    b.name(a, "A");
    b.name(b.dense(b.global_avg_pool(a), 1), "logit");
    auto net = b.build<float>(9);
    std::fill(net.params()[2].value.begin(), net.params()[2].value.end(), 0.0f);  // detached head
    const auto maps = gradcam_batch(net, to_batch(random_image(6, 6, 1)), "A");
    for (float v : maps.front().map.pixels()) CHECK(v == 0.0f);
}

TEST_CASE("two-channel toy net matches a hand-computed weighted sum") {
    // A_0 = x, A_1 = -2x + 0.5 (1x1 conv); logit = 3 mean(A_0) + 1 mean(A_1)
    // d logit / d A_k = w_k / 9 everywhere, so alpha = (3/9, 1/9) and
    // cam = relu((3x + (-2x + 0.5)) / 9) = relu((x + 0.5) / 9)
    NetworkBuilder b(1, 3, 3);
    const int a = b.conv(b.input(), 2, 1);
    b.name(a, "A");
    b.name(b.dense(b.global_avg_pool(a), 1), "logit");
    auto net = b.build<float>(1);
    net.params()[0].value = {1.0f, -2.0f};
    net.params()[1].value = {0.0f, 0.5f};
    net.params()[2].value = {3.0f, 1.0f};
    net.params()[3].value = {0.25f};
    const Image x(3, 3, std::vector<float>{-1.0f, -0.5f, -0.25f, 0.0f, 0.25f, 0.5f, 1.0f, -2.0f, 2.0f});
    const Image cam = gradcam_batch(net, to_batch(x), "A").front().map;
    const float expected[9] = {0.0f, 0.0f, 0.25f / 9, 0.5f / 9, 0.75f / 9, 1.0f / 9, 1.5f / 9, 0.0f, 2.5f / 9};
    for (int i = 0; i < 9; ++i) CHECK(cam.pixels()[i] == doctest::Approx(expected[i]).epsilon(1e-6));
}

TEST_CASE("unknown capture or target names are rejected") {
    const auto net = mean_head_net(4);
    CHECK_THROWS_AS(gradcam_batch(net, to_batch(Image(4, 4)), "missing"), ArgumentError);
    CHECK_THROWS_AS(gradcam_batch(net, to_batch(Image(4, 4)), "A", "missing"), ArgumentError);
}

TEST_CASE("normalize01 examples and range") {
    const Image m(3, 1, std::vector<float>{0.0f, 2.0f, 4.0f});
    const Image n = normalize01(m);
    CHECK(n.pixels()[0] == 0.0f);
    CHECK(n.pixels()[1] == 0.5f);
    CHECK(n.pixels()[2] == 1.0f);
    const Image flat = normalize01(Image(5, 5, 3.0f));
    for (float v : flat.pixels()) CHECK(v == 0.0f);
    for (std::uint64_t s = 0; s < 20; ++s) {
        const Image r = normalize01(random_image(7, 5, s, -3.0, 8.0));
        CHECK(r.min() == 0.0f);
        CHECK(r.max() == 1.0f);
    }
}

TEST_CASE("fusion: identity, annihilator, pointwise bound, range") {
    const Image coarse = random_image(4, 4, 1);
    const Image ones(8, 8, 1.0f);
    const Image fused = fuse_multiscale(coarse, ones, 16);
    const Image up = oracle::bilinear_reference(coarse, 16, 16);
    for (std::size_t i = 0; i < fused.size(); ++i) CHECK(fused.pixels()[i] == doctest::Approx(up.pixels()[i]).epsilon(1e-6));
    CHECK(fuse_multiscale(coarse, Image(8, 8), 16).max() == 0.0f);
    CHECK(fuse_multiscale(Image(4, 4), ones, 16).max() == 0.0f);
    CHECK_THROWS_AS(fuse_multiscale(coarse, ones, 0), ArgumentError);

    for (std::uint64_t s = 0; s < 1000; ++s) {
        const Image c = normalize01(random_image(4, 4, 2 * s));
        const Image f = normalize01(random_image(8, 8, 2 * s + 1));
        const Image out = fuse_multiscale(c, f, 16);
        const Image uc = resize_bilinear(c, 16, 16), uf = resize_bilinear(f, 16, 16);
        for (std::size_t i = 0; i < out.size(); ++i) {
            const float v = out.pixels()[i];
            REQUIRE(v >= 0.0f);
            REQUIRE(v <= 1.0f);
            REQUIRE(v <= uc.pixels()[i]);
            REQUIRE(v <= uf.pixels()[i]);
        }
    }
}

TEST_CASE("localization is deterministic and safe to run concurrently") {
    const ClsModel model{make_classifier(16, 4).build<float>(5), 16};
    std::vector<Image> slices;
    for (std::uint64_t s = 0; s < 12; ++s) slices.push_back(random_image(16, 16, s));
    const auto serial = localize_slices(model, slices);
    REQUIRE(serial.size() == 12);
    for (const auto& s : serial) {
        CHECK(s.fused.width() == 16);
        CHECK(s.fused.min() >= 0.0f);
        CHECK(s.fused.max() <= 1.0f);
        CHECK(s.fine_cam.width() == 2 * s.coarse_cam.width());
        CHECK(s.probability == doctest::Approx(predict_slice(model, slices[&s - serial.data()])).epsilon(1e-6));
    }
    CHECK(gradcam(model, slices[3], kFineCapture).map == serial[3].fine_cam);

    std::vector<std::vector<SliceLocalization>> results(4);
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t) threads.emplace_back([&, t] { results[t] = localize_slices(model, slices); });
    for (auto& th : threads) th.join();
    for (const auto& r : results)
        for (std::size_t i = 0; i < r.size(); ++i) {
            CHECK(r[i].fused == serial[i].fused);
            CHECK(r[i].feature == serial[i].feature);
            CHECK(r[i].probability == serial[i].probability);
        }
}

}  // TEST_SUITE
