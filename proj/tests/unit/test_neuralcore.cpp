#include <doctest.h>

#include <cmath>

#include "lungcam/error.hpp"
#include "lungcam/files.hpp"
#include "lungcam/nn/adam.hpp"
#include "lungcam/nn/augment.hpp"
#include "lungcam/nn/gradcheck.hpp"
#include "lungcam/nn/loss.hpp"
#include "lungcam/nn/model_io.hpp"
#include "lungcam/nn/network.hpp"
#include "lungcam/rng.hpp"
#include "oracles.hpp"

using namespace lungcam;
using namespace lungcam::nn;

namespace {

Tensor<double> random_tensor(Shape4 s, std::uint64_t seed) {
    Rng rng(seed);
    Tensor<double> t(s);
    for (auto& v : t.vec()) v = rng.uniform(-1.0, 1.0);
    return t;
}

}  // namespace

TEST_SUITE("neuralcore") {

TEST_CASE("identity 1x1 conv passes the input through") {
    NetworkBuilder b(3, 5, 4);
    b.conv(b.input(), 3, 1);
    auto net = b.build<double>(1);
    auto& w = net.params()[0].value;  // [out][in]
    std::fill(w.begin(), w.end(), 0.0);
    for (int c = 0; c < 3; ++c) w[c * 3 + c] = 1.0;
    std::fill(net.params()[1].value.begin(), net.params()[1].value.end(), 0.0);

    const auto x = random_tensor({2, 3, 5, 4}, 9);
    Workspace<double> ws;
    CHECK(net.forward(ws, x).vec() == x.vec());
}

TEST_CASE("zero input through conv and relu with zero bias is zero") {
    NetworkBuilder b(2, 6, 6);
    b.relu(b.conv(b.input(), 4));
    auto net = b.build<float>(5);
    std::fill(net.params()[1].value.begin(), net.params()[1].value.end(), 0.0f);
    Workspace<float> ws;
    const auto& y = net.forward(ws, Tensor<float>({1, 2, 6, 6}));
    for (float v : y.vec()) CHECK(v == 0.0f);
}

TEST_CASE("two-layer net matches hand-computed arithmetic") {
    // 1x2x2 input -> 3x3 conv (1 channel, same padding) -> relu -> gap -> dense(1)
    NetworkBuilder b(1, 2, 2);
    b.dense(b.global_avg_pool(b.relu(b.conv(b.input(), 1))), 1);
    auto net = b.build<double>(1);
    net.params()[0].value = {0, 0, 0, 0, 1, 2, 0, -1, 0};  // kernel rows ky=-1..1
    net.params()[1].value = {0.5};
    net.params()[2].value = {3.0};
    net.params()[3].value = {-1.0};
    Tensor<double> x({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4});
    // conv at (y,x): x[y][x] + 2 x[y][x+1] - x[y+1][x] + 0.5
    //   (0,0): 1 + 4 - 3 + .5 = 2.5   (0,1): 2 + 0 - 4 + .5 = -1.5
    //   (1,0): 3 + 8 - 0 + .5 = 11.5  (1,1): 4 + 0 - 0 + .5 = 4.5
    // relu, mean = (2.5 + 0 + 11.5 + 4.5) / 4 = 4.625; dense: 3 * 4.625 - 1
    Workspace<double> ws;
    CHECK(net.forward(ws, x)[0] == doctest::Approx(12.875).epsilon(1e-14));
}

TEST_CASE("forward and backward reject misuse") {
    NetworkBuilder b(1, 4, 4);
    b.name(b.relu(b.conv(b.input(), 2)), "act");
    const auto net = b.build<double>(2);
    Workspace<double> ws;
    CHECK_THROWS_AS(net.forward(ws, Tensor<double>({1, 2, 4, 4})), ShapeError);
    CHECK_THROWS_AS(net.forward(ws, Tensor<double>({1, 1, 4, 4}), {"nope"}), ArgumentError);
    Workspace<double> fresh;
    CHECK_THROWS_AS(net.backward(fresh, Tensor<double>({1, 2, 4, 4})), ArgumentError);
    net.forward(ws, Tensor<double>({1, 1, 4, 4}), {"act"});
    CHECK_THROWS_AS(net.backward(ws, Tensor<double>({1, 1, 4, 4})), ShapeError);

    CHECK_THROWS_AS(b.name(0, "act"), ArgumentError);
    NetworkBuilder odd(1, 5, 5);
    CHECK_THROWS_AS(odd.maxpool(odd.input()), ShapeError);
}

TEST_CASE("captures record activation and gradient of matching shape") {
    NetworkBuilder b(1, 8, 8);
    const int a = b.relu(b.conv(b.input(), 3));
    b.name(a, "feat");
    b.dense(b.global_avg_pool(a), 1);
    const auto net = b.build<double>(4);
    Workspace<double> ws;
    const auto& y = net.forward(ws, random_tensor({2, 1, 8, 8}, 1), {"feat"});
    net.backward(ws, Tensor<double>(y.shape(), 1.0));
    const auto& cap = ws.captures.at("feat");
    CHECK(cap.activation.shape() == Shape4{2, 3, 8, 8});
    CHECK(cap.gradient.shape() == cap.activation.shape());
}

TEST_CASE("zero output gradient gives zero parameter gradients") {
    NetworkBuilder b(1, 8, 8);
    b.sigmoid(b.dense(b.global_avg_pool(b.maxpool(b.relu(b.conv(b.input(), 4)))), 1));
    const auto net = b.build<double>(3);
    Workspace<double> ws;
    const auto& y = net.forward(ws, random_tensor({3, 1, 8, 8}, 2));
    net.backward(ws, Tensor<double>(y.shape(), 0.0));
    for (const auto& g : ws.param_grads)
        for (double v : g) CHECK(v == 0.0);
}

TEST_CASE("dense layer with squared error has gradient 2(pred - t) x") {
    NetworkBuilder b(4, 1, 1);
    b.dense(b.input(), 1);
    auto net = b.build<double>(8);
    const auto x = random_tensor({1, 4, 1, 1}, 6);
    const double target = 0.25;
    Workspace<double> ws;
    const double pred = net.forward(ws, x)[0];
    net.backward(ws, Tensor<double>({1, 1, 1, 1}, 2.0 * (pred - target)));
    for (int i = 0; i < 4; ++i) CHECK(ws.param_grads[0][i] == doctest::Approx(2.0 * (pred - target) * x[i]));
    CHECK(ws.param_grads[1][0] == doctest::Approx(2.0 * (pred - target)));
}

TEST_CASE("backprop agrees with central differences for every layer kind") {
    const auto results = gradcheck_all_layers(10, 100);
    CHECK(results.size() >= 10);
    for (const auto& r : results) {
        INFO(r.label);
        CHECK(r.checked > 0);
        CHECK(r.max_rel_error < 1e-3);
    }
}

TEST_CASE("relative error is zero on agreement and floored near zero") {
    CHECK(relative_error(1.0, 1.0) == 0.0);
    CHECK(relative_error(1.0, 2.0) == doctest::Approx(0.5));
    CHECK(relative_error(0.0, 1e-9) == doctest::Approx(1e-3));
}

TEST_CASE("binary cross-entropy matches a scalar recomputation") {
    std::vector<double> p{0.5};
    std::vector<std::uint8_t> y{1};
    CHECK(bce_loss(p, y).loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    p = {1.0 - 1e-7};
    CHECK(bce_loss(p, y).loss == doctest::Approx(1e-7).epsilon(1e-3));
    p = {1.0};  // clamped
    CHECK(std::isfinite(bce_loss(p, std::vector<std::uint8_t>{0}).loss));

    Rng rng(5);
    std::vector<double> pr(37);
    std::vector<std::uint8_t> lb(37);
    for (std::size_t i = 0; i < pr.size(); ++i) {
        pr[i] = rng.uniform(0.01, 0.99);
        lb[i] = rng.bernoulli(0.4);
    }
    const auto r = bce_loss(pr, lb);
    double sum = 0.0;
    for (std::size_t i = 0; i < pr.size(); ++i) {
        sum += lb[i] ? -std::log(pr[i]) : -std::log(1.0 - pr[i]);
        const double g = (lb[i] ? -1.0 / pr[i] : 1.0 / (1.0 - pr[i])) / 37.0;
        CHECK(r.grad[i] == doctest::Approx(g).epsilon(1e-12));
    }
    CHECK(r.loss == doctest::Approx(sum / 37.0).epsilon(1e-12));
    CHECK_THROWS_AS(bce_loss(pr, std::vector<std::uint8_t>(3)), ShapeError);
}

TEST_CASE("soft dice loss is zero for a perfect prediction") {
    std::vector<double> t{1, 0, 1, 1, 0, 0, 0, 0};
    const auto r = soft_dice_loss(t, t, 2);
    // second sample is empty: (0 + 1) / (0 + 0 + 1) = 1 -> loss 0
    CHECK(r.loss == doctest::Approx(0.0));
    std::vector<double> zero(8, 0.0);
    CHECK(soft_dice_loss(zero, t, 2).loss > 0.3);
    CHECK_THROWS_AS(soft_dice_loss(zero, t, 3), ShapeError);
}

TEST_CASE("adam: zero gradient, first step and a hand-iterated trajectory") {
    {
        AdamState st({1e-3}, {2});
        std::vector<double> p{1.0, -2.0};
        adam_step<double>(st, {std::span<double>(p)}, {{0.0, 0.0}});
        CHECK(p == std::vector<double>{1.0, -2.0});
        CHECK(st.step == 1);
        // momentum carries the parameter on even when the gradient is zero
        st.m[0] = {0.5, 0.5};
        adam_step<double>(st, {std::span<double>(p)}, {{0.0, 0.0}});
        CHECK(st.m[0][0] == doctest::Approx(0.45));
        CHECK(p[0] < 1.0);
    }
    {
        AdamState st({1e-4}, {3});
        std::vector<double> p{0.0, 0.0, 0.0};
        adam_step<double>(st, {std::span<double>(p)}, {{3.0, -0.02, 1e3}});
        CHECK(p[0] == doctest::Approx(-1e-4).epsilon(1e-6));
        CHECK(p[1] == doctest::Approx(1e-4).epsilon(1e-4));
        CHECK(p[2] == doctest::Approx(-1e-4).epsilon(1e-6));
    }
    {
        AdamState st({1e-4}, {1});
        std::vector<double> p{0.0};
        double m = 0, v = 0, x = 0;
        for (int t = 1; t <= 3; ++t) {
            adam_step<double>(st, {std::span<double>(p)}, {{1.0}});
            m = 0.9 * m + 0.1;
            v = 0.999 * v + 0.001;
            const double mh = m / (1 - std::pow(0.9, t));
            const double vh = v / (1 - std::pow(0.999, t));
            x -= 1e-4 * mh / (std::sqrt(vh) + 1e-8);
            CHECK(p[0] == doctest::Approx(x).epsilon(1e-12));
        }
    }
    AdamState st({1e-4}, {2});
    std::vector<double> p{0.0};
    CHECK_THROWS_AS(adam_step<double>(st, {std::span<double>(p)}, {{1.0}}), ShapeError);
}

TEST_CASE("augmentation: identity plan, flip involution, determinism") {
    Rng src(3);
    Image img(16, 16);
    for (auto& v : img.pixels()) v = static_cast<float>(src.uniform());

    CHECK(apply_augment(img, AugmentPlan{}) == img);
    AugmentConfig never{0.0, 15.0, 0.0, 0.0, 0.9};
    Rng r0(1);
    CHECK(augment(img, r0, never) == img);

    AugmentPlan flip;
    flip.flip = true;
    CHECK(apply_augment(apply_augment(img, flip), flip) == img);
    CHECK_FALSE(apply_augment(img, flip) == img);

    Rng a(77), b(77);
    for (int i = 0; i < 20; ++i) CHECK(augment(img, a) == augment(img, b));

    Rng c(5);
    for (int i = 0; i < 200; ++i) {
        const auto plan = draw_augment_plan(c, 16);
        CHECK(std::abs(plan.degrees) <= 15.0);
        if (plan.crop) {
            CHECK(plan.crop_size == 14);  // round(0.9 * 16)
            CHECK(plan.crop_x + plan.crop_size <= 16);
        }
    }
}

TEST_CASE("model files round-trip and corrupt payloads are rejected") {
    oracle::TempDir dir("nn_model");
    NetworkBuilder b(1, 8, 8);
    const int f = b.relu(b.conv(b.input(), 4));
    b.name(f, "feat");
    b.sigmoid(b.dense(b.global_avg_pool(b.concat(f, b.upsample(b.maxpool(f), UpsampleMode::Bilinear))), 1));
    const auto net = b.build<float>(12);
    KeyValueText extra;
    extra.set("note", "test");
    save_model(dir / "m.model", net, extra);
    const auto loaded = load_model(dir / "m.model");
    CHECK(loaded.net == net);
    CHECK(loaded.manifest.get("note") == "test");
    CHECK(weights_digest(loaded.net) == weights_digest(net));
    CHECK_FALSE(weights_digest(b.build<float>(13)) == weights_digest(net));

    auto raw = read_file(dir / "m.weights");
    write_file_atomic(dir / "m.weights", raw.substr(0, raw.size() - 4));
    CHECK_THROWS_AS(load_model(dir / "m.model"), FormatError);
    CHECK_THROWS_AS(load_model(dir / "absent.model"), IoError);
}

TEST_CASE("forward outputs stay finite and builds are seed-deterministic") {
    NetworkBuilder b(1, 16, 16);
    const int c = b.relu(b.conv(b.input(), 4));
    b.sigmoid(b.dense(b.global_avg_pool(b.add(c, b.relu(b.conv(c, 4)))), 1));
    CHECK(b.build<float>(1) == b.build<float>(1));
    const auto net = b.build<float>(1);
    Workspace<float> ws;
    Tensor<float> x({4, 1, 16, 16});
    Rng rng(2);
    for (auto& v : x.vec()) v = static_cast<float>(rng.uniform(-100.0, 100.0));
    CHECK(net.forward(ws, x).all_finite());
}

}  // TEST_SUITE
