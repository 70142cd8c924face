#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "lungcam/error.hpp"
#include "lungcam/rng.hpp"
#include "lungcam/scoring.hpp"
#include "lungcam/stats.hpp"
#include "oracles.hpp"

using namespace lungcam;

namespace {

HeatmapVolume random_heatmap(Dims d, Spacing s, std::uint64_t seed) {
    Rng rng(seed);
    HeatmapVolume h(d, s);
    for (auto& v : h.voxels()) v = rng.bernoulli(0.3) ? static_cast<float>(rng.uniform()) : 0.0f;
    return h;
}

std::vector<double> d(std::initializer_list<double> v) { return v; }

}  // namespace

TEST_SUITE("scoring") {

TEST_CASE("corona score examples") {
    ScoringConfig cfg;
    HeatmapVolume h({4, 4, 2}, {1, 1, 1});
    std::fill(h.voxels().begin(), h.voxels().end(), 0.6f);
    CHECK(corona_score(h, cfg) == 0.0);

    HeatmapVolume three({4, 4, 2}, {1, 1, 1});
    three.at(0, 0, 0) = 0.7f;
    three.at(1, 2, 1) = 0.8f;
    three.at(3, 3, 1) = 0.9f;
    CHECK(corona_score(three, cfg) == doctest::Approx(0.0024).epsilon(1e-7));
}

TEST_CASE("corona score equals the triple-loop evaluation exactly") {
    ScoringConfig cfg;
    for (std::uint64_t s = 0; s < 50; ++s) {
        const auto h = random_heatmap({9, 7, 5}, {0.7, 0.7, 2.5}, s);
        CHECK(corona_score(h, cfg) == oracle::corona_triple_loop(h, cfg.t_activation));
    }
}

TEST_CASE("corona score is monotone and linear in voxel volume") {
    ScoringConfig cfg;
    Rng rng(4);
    for (std::uint64_t s = 0; s < 20; ++s) {
        auto h = random_heatmap({6, 6, 4}, {1, 1, 1}, 100 + s);
        const double base = corona_score(h, cfg);
        auto raised = h;
        for (auto& v : raised.voxels()) v = std::min(1.0f, v + static_cast<float>(rng.uniform(0.0, 0.2)));
        CHECK(corona_score(raised, cfg) >= base);

        ScoringConfig higher = cfg;
        higher.t_activation = 0.8;
        CHECK(corona_score(h, higher) <= base);

        HeatmapVolume scaled(h.dims(), {2, 1.5, 3}, std::vector<float>(h.voxels().begin(), h.voxels().end()));
        CHECK(corona_score(scaled, cfg) == doctest::Approx(9.0 * base).epsilon(1e-12));
    }
}

TEST_CASE("case classification uses a strict threshold") {
    ScoringConfig cfg;
    cfg.case_score_threshold = 0.5;
    CHECK_FALSE(classify_case(0.0, cfg));
    CHECK_FALSE(classify_case(0.5, cfg));
    CHECK(classify_case(0.5000001, cfg));
    cfg.t_activation = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("heatmap assembly places positive maps inside the ROI only") {
    ScoringConfig cfg;
    const Dims dims{10, 8, 3};
    const Spacing sp{1, 1, 1};
    std::vector<Image> maps(3, Image(4, 4, 0.8f));

    const auto none = assemble_heatmap_volume(dims, sp, "c", {0.1, 0.1, 0.1}, maps, {0, 0, 10, 8}, cfg);
    for (float v : none.voxels()) CHECK(v == 0.0f);

    const auto one = assemble_heatmap_volume(dims, sp, "c", {0.1, 0.9, 0.5}, maps, {0, 0, 10, 8}, cfg);
    for (int z = 0; z < 3; ++z)
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 10; ++x) CHECK(one.at(x, y, z) == doctest::Approx(z == 1 ? 0.8f : 0.0f));

    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> probs;
        std::vector<Image> rm;
        for (int z = 0; z < 3; ++z) {
            probs.push_back(rng.uniform());
            Image m(6, 6);
            for (auto& v : m.pixels()) v = static_cast<float>(rng.uniform());
            rm.push_back(m);
        }
        const int x0 = rng.between(0, 5), y0 = rng.between(0, 4);
        const RoiBox roi{x0, y0, rng.between(x0 + 1, 10), rng.between(y0 + 1, 8)};
        const auto h = assemble_heatmap_volume(dims, sp, "c", probs, rm, roi, cfg);
        for (int z = 0; z < 3; ++z)
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 10; ++x) {
                    const float v = h.at(x, y, z);
                    CHECK(v >= 0.0f);
                    CHECK(v <= 1.0f);
                    const bool inside = x >= roi.x0 && x < roi.x1 && y >= roi.y0 && y < roi.y1;
                    if (!inside || !(probs[z] > 0.5)) CHECK(v == 0.0f);
                }
    }
    CHECK_THROWS_AS(assemble_heatmap_volume(dims, sp, "c", {0.9, 0.9}, {maps[0], maps[1]}, {0, 0, 10, 8}, cfg),
                    ShapeError);
    CHECK_THROWS_AS(assemble_heatmap_volume(dims, sp, "c", {0.9, 0.9, 0.9}, maps, {0, 0, 11, 8}, cfg), ShapeError);
}

TEST_CASE("AUC routes agree, including ties") {
    CHECK(auc_pair_count(d({0.8, 0.3, 0.5, 0.1}), std::vector<std::uint8_t>{1, 1, 0, 0}) == 0.75);
    Rng rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 4 + static_cast<int>(rng.below(60));
        std::vector<double> s(n);
        std::vector<std::uint8_t> y(n);
        for (int i = 0; i < n; ++i) {
            s[i] = static_cast<double>(rng.below(8));
            y[i] = static_cast<std::uint8_t>(i < 2 ? i : rng.bernoulli(0.4));
        }
        const double a = auc_pair_count(s, y);
        CHECK(std::abs(a - oracle::auc_pairs(s, y)) < 1e-12);
        CHECK(std::abs(a - auc_mann_whitney(s, y)) < 1e-9);
        const auto curve = roc_curve(s, y);
        CHECK(std::abs(a - trapezoid_auc(curve)) < 1e-9);
        for (std::size_t i = 1; i < curve.size(); ++i) {
            CHECK(curve[i].fpr >= curve[i - 1].fpr);
            CHECK(curve[i].tpr >= curve[i - 1].tpr);
        }
        CHECK(curve.front().fpr == 0.0);
        CHECK(curve.back().tpr == 1.0);

        std::vector<double> t(n);
        for (int i = 0; i < n; ++i) t[i] = std::atan(s[i] - 3.0) * 5.0;
        CHECK(auc_pair_count(t, y) == a);
    }
}

TEST_CASE("bootstrap interval brackets the AUC and is seed-reproducible") {
    const std::vector<double> sep{0.9, 0.8, 0.7, 0.1, 0.2};
    const std::vector<std::uint8_t> ys{1, 1, 1, 0, 0};
    const auto perfect = roc_auc_ci(sep, ys, 200, 3);
    CHECK(perfect.auc == 1.0);
    CHECK(perfect.ci_low == 1.0);
    CHECK(perfect.ci_high == 1.0);

    Rng rng(12);
    std::vector<double> s(60);
    std::vector<std::uint8_t> y(60);
    for (int i = 0; i < 60; ++i) {
        y[i] = static_cast<std::uint8_t>(i % 2);
        s[i] = rng.normal() + (y[i] ? 1.0 : 0.0);
    }
    const auto a = roc_auc_ci(s, y, 500, 7);
    const auto b = roc_auc_ci(s, y, 500, 7);
    CHECK(a.ci_low == b.ci_low);
    CHECK(a.ci_high == b.ci_high);
    CHECK(0.0 <= a.ci_low);
    CHECK(a.ci_low <= a.auc);
    CHECK(a.auc <= a.ci_high);
    CHECK(a.ci_high <= 1.0);
    CHECK(a.ci_high - a.ci_low > 0.05);
    CHECK_THROWS_AS(roc_auc_ci(s, std::vector<std::uint8_t>(60, 1)), ArgumentError);
}

TEST_CASE("Youden threshold matches a brute-force sweep") {
    Rng rng(14);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 6 + static_cast<int>(rng.below(30));
        std::vector<double> s(n);
        std::vector<std::uint8_t> y(n);
        for (int i = 0; i < n; ++i) {
            y[i] = static_cast<std::uint8_t>(i < 2 ? i : rng.bernoulli(0.5));
            s[i] = std::round((rng.normal() + y[i]) * 4.0) / 4.0;
        }
        // every threshold from a fine grid spanning the data
        double best_j = -2.0;
        for (double t = *std::min_element(s.begin(), s.end()) - 1.0; t <= *std::max_element(s.begin(), s.end()) + 0.01;
             t += 0.125) {
            int tp = 0, fn = 0, tn = 0, fp = 0;
            for (int i = 0; i < n; ++i) {
                const bool pos = s[i] > t;
                if (y[i]) pos ? ++tp : ++fn;
                else pos ? ++fp : ++tn;
            }
            best_j = std::max(best_j, double(tp) / (tp + fn) + double(tn) / (tn + fp) - 1.0);
        }
        const auto yp = youden_threshold(s, y);
        CHECK(yp.j == doctest::Approx(best_j).epsilon(1e-12));
        CHECK(yp.j == doctest::Approx(yp.sensitivity + yp.specificity - 1.0));
    }
}

TEST_CASE("rank-sum test: exact examples, symmetry and the two branches") {
    const auto r = wilcoxon_rank_sum(d({1, 2}), d({3, 4}));
    CHECK(r.exact);
    CHECK(r.rank_sum == 3.0);
    CHECK(r.p_value == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    const auto same = wilcoxon_rank_sum(d({1, 2, 3, 4, 5}), d({1, 2, 3, 4, 5}));
    CHECK(same.p_value == doctest::Approx(1.0));

    Rng rng(15);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> a(6), b(6);
        for (auto& v : a) v = rng.uniform();
        for (auto& v : b) v = rng.uniform() + 0.3;
        const auto exact = wilcoxon_rank_sum(a, b, RankTestMethod::Exact);
        const auto normal = wilcoxon_rank_sum(a, b, RankTestMethod::Normal);
        CHECK(exact.p_value == doctest::Approx(oracle::wilcoxon_enumerate(a, b)).epsilon(1e-12));
        CHECK(std::abs(exact.p_value - normal.p_value) < 0.02);
        CHECK(exact.p_value > 0.0);
        CHECK(exact.p_value <= 1.0);
    }
    CHECK_THROWS_AS(wilcoxon_rank_sum(d({}), d({1.0})), ArgumentError);
    CHECK_THROWS_AS(wilcoxon_rank_sum(d({1, 2}), d({2, 3}), RankTestMethod::Exact), ArgumentError);

    // ties use the normal branch with midranks
    const auto tied = wilcoxon_rank_sum(d({1, 2, 2, 3}), d({2, 4, 5, 6}));
    CHECK_FALSE(tied.exact);
    // sorted 1 2 2 2 3 4 5 6: the three 2s share midrank 3
    CHECK(tied.rank_sum == doctest::Approx(1 + 3 + 3 + 5));
    CHECK(tied.median_a == 2.0);
    CHECK(tied.median_b == 4.5);
}

TEST_CASE("median and quantile") {
    CHECK(median(d({3, 1, 2})) == 2.0);
    CHECK(median(d({4, 1, 2, 3})) == 2.5);
    CHECK(quantile(d({0, 10}), 0.25) == 2.5);
    CHECK(quantile(d({5}), 0.9) == 5.0);
}

}  // TEST_SUITE
