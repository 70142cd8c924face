#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "lungcam/classifier.hpp"
#include "lungcam/cluster.hpp"
#include "lungcam/error.hpp"
#include "lungcam/localization.hpp"
#include "lungcam/rng.hpp"

using namespace lungcam;

namespace {

FeatureMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    FeatureMatrix fm;
    for (std::size_t i = 0; i < rows.size(); ++i) fm.add_row(rows[i], {"c", static_cast<int>(i)});
    return fm;
}

FeatureMatrix gaussian_wells(int per, int d, double sep, double sigma, std::uint64_t seed) {
    Rng rng(seed);
    FeatureMatrix fm;
    std::vector<double> row(d);
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < per; ++i) {
            for (int j = 0; j < d; ++j) row[j] = (j == c % d ? sep * (c + 1) : 0.0) + sigma * rng.normal();
            fm.add_row(row, {"w" + std::to_string(c), i}, std::to_string(c));
        }
    return fm;
}

double sqdist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

}  // namespace

TEST_SUITE("cluster_analysis") {

TEST_CASE("feature rows reject non-finite values and mismatched widths") {
    FeatureMatrix fm;
    fm.add_row(std::vector<double>{1, 2}, {"a", 0});
    CHECK_THROWS_AS(fm.add_row(std::vector<double>{1}, {"a", 1}), ShapeError);
    CHECK_THROWS_AS(fm.add_row(std::vector<double>{1, NAN}, {"a", 1}), ArgumentError);
}

TEST_CASE("single-channel toy net: feature is mean(A) times mean(dlogit/dA)") {
    // input 4x4 -> 1x1 conv "fine" -> pool -> 1x1 conv "coarse" -> gap -> dense "logit" -> sigmoid
    nn::NetworkBuilder b(1, 4, 4);
    const int fine = b.conv(b.input(), 1, 1);
    b.name(fine, kFineCapture);
    const int coarse = b.conv(b.maxpool(fine), 1, 1);
    b.name(coarse, kCoarseCapture);
    const int logit = b.dense(b.global_avg_pool(coarse), 1);
    b.name(logit, kLogitNode);
    b.sigmoid(logit);
    auto net = b.build<float>(1);
    net.params()[0].value = {1.0f};
    net.params()[1].value = {0.0f};
    net.params()[2].value = {2.0f};
    net.params()[3].value = {1.0f};
    net.params()[4].value = {0.5f};
    net.params()[5].value = {0.0f};
    const ClsModel model{net, 4};

    const Image x(4, 4, std::vector<float>{1, 2, 0, 0, 3, 4, 0, 1, 0, 0, 2, 0, 5, 0, 0, 1});
    // pooled maxima {4, 1, 5, 2}; coarse = 2 p + 1 = {9, 3, 11, 5}, mean 7
    // logit = 0.5 mean(coarse) so d logit / d coarse = 0.5 / 4 everywhere
    const auto f = extract_feature(model, x);
    REQUIRE(f.size() == 1);
    CHECK(f[0] == doctest::Approx(7.0 * 0.125).epsilon(1e-6));
    CHECK(extract_feature(model, x) == f);

    auto dead = net;
    dead.params()[4].value = {0.0f};
    CHECK(extract_feature(ClsModel{dead, 4}, x)[0] == 0.0);
}

TEST_CASE("zscore: closed form, constant column, round trip") {
    const auto z = zscore(from_rows({{1, 5}, {2, 5}, {3, 5}}));
    CHECK(z.at(0, 0) == doctest::Approx(-1.224744871391589));
    CHECK(z.at(1, 0) == doctest::Approx(0.0));
    CHECK(z.at(2, 0) == doctest::Approx(1.224744871391589));
    for (int i = 0; i < 3; ++i) CHECK(z.at(i, 1) == 0.0);
    CHECK_THROWS_AS(zscore(from_rows({{1, 2}})), ArgumentError);

    Rng rng(3);
    std::vector<std::vector<double>> rows(25, std::vector<double>(6));
    for (auto& r : rows)
        for (auto& v : r) v = rng.normal(5.0, 3.0);
    const auto fm = from_rows(rows);
    ZscoreParams params;
    const auto n = zscore(fm, &params);
    for (int j = 0; j < 6; ++j) {
        double m = 0.0, v = 0.0;
        for (int i = 0; i < n.rows; ++i) m += n.at(i, j);
        m /= n.rows;
        for (int i = 0; i < n.rows; ++i) v += (n.at(i, j) - m) * (n.at(i, j) - m);
        CHECK(std::abs(m) < 1e-9);
        CHECK(std::sqrt(v / n.rows) == doctest::Approx(1.0).epsilon(1e-12));
    }
    const auto back = unzscore(n, params);
    for (std::size_t i = 0; i < fm.data.size(); ++i) CHECK(std::abs(back.data[i] - fm.data[i]) < 1e-9);
}

TEST_CASE("kmeans closed-form cases") {
    const auto fm = from_rows({{0, 0}, {1, 0}, {0, 1}, {10, 10}, {11, 10}, {10, 11}, {-10, 5}, {-9, 5}, {-10, 6}});
    const auto m = kmeans(fm, 3, 1);
    std::vector<std::vector<double>> expected{{-29.0 / 3, 16.0 / 3}, {1.0 / 3, 1.0 / 3}, {31.0 / 3, 31.0 / 3}};
    for (int c = 0; c < 3; ++c)
        for (int j = 0; j < 2; ++j) CHECK(m.centroid(c)[j] == doctest::Approx(expected[c][j]).epsilon(1e-12));

    const auto one = kmeans(fm, 1, 1);
    double total = 0.0;
    std::vector<double> mean(2, 0.0);
    for (int i = 0; i < fm.rows; ++i)
        for (int j = 0; j < 2; ++j) mean[j] += fm.at(i, j) / fm.rows;
    for (int i = 0; i < fm.rows; ++i) total += sqdist(fm.row(i), mean);
    CHECK(one.inertia == doctest::Approx(total).epsilon(1e-12));
    CHECK(one.centroid(0)[0] == doctest::Approx(mean[0]));

    CHECK(kmeans(fm, fm.rows, 1).inertia == 0.0);
    CHECK_THROWS_AS(kmeans(fm, 10, 1), ArgumentError);
    CHECK_THROWS_AS(kmeans(fm, 0, 1), ArgumentError);
}

TEST_CASE("kmeans invariants: nearest centroid, inertia, monotone runs, permutation") {
    Rng rng(19);
    for (int trial = 0; trial < 10; ++trial) {
        const auto fm = gaussian_wells(15, 4, 3.0, 1.5, 100 + trial);
        const auto m = kmeans(fm, 4, trial);
        double inertia = 0.0;
        for (int i = 0; i < fm.rows; ++i) {
            const double own = sqdist(fm.row(i), m.centroid(m.assignment[i]));
            for (int c = 0; c < m.k; ++c) CHECK(own <= sqdist(fm.row(i), m.centroid(c)) + 1e-12);
            CHECK(m.distance[i] == doctest::Approx(std::sqrt(own)));
            inertia += own;
        }
        CHECK(std::abs(inertia - m.inertia) < 1e-9);
        CHECK(m.runs.size() == 10);
        for (const auto& run : m.runs)
            for (std::size_t i = 1; i < run.inertia.size(); ++i) CHECK(run.inertia[i] <= run.inertia[i - 1] + 1e-12);

        // a shuffled copy gives the same centroids and the same per-slice clusters
        std::vector<int> order(fm.rows);
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order.begin(), order.end());
        FeatureMatrix shuffled;
        for (int i : order) shuffled.add_row(fm.row(i), fm.ids[i]);
        const auto ms = kmeans(shuffled, 4, trial);
        CHECK(ms.centroids == m.centroids);
        for (int i = 0; i < fm.rows; ++i) CHECK(ms.assignment[i] == m.assignment[order[i]]);
    }
}

TEST_CASE("elbow selection") {
    const auto wells = gaussian_wells(30, 3, 10.0, 0.5, 7);
    const auto e = elbow_select(zscore(wells), 8, 1);
    CHECK(e.k == 3);
    CHECK(e.inertia.size() == 8);

    CHECK(elbow_from_curve({10, 8, 6, 4, 2}) == 2);  // linear: every interior k ties
    CHECK(elbow_from_curve({5, 5, 5}) == 1);
    CHECK(elbow_from_curve({5, 1}) == 2);
    CHECK(elbow_from_curve({100, 20, 15, 12}) == 2);

    const auto small = elbow_select(from_rows({{0, 0}, {1, 1}, {5, 5}}), 8, 1);
    CHECK(small.shrunk);
    CHECK(small.k_max == 3);

    // one tight blob: no structure beyond a single split
    Rng rng(2);
    FeatureMatrix blob;
    for (int i = 0; i < 90; ++i) blob.add_row(std::vector<double>{rng.normal()}, {"b", i});
    CHECK(elbow_select(zscore(blob), 4, 1).k <= 2);
}

TEST_CASE("symmetric eigen solver and PCA agree with a dense oracle") {
    Rng rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::vector<double>> rows(10, std::vector<double>(5));
        for (auto& r : rows)
            for (auto& v : r) v = rng.normal();
        const auto fm = from_rows(rows);
        const auto proj = pca2(fm);

        Eigen::MatrixXd X(10, 5);
        for (int i = 0; i < 10; ++i)
            for (int j = 0; j < 5; ++j) X(i, j) = rows[i][j];
        const Eigen::MatrixXd C = X.rowwise() - X.colwise().mean();
        const Eigen::MatrixXd cov = C.transpose() * C / 9.0;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
        const auto ev = es.eigenvalues();  // ascending
        for (int i = 0; i < 5; ++i) CHECK(std::abs(proj.eigenvalues[i] - ev(4 - i)) < 1e-8);

        for (int a = 0; a < 2; ++a) {
            double norm = 0.0, dot = 0.0;
            for (int j = 0; j < 5; ++j) {
                norm += proj.axes[a * 5 + j] * proj.axes[a * 5 + j];
                dot += proj.axes[j] * proj.axes[5 + j];
            }
            CHECK(std::abs(norm - 1.0) < 1e-10);
            CHECK(std::abs(dot) < 1e-10);
            const Eigen::VectorXd v = es.eigenvectors().col(4 - a);
            double cos = 0.0;
            for (int j = 0; j < 5; ++j) cos += v(j) * proj.axes[a * 5 + j];
            CHECK(std::abs(std::abs(cos) - 1.0) < 1e-8);
        }
        CHECK(proj.explained[0] >= proj.explained[1]);
        double v1 = 0.0, v2 = 0.0;
        for (int i = 0; i < 10; ++i) {
            v1 += proj.coords[2 * i] * proj.coords[2 * i];
            v2 += proj.coords[2 * i + 1] * proj.coords[2 * i + 1];
        }
        CHECK(v1 >= v2);
    }
}

TEST_CASE("PCA special cases") {
    const auto line = pca2(from_rows({{0, 0}, {1, 2}, {2, 4}, {-1, -2}}));
    CHECK(line.axes[0] == doctest::Approx(1.0 / std::sqrt(5.0)));
    CHECK(line.axes[1] == doctest::Approx(2.0 / std::sqrt(5.0)));
    CHECK(line.explained[1] == doctest::Approx(0.0).epsilon(1e-12));

    const std::vector<std::vector<double>> pts{{0, 0}, {3, 1}, {-2, 4}, {1, -1}, {2, 2}};
    const auto p = pca2(from_rows(pts));
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = 0; j < pts.size(); ++j) {
            const double orig = sqdist(pts[i], pts[j]);
            const double proj = sqdist(std::span<const double>(p.coords.data() + 2 * i, 2),
                                       std::span<const double>(p.coords.data() + 2 * j, 2));
            CHECK(proj == doctest::Approx(orig).epsilon(1e-12));
        }
    CHECK_THROWS_AS(pca2(from_rows({{0, 0}, {1, 1}})), ArgumentError);
}

TEST_CASE("representatives are the nearest members, stable under far outliers") {
    const auto fm = from_rows({{0.0}, {0.1}, {-0.2}, {0.3}, {0.05}, {10.0}, {10.2}});
    const auto m = kmeans(fm, 2, 1);
    const auto reps = representatives(m, fm, 4);
    REQUIRE(reps.size() == 2);
    // brute-force: sort members of cluster 0 by distance
    std::vector<std::pair<double, int>> members;
    for (int i = 0; i < fm.rows; ++i)
        if (m.assignment[i] == 0) members.push_back({std::abs(fm.at(i, 0) - m.centroid(0)[0]), i});
    std::sort(members.begin(), members.end());
    for (std::size_t r = 0; r < reps[0].size(); ++r) CHECK(reps[0][r] == members[r].second);
    CHECK(reps[1].size() == 2);  // smaller than m: all members

    // a far point added to a fixed clustering leaves the nearest four alone
    ClusterModel fixed = m;
    FeatureMatrix more = fm;
    more.add_row(std::vector<double>{-3.0}, {"c", 99});
    fixed.assignment.push_back(0);
    fixed.distance.push_back(std::abs(-3.0 - m.centroid(0)[0]));
    CHECK(representatives(fixed, more, 4)[0] == reps[0]);
}

TEST_CASE("purity counts the majority label per cluster") {
    ClusterModel m;
    m.k = 2;
    m.assignment = {0, 0, 0, 1, 1};
    const auto p = cluster_purity(m, {"a", "a", "b", "c", "c"});
    CHECK(p[0] == doctest::Approx(2.0 / 3.0));
    CHECK(p[1] == 1.0);
}

}  // TEST_SUITE
