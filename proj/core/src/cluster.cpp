#include "lungcam/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "lungcam/error.hpp"
#include "lungcam/localization.hpp"
#include "lungcam/rng.hpp"

namespace lungcam {

void FeatureMatrix::add_row(std::span<const double> values, SliceId id, std::string label) {
    if (rows == 0 && cols == 0) cols = static_cast<int>(values.size());
    if (static_cast<int>(values.size()) != cols) throw ShapeError("feature row has the wrong length");
    for (double v : values)
        if (!std::isfinite(v)) throw ArgumentError("feature values must be finite");
    data.insert(data.end(), values.begin(), values.end());
    ids.push_back(std::move(id));
    labels.push_back(std::move(label));
    ++rows;
}

std::vector<double> extract_feature(const ClsModel& model, const Image& roi_slice) {
    return localize_slices(model, {roi_slice}).front().feature;
}

FeatureMatrix zscore(const FeatureMatrix& features, ZscoreParams* params) {
    if (features.rows < 2) throw ArgumentError("zscore needs at least two rows");
    const int n = features.rows, d = features.cols;
    ZscoreParams p;
    p.mean.assign(d, 0.0);
    p.std.assign(d, 0.0);
    for (int j = 0; j < d; ++j) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += features.at(i, j);
        const double mean = s / n;
        double ss = 0.0;
        for (int i = 0; i < n; ++i) ss += (features.at(i, j) - mean) * (features.at(i, j) - mean);
        p.mean[j] = mean;
        p.std[j] = std::sqrt(ss / n);
    }
    FeatureMatrix out = features;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j)
            out.at(i, j) = p.std[j] > 0.0 ? (features.at(i, j) - p.mean[j]) / p.std[j] : 0.0;
    if (params) *params = std::move(p);
    return out;
}

FeatureMatrix unzscore(const FeatureMatrix& normalized, const ZscoreParams& params) {
    if (params.mean.size() != static_cast<std::size_t>(normalized.cols)) throw ShapeError("unzscore: width mismatch");
    FeatureMatrix out = normalized;
    for (int i = 0; i < out.rows; ++i)
        for (int j = 0; j < out.cols; ++j) out.at(i, j) = normalized.at(i, j) * params.std[j] + params.mean[j];
    return out;
}

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

struct Lloyd {
    std::vector<double> centroids;
    std::vector<int> assignment;
    double inertia = 0.0;
    KMeansRun run;
};

// Assigns every row to its nearest centroid (lowest index on ties); returns inertia.
double assign(const FeatureMatrix& x, const std::vector<double>& centroids, int k, std::vector<int>& assignment) {
    const int d = x.cols;
    double inertia = 0.0;
    for (int i = 0; i < x.rows; ++i) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
            const double dist = sq_dist(x.row(i), {centroids.data() + static_cast<std::size_t>(c) * d, static_cast<std::size_t>(d)});
            if (dist < best_d) best_d = dist, best = c;
        }
        assignment[i] = best;
        inertia += best_d;
    }
    return inertia;
}

std::vector<double> plus_plus_seeds(const FeatureMatrix& x, int k, Rng& rng) {
    const int d = x.cols;
    std::vector<double> centroids;
    const auto first = static_cast<int>(rng.below(static_cast<std::uint64_t>(x.rows)));
    centroids.insert(centroids.end(), x.row(first).begin(), x.row(first).end());
    std::vector<double> nearest(x.rows, std::numeric_limits<double>::infinity());
    for (int c = 1; c < k; ++c) {
        const std::span<const double> last(centroids.data() + static_cast<std::size_t>(c - 1) * d, d);
        double total = 0.0;
        for (int i = 0; i < x.rows; ++i) {
            nearest[i] = std::min(nearest[i], sq_dist(x.row(i), last));
            total += nearest[i];
        }
        int pick = x.rows - 1;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            for (int i = 0; i < x.rows; ++i) {
                acc += nearest[i];
                if (acc > target) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<int>(rng.below(static_cast<std::uint64_t>(x.rows)));
        }
        centroids.insert(centroids.end(), x.row(pick).begin(), x.row(pick).end());
    }
    return centroids;
}

Lloyd run_lloyd(const FeatureMatrix& x, int k, Rng& rng, int max_iterations) {
    const int d = x.cols;
    Lloyd r;
    r.centroids = plus_plus_seeds(x, k, rng);
    r.assignment.assign(x.rows, -1);
    std::vector<int> next(x.rows);
    r.inertia = assign(x, r.centroids, k, r.assignment);
    r.run.inertia.push_back(r.inertia);
    for (int iter = 1; iter < max_iterations; ++iter) {
        std::vector<double> sums(static_cast<std::size_t>(k) * d, 0.0);
        std::vector<int> counts(k, 0);
        for (int i = 0; i < x.rows; ++i) {
            const int c = r.assignment[i];
            ++counts[c];
            for (int j = 0; j < d; ++j) sums[static_cast<std::size_t>(c) * d + j] += x.at(i, j);
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;  // an empty cluster keeps its centroid
            for (int j = 0; j < d; ++j) r.centroids[static_cast<std::size_t>(c) * d + j] = sums[static_cast<std::size_t>(c) * d + j] / counts[c];
        }
        const double inertia = assign(x, r.centroids, k, next);
        r.run.inertia.push_back(inertia);
        r.inertia = inertia;
        const bool stable = next == r.assignment;
        r.assignment.swap(next);
        if (stable) break;
    }
    return r;
}

}  // namespace

ClusterModel kmeans(const FeatureMatrix& features, int k, std::uint64_t seed, int n_restarts, int max_iterations) {
    if (k < 1 || k > features.rows) throw ArgumentError("kmeans needs 1 <= k <= number of rows");
    if (n_restarts < 1 || max_iterations < 1) throw ArgumentError("kmeans needs at least one restart and iteration");
    const int n = features.rows, d = features.cols;

    // canonical order: lexicographic by values
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        const auto ra = features.row(a), rb = features.row(b);
        return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
    });
    FeatureMatrix sorted(n, d);
    for (int i = 0; i < n; ++i) std::copy(features.row(order[i]).begin(), features.row(order[i]).end(), sorted.row(i).begin());

    ClusterModel model;
    model.k = k;
    model.dims = d;
    Lloyd best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (int r = 0; r < n_restarts; ++r) {
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(r)));
        Lloyd run = run_lloyd(sorted, k, rng, max_iterations);
        run.run.restart = r;
        model.runs.push_back(run.run);
        if (run.inertia < best.inertia) best = std::move(run);
    }

    // relabel clusters so centroids are in lexicographic order
    std::vector<int> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::stable_sort(perm.begin(), perm.end(), [&](int a, int b) {
        const auto* ca = best.centroids.data() + static_cast<std::size_t>(a) * d;
        const auto* cb = best.centroids.data() + static_cast<std::size_t>(b) * d;
        return std::lexicographical_compare(ca, ca + d, cb, cb + d);
    });
    std::vector<int> new_label(k);
    for (int c = 0; c < k; ++c) new_label[perm[c]] = c;
    model.centroids.resize(static_cast<std::size_t>(k) * d);
    for (int c = 0; c < k; ++c)
        std::copy_n(best.centroids.data() + static_cast<std::size_t>(perm[c]) * d, d,
                    model.centroids.data() + static_cast<std::size_t>(c) * d);

    model.assignment.assign(n, 0);
    model.distance.assign(n, 0.0);
    model.inertia = 0.0;
    for (int i = 0; i < n; ++i) {
        const int c = new_label[best.assignment[i]];
        const double sq = sq_dist(sorted.row(i), model.centroid(c));
        model.assignment[order[i]] = c;
        model.distance[order[i]] = std::sqrt(sq);
        model.inertia += sq;
    }
    return model;
}

int elbow_from_curve(const std::vector<double>& inertia) {
    const int k_max = static_cast<int>(inertia.size());
    if (k_max < 1) throw ArgumentError("elbow_from_curve: empty curve");
    if (k_max == 1) return 1;
    if (k_max == 2) return inertia[1] < inertia[0] ? 2 : 1;
    const auto [lo_it, hi_it] = std::minmax_element(inertia.begin(), inertia.end());
    const double lo = *lo_it, range = *hi_it - *lo_it;
    if (!(range > 0.0)) return 1;
    auto ny = [&](int i) { return (inertia[i] - lo) / range; };
    const double x0 = 0.0, y0 = ny(0), x1 = 1.0, y1 = ny(k_max - 1);
    const double len = std::hypot(x1 - x0, y1 - y0);
    std::vector<double> dist(k_max, 0.0);
    double best = -1.0;
    for (int i = 1; i < k_max - 1; ++i) {
        const double x = static_cast<double>(i) / (k_max - 1);
        dist[i] = std::abs((y1 - y0) * x - (x1 - x0) * ny(i) + x1 * y0 - y1 * x0) / len;
        best = std::max(best, dist[i]);
    }
    for (int i = 1; i < k_max - 1; ++i)
        if (dist[i] >= best - 1e-12) return i + 1;
    return 2;
}

ElbowResult elbow_select(const FeatureMatrix& features, int k_max, std::uint64_t seed, int n_restarts) {
    if (k_max < 2) throw ArgumentError("elbow_select needs k_max >= 2");
    if (features.rows < 1) throw ArgumentError("elbow_select: no rows");
    ElbowResult r;
    r.k_max = k_max;
    if (features.rows < k_max) {
        r.k_max = features.rows;
        r.shrunk = true;
    }
    for (int k = 1; k <= r.k_max; ++k) r.inertia.push_back(kmeans(features, k, seed, n_restarts).inertia);
    r.k = elbow_from_curve(r.inertia);
    return r;
}

void symmetric_eigen(std::vector<double> a, int d, std::vector<double>& values, std::vector<double>& vectors) {
    if (a.size() != static_cast<std::size_t>(d) * d) throw ShapeError("symmetric_eigen: matrix is not d x d");
    std::vector<double> v(static_cast<std::size_t>(d) * d, 0.0);
    for (int i = 0; i < d; ++i) v[static_cast<std::size_t>(i) * d + i] = 1.0;
    auto A = [&](int i, int j) -> double& { return a[static_cast<std::size_t>(i) * d + j]; };
    auto V = [&](int i, int j) -> double& { return v[static_cast<std::size_t>(i) * d + j]; };

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0, diag = 0.0;
        for (int i = 0; i < d; ++i) {
            diag += A(i, i) * A(i, i);
            for (int j = i + 1; j < d; ++j) off += A(i, j) * A(i, j);
        }
        if (off <= 1e-30 * std::max(diag, 1e-300)) break;
        for (int p = 0; p < d; ++p) {
            for (int q = p + 1; q < d; ++q) {
                if (A(p, q) == 0.0) continue;
                const double theta = (A(q, q) - A(p, p)) / (2.0 * A(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (int k = 0; k < d; ++k) {
                    const double akp = A(k, p), akq = A(k, q);
                    A(k, p) = c * akp - s * akq;
                    A(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < d; ++k) {
                    const double apk = A(p, k), aqk = A(q, k);
                    A(p, k) = c * apk - s * aqk;
                    A(q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < d; ++k) {
                    const double vkp = V(k, p), vkq = V(k, q);
                    V(k, p) = c * vkp - s * vkq;
                    V(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    std::vector<int> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return A(x, x) > A(y, y); });
    values.resize(d);
    vectors.assign(static_cast<std::size_t>(d) * d, 0.0);
    for (int j = 0; j < d; ++j) {
        values[j] = A(order[j], order[j]);
        for (int i = 0; i < d; ++i) vectors[static_cast<std::size_t>(i) * d + j] = V(i, order[j]);
    }
}

Projection2D pca2(const FeatureMatrix& features) {
    const int n = features.rows, d = features.cols;
    if (n < 3) throw ArgumentError("pca2 needs at least three rows");
    if (d < 1) throw ArgumentError("pca2 needs at least one column");
    std::vector<double> mean(d, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) mean[j] += features.at(i, j);
    for (auto& m : mean) m /= n;
    std::vector<double> centered(static_cast<std::size_t>(n) * d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) centered[static_cast<std::size_t>(i) * d + j] = features.at(i, j) - mean[j];
    std::vector<double> cov(static_cast<std::size_t>(d) * d, 0.0);
    for (int a = 0; a < d; ++a)
        for (int b = a; b < d; ++b) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += centered[static_cast<std::size_t>(i) * d + a] * centered[static_cast<std::size_t>(i) * d + b];
            cov[static_cast<std::size_t>(a) * d + b] = cov[static_cast<std::size_t>(b) * d + a] = s / (n - 1);
        }

    Projection2D p;
    std::vector<double> vectors;
    symmetric_eigen(cov, d, p.eigenvalues, vectors);
    const double total = std::accumulate(p.eigenvalues.begin(), p.eigenvalues.end(), 0.0,
                                         [](double acc, double v) { return acc + std::max(v, 0.0); });
    p.axes.assign(2 * static_cast<std::size_t>(d), 0.0);
    for (int a = 0; a < std::min(2, d); ++a) {
        int big = 0;
        for (int i = 1; i < d; ++i)
            if (std::abs(vectors[static_cast<std::size_t>(i) * d + a]) > std::abs(vectors[static_cast<std::size_t>(big) * d + a])) big = i;
        const double sign = vectors[static_cast<std::size_t>(big) * d + a] < 0 ? -1.0 : 1.0;
        for (int i = 0; i < d; ++i) p.axes[static_cast<std::size_t>(a) * d + i] = sign * vectors[static_cast<std::size_t>(i) * d + a];
        p.explained[a] = total > 0.0 ? std::clamp(std::max(p.eigenvalues[a], 0.0) / total, 0.0, 1.0) : 0.0;
    }
    p.coords.assign(2 * static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i)
        for (int a = 0; a < 2; ++a) {
            double s = 0.0;
            for (int j = 0; j < d; ++j) s += centered[static_cast<std::size_t>(i) * d + j] * p.axes[static_cast<std::size_t>(a) * d + j];
            p.coords[static_cast<std::size_t>(i) * 2 + a] = s;
        }
    return p;
}

std::vector<std::vector<int>> representatives(const ClusterModel& model, const FeatureMatrix& features, int m) {
    if (m < 1) throw ArgumentError("representatives: m must be positive");
    if (static_cast<int>(model.assignment.size()) != features.rows || model.dims != features.cols) {
        throw ShapeError("representatives: model does not match the feature matrix");
    }
    std::vector<std::vector<int>> members(model.k);
    for (int i = 0; i < features.rows; ++i) members[model.assignment[i]].push_back(i);
    std::vector<std::vector<int>> out(model.k);
    for (int c = 0; c < model.k; ++c) {
        if (members[c].empty()) throw ArgumentError("representatives: cluster " + std::to_string(c) + " is empty");
        std::vector<std::pair<double, int>> ranked;
        for (int i : members[c]) ranked.emplace_back(sq_dist(features.row(i), model.centroid(c)), i);
        std::sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first < b.first;
            return features.ids[a.second] < features.ids[b.second];
        });
        for (int j = 0; j < std::min<int>(m, static_cast<int>(ranked.size())); ++j) out[c].push_back(ranked[j].second);
    }
    return out;
}

std::vector<double> cluster_purity(const ClusterModel& model, const std::vector<std::string>& labels) {
    if (labels.size() != model.assignment.size()) throw ShapeError("cluster_purity: label count mismatch");
    std::vector<std::map<std::string, int>> counts(model.k);
    std::vector<int> sizes(model.k, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        ++counts[model.assignment[i]][labels[i]];
        ++sizes[model.assignment[i]];
    }
    std::vector<double> purity(model.k, 0.0);
    for (int c = 0; c < model.k; ++c) {
        int top = 0;
        for (const auto& [label, n] : counts[c]) top = std::max(top, n);
        purity[c] = sizes[c] ? static_cast<double>(top) / sizes[c] : 0.0;
    }
    return purity;
}

}  // namespace lungcam
