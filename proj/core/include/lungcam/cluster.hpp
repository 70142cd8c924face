#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lungcam/classifier.hpp"
#include "lungcam/image.hpp"

namespace lungcam {

struct SliceId {
    std::string case_id;
    int z = 0;

    auto operator<=>(const SliceId&) const = default;
    bool operator==(const SliceId&) const = default;
};

/// Row-major n x d matrix of slice features with per-row identifiers and
/// ground-truth style labels ("none", "focal", "diffuse", or empty).
struct FeatureMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;
    std::vector<SliceId> ids;
    std::vector<std::string> labels;

    FeatureMatrix() = default;
    FeatureMatrix(int n, int d) : rows(n), cols(d), data(static_cast<std::size_t>(n) * d, 0.0), ids(n), labels(n) {}

    std::span<double> row(int i) { return {data.data() + static_cast<std::size_t>(i) * cols, static_cast<std::size_t>(cols)}; }
    std::span<const double> row(int i) const {
        return {data.data() + static_cast<std::size_t>(i) * cols, static_cast<std::size_t>(cols)};
    }
    double& at(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
    double at(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }

    /// Appends a row; the first row fixes the column count.
    void add_row(std::span<const double> values, SliceId id, std::string label = {});
};

/// Gradient-weighted slice feature: for every channel k of the coarse
/// capture, spatial mean of A^k times spatial mean of d logit / d A^k.
std::vector<double> extract_feature(const ClsModel& model, const Image& roi_slice);

struct ZscoreParams {
    std::vector<double> mean;
    std::vector<double> std;  // population standard deviation
};

/// Per-column (x - mean) / std; zero-variance columns become all zeros.
/// Throws ArgumentError for fewer than two rows.
FeatureMatrix zscore(const FeatureMatrix& features, ZscoreParams* params = nullptr);
FeatureMatrix unzscore(const FeatureMatrix& normalized, const ZscoreParams& params);

struct KMeansRun {
    int restart = 0;
    std::vector<double> inertia;  // after every assignment step
};

struct ClusterModel {
    int k = 0;
    int dims = 0;
    std::vector<double> centroids;  // k x d, ordered lexicographically
    std::vector<int> assignment;    // per input row
    std::vector<double> distance;   // Euclidean distance to the assigned centroid
    double inertia = 0.0;
    std::vector<KMeansRun> runs;

    std::span<const double> centroid(int c) const {
        return {centroids.data() + static_cast<std::size_t>(c) * dims, static_cast<std::size_t>(dims)};
    }
};

/// Lloyd iterations from k-means++ seeding, best of n_restarts by inertia.
/// Rows are processed in a canonical (lexicographic) order so the result
/// does not depend on input row order. Throws ArgumentError unless
/// 1 <= k <= rows.
ClusterModel kmeans(const FeatureMatrix& features, int k, std::uint64_t seed, int n_restarts = 10,
                    int max_iterations = 300);

struct ElbowResult {
    int k = 1;
    int k_max = 0;  // after shrinking to the row count
    bool shrunk = false;
    std::vector<double> inertia;  // for k = 1..k_max
};

/// k with the largest distance to the chord joining the first and last
/// points of the unit-square-normalized (k, inertia) curve, over interior
/// k; smallest k on ties.
int elbow_from_curve(const std::vector<double>& inertia);

ElbowResult elbow_select(const FeatureMatrix& features, int k_max = 8, std::uint64_t seed = 0, int n_restarts = 10);

struct Projection2D {
    std::vector<double> coords;       // n x 2
    std::vector<double> axes;         // 2 x d, orthonormal rows
    std::vector<double> eigenvalues;  // all covariance eigenvalues, descending
    double explained[2] = {0.0, 0.0};
};

/// Symmetric eigendecomposition by cyclic Jacobi rotations. Returns
/// eigenvalues in descending order; column j of `vectors` (row-major d x d)
/// belongs to eigenvalue j.
void symmetric_eigen(std::vector<double> matrix, int d, std::vector<double>& values, std::vector<double>& vectors);

/// Top-two principal axes of the (n-1)-normalized covariance; each axis is
/// oriented so its largest-magnitude component is positive. Throws
/// ArgumentError for fewer than three rows.
Projection2D pca2(const FeatureMatrix& features);

/// For each cluster, up to m member rows nearest its centroid, ordered by
/// (distance, case_id, z).
std::vector<std::vector<int>> representatives(const ClusterModel& model, const FeatureMatrix& features, int m = 4);

/// Fraction of each cluster's members that carry its most common label.
std::vector<double> cluster_purity(const ClusterModel& model, const std::vector<std::string>& labels);

}  // namespace lungcam
