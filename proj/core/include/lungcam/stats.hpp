#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lungcam {

/// Probability a random positive outscores a random negative, ties counted
/// as 1/2, by direct enumeration of all positive/negative pairs. Throws
/// ArgumentError unless both classes are present.
double auc_pair_count(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Same quantity from the Mann-Whitney U statistic of midranks: U / (n_pos n_neg).
double auc_mann_whitney(std::span<const double> scores, std::span<const std::uint8_t> labels);

struct RocPoint {
    double threshold;  // classify positive when score >= threshold
    double fpr;
    double tpr;
};

/// ROC curve from (0,0) to (1,1) with one vertex per distinct score (tied
/// scores produce a diagonal step).
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Trapezoidal area under a ROC curve.
double trapezoid_auc(const std::vector<RocPoint>& curve);

struct RocResult {
    double auc = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::vector<RocPoint> curve;
    int n_boot = 0;
    std::uint64_t seed = 0;
};

/// AUC with a stratified percentile-bootstrap 95% interval. Replicate b
/// resamples positives and negatives (by case index) from Rng(mix_seed(seed, b)).
RocResult roc_auc_ci(std::span<const double> scores, std::span<const std::uint8_t> labels, int n_boot = 1000,
                     std::uint64_t seed = 0);

enum class RankTestMethod { Auto, Exact, Normal };

struct RankTestResult {
    double rank_sum = 0.0;  // sum of midranks of group a
    double u_statistic = 0.0;  // rank_sum - n_a (n_a + 1) / 2
    double p_value = 1.0;   // two-sided
    double median_a = 0.0;
    double median_b = 0.0;
    bool exact = false;
};

/// Two-sided Wilcoxon rank-sum test. Auto uses exact enumeration when
/// n_a + n_b <= 12 and there are no ties, else the normal approximation with
/// tie-corrected variance and continuity correction.
RankTestResult wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b,
                                 RankTestMethod method = RankTestMethod::Auto);

/// Midranks (1-based) of the values.
std::vector<double> midranks(std::span<const double> values);

double median(std::vector<double> values);

/// Linear-interpolation quantile (q in [0,1]) of the values.
double quantile(std::vector<double> values, double q);

struct YoudenPoint {
    double threshold = 0.0;  // positive iff score > threshold
    double sensitivity = 0.0;
    double specificity = 0.0;
    double j = 0.0;
};

/// Threshold maximizing sensitivity + specificity - 1 over the candidates
/// {each distinct score} plus one below the minimum; smallest on ties.
YoudenPoint youden_threshold(std::span<const double> scores, std::span<const std::uint8_t> labels);

}  // namespace lungcam
