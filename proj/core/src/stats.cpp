#include "lungcam/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "lungcam/error.hpp"
#include "lungcam/rng.hpp"

namespace lungcam {

namespace {

void check_binary(std::span<const double> scores, std::span<const std::uint8_t> labels, bool need_both) {
    if (scores.size() != labels.size()) throw ArgumentError("scores and labels differ in length");
    std::size_t pos = 0;
    for (auto l : labels) pos += l ? 1 : 0;
    if (need_both && (pos == 0 || pos == labels.size())) {
        throw ArgumentError("AUC is undefined unless both classes are present");
    }
}

}  // namespace

double auc_pair_count(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    check_binary(scores, labels, true);
    double wins = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!labels[i]) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j]) continue;
            ++pairs;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

std::vector<double> midranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i + 1;
        while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
        const double r = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
        i = j;
    }
    return ranks;
}

double auc_mann_whitney(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    check_binary(scores, labels, true);
    const auto ranks = midranks(scores);
    double rank_sum = 0.0;
    double n_pos = 0.0;
    for (std::size_t i = 0; i < ranks.size(); ++i)
        if (labels[i]) rank_sum += ranks[i], n_pos += 1.0;
    const double n_neg = static_cast<double>(scores.size()) - n_pos;
    return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    check_binary(scores, labels, true);
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    double n_pos = 0.0;
    for (auto l : labels) n_pos += l ? 1.0 : 0.0;
    const double n_neg = static_cast<double>(labels.size()) - n_pos;

    std::vector<RocPoint> curve;
    curve.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    double tp = 0.0, fp = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            if (labels[order[i]]) tp += 1.0;
            else fp += 1.0;
            ++i;
        }
        curve.push_back({s, fp / n_neg, tp / n_pos});
    }
    return curve;
}

double trapezoid_auc(const std::vector<RocPoint>& curve) {
    double area = 0.0;
    for (std::size_t i = 1; i < curve.size(); ++i) {
        area += (curve[i].fpr - curve[i - 1].fpr) * (curve[i].tpr + curve[i - 1].tpr) / 2.0;
    }
    return area;
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw ArgumentError("quantile of an empty set");
    std::sort(values.begin(), values.end());
    const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

RocResult roc_auc_ci(std::span<const double> scores, std::span<const std::uint8_t> labels, int n_boot,
                     std::uint64_t seed) {
    check_binary(scores, labels, true);
    if (n_boot < 0) throw ArgumentError("n_boot must be non-negative");
    RocResult r;
    r.auc = auc_pair_count(scores, labels);
    r.curve = roc_curve(scores, labels);
    r.n_boot = n_boot;
    r.seed = seed;

    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] ? pos : neg).push_back(i);

    std::vector<double> aucs;
    aucs.reserve(n_boot);
    std::vector<double> s;
    std::vector<std::uint8_t> l;
    for (int b = 0; b < n_boot; ++b) {
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(b)));
        s.clear();
        l.clear();
        for (std::size_t k = 0; k < pos.size(); ++k) {
            s.push_back(scores[pos[rng.below(pos.size())]]);
            l.push_back(1);
        }
        for (std::size_t k = 0; k < neg.size(); ++k) {
            s.push_back(scores[neg[rng.below(neg.size())]]);
            l.push_back(0);
        }
        aucs.push_back(auc_pair_count(s, l));
    }
    if (aucs.empty()) {
        r.ci_low = r.ci_high = r.auc;
    } else {
        // percentile bounds, widened if needed so the interval covers the point estimate
        r.ci_low = std::min(quantile(aucs, 0.025), r.auc);
        r.ci_high = std::max(quantile(aucs, 0.975), r.auc);
    }
    return r;
}

namespace {

// Number of size-k subsets of {1..n} for every rank sum.
std::vector<double> rank_sum_counts(int n, int k) {
    const int max_sum = k * n;
    // ways[j][s]: subsets of size j with sum s, built item by item
    std::vector<std::vector<double>> ways(k + 1, std::vector<double>(max_sum + 1, 0.0));
    ways[0][0] = 1.0;
    for (int item = 1; item <= n; ++item)
        for (int j = std::min(k, item); j >= 1; --j)
            for (int s = max_sum; s >= item; --s) ways[j][s] += ways[j - 1][s - item];
    return ways[k];
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

RankTestResult wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b, RankTestMethod method) {
    if (a.empty() || b.empty()) throw ArgumentError("wilcoxon_rank_sum: both groups must be non-empty");
    std::vector<double> all(a.begin(), a.end());
    all.insert(all.end(), b.begin(), b.end());
    const auto ranks = midranks(all);
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double n = na + nb;

    RankTestResult r;
    for (std::size_t i = 0; i < a.size(); ++i) r.rank_sum += ranks[i];
    r.u_statistic = r.rank_sum - na * (na + 1.0) / 2.0;
    r.median_a = median(std::vector<double>(a.begin(), a.end()));
    r.median_b = median(std::vector<double>(b.begin(), b.end()));

    std::vector<double> sorted = all;
    std::sort(sorted.begin(), sorted.end());
    double tie_term = 0.0;
    bool ties = false;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i + 1;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        const double t = static_cast<double>(j - i);
        if (t > 1) ties = true;
        tie_term += t * t * t - t;
        i = j;
    }

    const bool small = a.size() + b.size() <= 12;
    bool use_exact = method == RankTestMethod::Exact || (method == RankTestMethod::Auto && small && !ties);
    if (method == RankTestMethod::Exact && ties) throw ArgumentError("exact Wilcoxon test requires untied data");
    if (use_exact && a.size() + b.size() > 30) throw ArgumentError("exact Wilcoxon test limited to 30 observations");

    if (use_exact) {
        const auto counts = rank_sum_counts(static_cast<int>(n), static_cast<int>(na));
        const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
        const auto w = static_cast<long>(std::lround(r.rank_sum));
        double le = 0.0, ge = 0.0;
        for (std::size_t s = 0; s < counts.size(); ++s) {
            if (static_cast<long>(s) <= w) le += counts[s];
            if (static_cast<long>(s) >= w) ge += counts[s];
        }
        r.p_value = std::min(1.0, 2.0 * std::min(le, ge) / total);
        r.exact = true;
        return r;
    }

    const double mean = na * (n + 1.0) / 2.0;
    const double var = na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if (!(var > 0.0)) {
        r.p_value = 1.0;
        return r;
    }
    const double z = std::max(0.0, std::abs(r.rank_sum - mean) - 0.5) / std::sqrt(var);
    r.p_value = std::min(1.0, 2.0 * normal_sf(z));
    return r;
}

YoudenPoint youden_threshold(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    check_binary(scores, labels, true);
    std::vector<double> cand(scores.begin(), scores.end());
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
    cand.insert(cand.begin(), cand.front() - 1.0);

    double n_pos = 0.0;
    for (auto l : labels) n_pos += l ? 1.0 : 0.0;
    const double n_neg = static_cast<double>(labels.size()) - n_pos;

    YoudenPoint best;
    best.j = -2.0;
    for (double t : cand) {
        double tp = 0.0, tn = 0.0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            const bool pred = scores[i] > t;
            if (labels[i] && pred) tp += 1.0;
            if (!labels[i] && !pred) tn += 1.0;
        }
        const double sens = tp / n_pos, spec = tn / n_neg;
        const double j = sens + spec - 1.0;
        if (j > best.j) best = {t, sens, spec, j};
    }
    return best;
}

}  // namespace lungcam
