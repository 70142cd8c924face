#include "lungcam/scoring.hpp"

#include <algorithm>
#include <cmath>

#include "lungcam/error.hpp"

namespace lungcam {

void ScoringConfig::validate() const {
    if (!(t_activation >= 0.0 && t_activation <= 1.0)) throw ConfigError("t_activation must lie in [0, 1]");
    if (!(slice_positive_threshold >= 0.0 && slice_positive_threshold <= 1.0)) {
        throw ConfigError("slice_positive_threshold must lie in [0, 1]");
    }
    if (!std::isfinite(case_score_threshold) || case_score_threshold < 0.0) {
        throw ConfigError("case_score_threshold must be a non-negative number");
    }
}

HeatmapVolume assemble_heatmap_volume(const Dims& dims, const Spacing& spacing, const std::string& case_id,
                                      const std::vector<double>& slice_probs, const std::vector<Image>& maps,
                                      const RoiBox& roi, const ScoringConfig& cfg) {
    if (slice_probs.size() != static_cast<std::size_t>(dims.nz) || maps.size() != slice_probs.size()) {
        throw ShapeError("assemble_heatmap_volume: need one probability and one map per slice");
    }
    if (roi.x0 < 0 || roi.y0 < 0 || roi.x1 > dims.nx || roi.y1 > dims.ny || roi.width() <= 0 || roi.height() <= 0) {
        throw ShapeError("assemble_heatmap_volume: ROI outside the volume");
    }
    HeatmapVolume out(dims, spacing, case_id);
    for (int z = 0; z < dims.nz; ++z) {
        if (!(slice_probs[z] > cfg.slice_positive_threshold)) continue;
        const Image& m = maps[z];
        const Image placed = m.width() == roi.width() && m.height() == roi.height()
                                 ? m
                                 : resize_bilinear(m, roi.width(), roi.height());
        for (int y = 0; y < roi.height(); ++y)
            for (int x = 0; x < roi.width(); ++x)
                out.at(roi.x0 + x, roi.y0 + y, z) = std::clamp(placed.at(x, y), 0.0f, 1.0f);
    }
    return out;
}

double corona_score(const HeatmapVolume& hvol, const ScoringConfig& cfg) {
    // Compare at storage precision so a voxel holding float(t) is not above t.
    const float t = static_cast<float>(cfg.t_activation);
    double sum = 0.0;
    for (float v : hvol.voxels())
        if (v > t) sum += v;
    return sum * voxel_volume(hvol) / 1000.0;
}

bool classify_case(double score_cm3, const ScoringConfig& cfg) { return score_cm3 > cfg.case_score_threshold; }

}  // namespace lungcam
