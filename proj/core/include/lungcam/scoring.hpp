#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lungcam/image.hpp"
#include "lungcam/lungseg.hpp"
#include "lungcam/volume.hpp"

namespace lungcam {

struct ScoringConfig {
    double t_activation = 0.6;             // heatmap voxels count only when strictly above this
    double slice_positive_threshold = 0.5;  // slice is positive iff probability > this
    double case_score_threshold = 0.0;      // cm^3; case is positive iff score > this

    /// Throws ConfigError when a threshold is out of range.
    void validate() const;
};

/// Places each positive slice's map (classifier-input resolution) back into
/// the ROI at volume resolution by bilinear resize; every other voxel is 0.
/// Throws ShapeError when the slice count differs from the volume depth.
HeatmapVolume assemble_heatmap_volume(const Dims& dims, const Spacing& spacing, const std::string& case_id,
                                      const std::vector<double>& slice_probs, const std::vector<Image>& maps,
                                      const RoiBox& roi, const ScoringConfig& cfg);

/// Sum of voxel values strictly above t_activation (rounded to float, the
/// storage precision), times the voxel volume,
/// in cm^3. Voxels are summed in storage order in double precision.
double corona_score(const HeatmapVolume& hvol, const ScoringConfig& cfg);

/// Positive iff score > case_score_threshold.
bool classify_case(double score_cm3, const ScoringConfig& cfg);

struct CaseReport {
    std::string case_id;
    std::vector<double> slice_probs;
    int n_positive_slices = 0;
    double corona_score_cm3 = 0.0;
    bool predicted_positive = false;
    std::filesystem::path heatmap;
};

}  // namespace lungcam
