#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lungcam/volume.hpp"

namespace lungcam {

enum class LesionMode { None, Focal, Diffuse };
enum class Severity { NonSevere, Severe };

std::string to_string(LesionMode mode);
std::string to_string(Severity severity);
LesionMode parse_lesion_mode(const std::string& text);
Severity parse_severity(const std::string& text);

/// Axis-aligned ellipsoid in voxel-index coordinates.
struct Ellipsoid {
    std::array<double, 3> center{};
    std::array<double, 3> radii{};

    bool contains(double x, double y, double z) const;
};

struct LesionRecipe {
    LesionMode mode = LesionMode::None;
    int blob_count = 0;
    double radius_min = 3.0;  // voxels
    double radius_max = 3.0;
    double hu = -400.0;
};

/// Full description of one synthetic chest-CT case; the output is a pure
/// function of this struct.
struct PhantomConfig {
    Dims dims{64, 64, 32};
    Spacing spacing{1.0, 1.0, 1.0};
    std::string case_id = "case";

    double air_hu = -1000.0;
    double body_hu = 40.0;
    std::array<double, 2> body_radii{0.0, 0.0};  // elliptic cylinder (x, y); 0 -> scaled to dims
    double lung_hu = -850.0;
    std::vector<Ellipsoid> lungs;  // empty -> default pair scaled to dims
    double noise_sigma_hu = 30.0;

    LesionRecipe lesion;

    int slice_area_threshold = 10;      // pixels
    double severe_lung_fraction = 0.05;  // lesion_volume / lung_volume
    int placement_attempts = 2000;

    std::uint64_t seed = 0;
};

/// Two lung ellipsoids placed symmetrically for the given dims.
std::vector<Ellipsoid> default_lungs(const Dims& dims);

/// A placed lesion sphere (voxel-index coordinates).
struct LesionBlob {
    std::array<double, 3> center{};
    double radius = 0.0;
};

struct PhantomCase {
    CtVolume volume;
    MaskVolume lung_mask;
    MaskVolume lesion_mask;
    std::vector<std::uint8_t> slice_labels;  // per z, 1 = abnormal
    double lesion_volume_mm3 = 0.0;
    double lung_volume_mm3 = 0.0;
    Severity severity = Severity::NonSevere;
    LesionMode cluster_style = LesionMode::None;
    std::vector<LesionBlob> blobs;
};

/// Throws ArgumentError when the lesion recipe cannot be placed inside the lungs.
PhantomCase generate_case(const PhantomConfig& cfg);

/// Per-slice abnormality labels from a lesion mask.
std::vector<std::uint8_t> slice_labels_from(const MaskVolume& lesion_mask, int area_threshold);

struct CohortMix {
    double none = 0.4;
    double focal = 0.3;
    double diffuse = 0.3;
};

/// Split of n cases into (none, focal, diffuse) counts by largest remainder.
std::array<int, 3> mix_counts(int n_cases, const CohortMix& mix);

struct CohortOptions {
    int n_cases = 20;
    std::uint64_t base_seed = 0;
    CohortMix mix;
    PhantomConfig base;  // dims, spacing, HU levels; lesion recipe is drawn per case
};

struct ManifestRow {
    std::string case_id;
    std::filesystem::path volume;
    std::filesystem::path lung_mask;
    std::filesystem::path lesion_mask;
    int label = 0;
    double lesion_volume_mm3 = 0.0;
    Severity severity = Severity::NonSevere;
    LesionMode cluster_style = LesionMode::None;
    std::uint64_t seed = 0;
};

struct CohortManifest {
    std::vector<ManifestRow> rows;
    bool has_ground_truth = false;
};

/// Per-case config used by generate_cohort for case `index`.
PhantomConfig cohort_case_config(const CohortOptions& opts, int index, LesionMode mode);

/// Lesion-mode assignment for every case index (seeded shuffle of mix_counts).
std::vector<LesionMode> cohort_modes(const CohortOptions& opts);

/// Generates every case, writes volumes, manifest.csv, ground_truth.csv and
/// slice_labels.csv under `out_dir`.
CohortManifest generate_cohort(const CohortOptions& opts, const std::filesystem::path& out_dir);

/// Reads manifest.csv + ground_truth.csv written by generate_cohort.
CohortManifest load_manifest(const std::filesystem::path& data_dir);

}  // namespace lungcam
