#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lungcam/classifier.hpp"
#include "lungcam/kv_text.hpp"
#include "lungcam/localization.hpp"
#include "lungcam/lungseg.hpp"
#include "lungcam/phantom.hpp"
#include "lungcam/scoring.hpp"

namespace lungcam {

/// Every tunable of the pipeline. Values come from defaults, then a
/// `key: value` config file, then the LUNGCAM_OUTPUT_DIR environment
/// variable (output_dir only), then command-line flags.
struct PipelineConfig {
    std::filesystem::path data_dir = "data";
    std::filesystem::path model_dir;  // empty: same as output_dir
    std::filesystem::path output_dir = "out";
    int workers = 0;                  // 0: available parallelism

    std::uint64_t seed = 1;
    int n_cases = 60;
    CohortMix mix;

    int window_lo = -1000;
    int window_hi = 0;
    SegConfig seg;
    ClsConfig cls;
    ScoringConfig scoring;
    bool case_threshold_set = false;
    bool heatmap_png = false;

    int n_boot = 1000;
    int k = 0;  // 0: choose by the elbow rule
    int k_max = 8;
    int restarts = 10;
    int representatives = 4;

    /// Sets one key from text; throws ConfigError for unknown keys or bad values.
    void set(const std::string& key, const std::string& value);
    void apply(const KeyValueText& kv);
    void apply_environment();
    void validate() const;

    std::filesystem::path models() const { return model_dir.empty() ? output_dir : model_dir; }
    int worker_count() const;

    /// All keys with their current values, in the config-file format.
    KeyValueText snapshot() const;
    static std::vector<std::string> keys();
};

/// Output file list with SHA-256 digests, the config snapshot and per-stage
/// wall time. Only files are digested; timings are informational.
class RunManifest {
public:
    RunManifest(std::string command, const PipelineConfig& cfg);

    void add_output(const std::filesystem::path& file);
    void time_stage(const std::string& stage, std::chrono::steady_clock::duration elapsed);

    /// Writes run_manifest_<command>.txt under the output dir and returns its path.
    std::filesystem::path write() const;

    const std::vector<std::filesystem::path>& outputs() const { return outputs_; }

private:
    std::string command_;
    PipelineConfig cfg_;
    std::vector<std::filesystem::path> outputs_;
    std::vector<std::pair<std::string, double>> timings_ms_;
};

/// Re-digests every output listed in a manifest. Returns the list of
/// relative paths that are missing or differ (empty when all match).
std::vector<std::string> verify_run_manifest(const std::filesystem::path& manifest);

struct CaseAnalysis {
    CaseReport report;
    RoiBox roi;
    HeatmapVolume heatmap;
    std::vector<SliceLocalization> slices;
    std::vector<Image> roi_slices;
    std::vector<long> lung_pixels;  // segmented lung area per slice
};

/// Slices whose segmented lung covers less than this fraction of the slice
/// (apices and bases) are left out of features.csv so clustering sees
/// parenchymal pattern rather than position along the lung.
inline constexpr double kFeatureMinLungFraction = 0.15;

/// segment -> ROI -> classify -> localize -> heatmap -> corona score for one case.
/// Pure given the inputs; safe to call concurrently on shared models.
CaseAnalysis analyze_case(const SegModel& seg, const ClsModel& cls, const CtVolume& volume,
                          const PipelineConfig& cfg);

/// ROI slices and per-slice labels for classifier training, using the
/// ground-truth lung masks for the crop.
std::vector<ClsSample> classifier_samples(const CohortManifest& manifest, const PipelineConfig& cfg);

std::vector<SegTrainingCase> segmenter_cases(const CohortManifest& manifest, const PipelineConfig& cfg);

/// Runs fn(i) for i in [0, n) on up to `workers` threads. The first
/// exception (lowest index) is rethrown after all workers stop.
void parallel_for(int n, int workers, const std::function<void(int)>& fn);

// Commands. Each throws ConfigError/ArgumentError for configuration
// problems and IoError/FormatError for file problems; outputs are written
// atomically and only after all computation has succeeded.
RunManifest cmd_phantom(const PipelineConfig& cfg);
RunManifest cmd_train_seg(const PipelineConfig& cfg);
RunManifest cmd_train_cls(const PipelineConfig& cfg);
RunManifest cmd_infer(const PipelineConfig& cfg);
RunManifest cmd_stats(const PipelineConfig& cfg);
RunManifest cmd_cluster(const PipelineConfig& cfg);

inline constexpr const char* kSegModelFile = "segmenter.model";
inline constexpr const char* kClsModelFile = "classifier.model";

}  // namespace lungcam
