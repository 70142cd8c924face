#include <doctest.h>

#include "lungcam/csv.hpp"
#include "lungcam/digest.hpp"
#include "lungcam/error.hpp"
#include "lungcam/files.hpp"
#include "lungcam/phantom.hpp"
#include "lungcam/volume_io.hpp"
#include "oracles.hpp"

using namespace lungcam;

namespace {

PhantomConfig small_config(LesionMode mode, std::uint64_t seed) {
    PhantomConfig cfg;
    cfg.seed = seed;
    cfg.lesion.mode = mode;
    if (mode == LesionMode::Focal) cfg.lesion = {mode, 2, 2.5, 4.5};
    if (mode == LesionMode::Diffuse) cfg.lesion = {mode, 12, 3.0, 5.5};
    return cfg;
}

double mean_where(const PhantomCase& pc, const MaskVolume& m, bool exclude_lesion) {
    double s = 0.0;
    long n = 0;
    for (std::size_t i = 0; i < m.voxels().size(); ++i) {
        if (!m.voxels()[i]) continue;
        if (exclude_lesion && pc.lesion_mask.voxels()[i]) continue;
        s += pc.volume.voxels()[i];
        ++n;
    }
    return s / static_cast<double>(n);
}

}  // namespace

TEST_SUITE("phantom") {

TEST_CASE("a lesion-free case has no lesion voxels and no abnormal slices") {
    const auto pc = generate_case(small_config(LesionMode::None, 3));
    CHECK(count_set(pc.lesion_mask) == 0);
    CHECK(pc.lesion_volume_mm3 == 0.0);
    CHECK(pc.severity == Severity::NonSevere);
    for (auto l : pc.slice_labels) CHECK(l == 0);
    CHECK(count_set(pc.lung_mask) > 0);
}

TEST_CASE("generation is a pure function of the config") {
    for (auto mode : {LesionMode::None, LesionMode::Focal, LesionMode::Diffuse}) {
        const auto a = generate_case(small_config(mode, 42));
        const auto b = generate_case(small_config(mode, 42));
        CHECK(a.volume == b.volume);
        CHECK(a.lesion_mask == b.lesion_mask);
        CHECK(a.lung_mask == b.lung_mask);
        const auto c = generate_case(small_config(mode, 43));
        CHECK_FALSE(a.volume == c.volume);
    }
}

TEST_CASE("a single blob's lesion volume equals the brute-force sphere count") {
    for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
        PhantomConfig cfg;
        cfg.seed = seed;
        cfg.lesion = {LesionMode::Focal, 1, 3.0, 3.0};
        const auto pc = generate_case(cfg);
        REQUIRE(pc.blobs.size() == 1);
        const auto& b = pc.blobs.front();
        const long n = oracle::sphere_voxels(cfg.dims, b.center[0], b.center[1], b.center[2], 3.0);
        CHECK(pc.lesion_volume_mm3 == doctest::Approx(static_cast<double>(n)).epsilon(1e-12));
        CHECK(static_cast<long>(count_set(pc.lesion_mask)) == n);
    }
    // anisotropic spacing scales the volume by the voxel size
    PhantomConfig cfg;
    cfg.seed = 9;
    cfg.spacing = {0.5, 0.5, 2.0};
    cfg.lesion = {LesionMode::Focal, 1, 3.0, 3.0};
    const auto pc = generate_case(cfg);
    CHECK(pc.lesion_volume_mm3 == doctest::Approx(0.5 * static_cast<double>(count_set(pc.lesion_mask))));
}

TEST_CASE("case invariants: lesion inside lung, labels from area, lesions brighter") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        for (auto mode : {LesionMode::Focal, LesionMode::Diffuse}) {
            const auto pc = generate_case(small_config(mode, seed));
            for (std::size_t i = 0; i < pc.lesion_mask.voxels().size(); ++i)
                if (pc.lesion_mask.voxels()[i]) CHECK(pc.lung_mask.voxels()[i] == 1);
            for (int z = 0; z < pc.lesion_mask.dims().nz; ++z) {
                long area = 0;
                for (int y = 0; y < pc.lesion_mask.dims().ny; ++y)
                    for (int x = 0; x < pc.lesion_mask.dims().nx; ++x) area += pc.lesion_mask.at(x, y, z);
                CHECK(pc.slice_labels[z] == (area >= 10 ? 1 : 0));
            }
            CHECK(mean_where(pc, pc.lesion_mask, false) > mean_where(pc, pc.lung_mask, true));
            CHECK(pc.lesion_volume_mm3 == doctest::Approx(static_cast<double>(count_set(pc.lesion_mask))));
            const bool severe = pc.lesion_volume_mm3 >= 0.05 * pc.lung_volume_mm3;
            CHECK((pc.severity == Severity::Severe) == severe);
        }
    }
}

TEST_CASE("an unsatisfiable lesion recipe is rejected") {
    PhantomConfig cfg;
    cfg.lesion = {LesionMode::Focal, 1, 30.0, 30.0};
    cfg.placement_attempts = 50;
    CHECK_THROWS_AS(generate_case(cfg), ArgumentError);
    cfg.lesion = {LesionMode::Focal, 0, 3.0, 3.0};
    CHECK_THROWS_AS(generate_case(cfg), ArgumentError);
}

TEST_CASE("cohort mix splits by largest remainder") {
    CHECK(mix_counts(10, {0.5, 0.3, 0.2}) == std::array<int, 3>{5, 3, 2});
    CHECK(mix_counts(60, {0.4, 0.3, 0.3}) == std::array<int, 3>{24, 18, 18});
    const auto c = mix_counts(7, {0.4, 0.3, 0.3});
    CHECK(c[0] + c[1] + c[2] == 7);
    CHECK_THROWS_AS(mix_counts(10, {0.5, 0.5, 0.5}), ArgumentError);
}

TEST_CASE("cohort generation writes a reproducible manifest and ground truth") {
    oracle::TempDir a("cohort_a"), b("cohort_b");
    CohortOptions opts;
    opts.n_cases = 10;
    opts.base_seed = 100;
    opts.mix = {0.5, 0.3, 0.2};
    opts.base.dims = {32, 32, 16};
    const auto m = generate_cohort(opts, a.path());
    generate_cohort(opts, b.path());
    REQUIRE(m.rows.size() == 10);

    int none = 0, focal = 0, diffuse = 0;
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
        const auto& r = m.rows[i];
        CHECK(r.seed == 100 + i);
        none += r.cluster_style == LesionMode::None;
        focal += r.cluster_style == LesionMode::Focal;
        diffuse += r.cluster_style == LesionMode::Diffuse;
        CHECK(volume_digest(r.volume) == volume_digest(b.path() / r.volume.filename()));
        // severity recomputed from the saved masks
        const auto lesion = load_mask(r.lesion_mask);
        const auto lung = load_mask(r.lung_mask);
        const double lv = static_cast<double>(count_set(lesion));
        CHECK(r.lesion_volume_mm3 == doctest::Approx(lv));
        CHECK((r.severity == Severity::Severe) == (lv > 0 && lv >= 0.05 * static_cast<double>(count_set(lung))));
        CHECK(r.label == (lv > 0 ? 1 : 0));
    }
    CHECK(none == 5);
    CHECK(focal == 3);
    CHECK(diffuse == 2);
    for (const char* f : {"manifest.csv", "ground_truth.csv", "slice_labels.csv"})
        CHECK(sha256_file(a / f) == sha256_file(b / f));

    const auto truth = CsvTable::load(a / "ground_truth.csv");
    CHECK(truth.header() == std::vector<std::string>{"case_id", "label", "lesion_volume_mm3", "severity", "cluster_style"});
    CHECK(truth.size() == 10);

    const auto loaded = load_manifest(a.path());
    REQUIRE(loaded.rows.size() == 10);
    CHECK(loaded.has_ground_truth);
    CHECK(loaded.rows[3].severity == m.rows[3].severity);
    CHECK(loaded.rows[3].cluster_style == m.rows[3].cluster_style);
    CHECK_THROWS_AS(load_manifest(a / "nope"), IoError);

    opts.n_cases = 0;
    CHECK_THROWS_AS(generate_cohort(opts, a.path()), ArgumentError);
}

}  // TEST_SUITE
