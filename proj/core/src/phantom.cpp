#include "lungcam/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "lungcam/csv.hpp"
#include "lungcam/error.hpp"
#include "lungcam/files.hpp"
#include "lungcam/kv_text.hpp"
#include "lungcam/rng.hpp"
#include "lungcam/volume_io.hpp"

namespace lungcam {

namespace fs = std::filesystem;

std::string to_string(LesionMode mode) {
    switch (mode) {
        case LesionMode::None: return "none";
        case LesionMode::Focal: return "focal";
        case LesionMode::Diffuse: return "diffuse";
    }
    return "none";
}

std::string to_string(Severity severity) { return severity == Severity::Severe ? "severe" : "non-severe"; }

LesionMode parse_lesion_mode(const std::string& text) {
    if (text == "none") return LesionMode::None;
    if (text == "focal") return LesionMode::Focal;
    if (text == "diffuse") return LesionMode::Diffuse;
    throw FormatError("unknown lesion mode '" + text + "'");
}

Severity parse_severity(const std::string& text) {
    if (text == "severe") return Severity::Severe;
    if (text == "non-severe") return Severity::NonSevere;
    throw FormatError("unknown severity '" + text + "'");
}

bool Ellipsoid::contains(double x, double y, double z) const {
    const double dx = (x - center[0]) / radii[0];
    const double dy = (y - center[1]) / radii[1];
    const double dz = (z - center[2]) / radii[2];
    return dx * dx + dy * dy + dz * dz <= 1.0;
}

std::vector<Ellipsoid> default_lungs(const Dims& dims) {
    const double cx = (dims.nx - 1) / 2.0;
    const double cy = (dims.ny - 1) / 2.0;
    const double cz = (dims.nz - 1) / 2.0;
    const double offset = 0.1875 * dims.nx;
    const std::array<double, 3> radii{0.15 * dims.nx, 0.25 * dims.ny, 0.42 * dims.nz};
    return {Ellipsoid{{cx - offset, cy, cz}, radii}, Ellipsoid{{cx + offset, cy, cz}, radii}};
}

std::vector<std::uint8_t> slice_labels_from(const MaskVolume& lesion_mask, int area_threshold) {
    std::vector<std::uint8_t> labels(lesion_mask.dims().nz, 0);
    for (int z = 0; z < lesion_mask.dims().nz; ++z) {
        const auto plane = lesion_mask.plane(z);
        const auto area = std::count(plane.begin(), plane.end(), std::uint8_t{1});
        labels[z] = area >= area_threshold ? 1 : 0;
    }
    return labels;
}

namespace {

void validate(const PhantomConfig& cfg) {
    if (cfg.dims.nx <= 0 || cfg.dims.ny <= 0 || cfg.dims.nz <= 0) throw ArgumentError("phantom dims must be positive");
    if (!(cfg.spacing.sx > 0 && cfg.spacing.sy > 0 && cfg.spacing.sz > 0)) {
        throw ArgumentError("phantom spacing must be positive");
    }
    if (cfg.lesion.mode != LesionMode::None) {
        if (cfg.lesion.blob_count < 1) throw ArgumentError("lesion recipe needs at least one blob");
        if (!(cfg.lesion.radius_min > 0) || cfg.lesion.radius_max < cfg.lesion.radius_min) {
            throw ArgumentError("lesion radius range must satisfy 0 < min <= max");
        }
    }
    for (const auto& e : cfg.lungs)
        for (double r : e.radii)
            if (!(r > 0)) throw ArgumentError("lung radii must be positive");
}

// Stamps a sphere into `lesion` if every voxel of it lies inside `lung`.
bool try_place_blob(const MaskVolume& lung, MaskVolume& lesion, double cx, double cy, double cz, double r) {
    const auto& d = lung.dims();
    const int x0 = static_cast<int>(std::floor(cx - r)), x1 = static_cast<int>(std::ceil(cx + r));
    const int y0 = static_cast<int>(std::floor(cy - r)), y1 = static_cast<int>(std::ceil(cy + r));
    const int z0 = static_cast<int>(std::floor(cz - r)), z1 = static_cast<int>(std::ceil(cz + r));
    const double r2 = r * r;
    for (int pass = 0; pass < 2; ++pass) {
        for (int z = z0; z <= z1; ++z)
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x) {
                    const double dx = x - cx, dy = y - cy, dz = z - cz;
                    if (dx * dx + dy * dy + dz * dz > r2) continue;
                    if (pass == 0) {
                        if (x < 0 || y < 0 || z < 0 || x >= d.nx || y >= d.ny || z >= d.nz) return false;
                        if (!lung.at(x, y, z)) return false;
                    } else {
                        lesion.at(x, y, z) = 1;
                    }
                }
    }
    return true;
}

std::int16_t to_hu(double v) {
    const double r = std::nearbyint(v);
    return static_cast<std::int16_t>(std::clamp(r, -32768.0, 32767.0));
}

}  // namespace

PhantomCase generate_case(const PhantomConfig& cfg) {
    validate(cfg);
    const Dims& d = cfg.dims;
    const auto lungs = cfg.lungs.empty() ? default_lungs(d) : cfg.lungs;
    const double body_rx = cfg.body_radii[0] > 0 ? cfg.body_radii[0] : 0.45 * d.nx;
    const double body_ry = cfg.body_radii[1] > 0 ? cfg.body_radii[1] : 0.36 * d.ny;
    const double cx = (d.nx - 1) / 2.0;
    const double cy = (d.ny - 1) / 2.0;

    PhantomCase pc;
    pc.lung_mask = MaskVolume(d, cfg.spacing, cfg.case_id);
    pc.lesion_mask = MaskVolume(d, cfg.spacing, cfg.case_id);
    std::vector<std::uint8_t> body(d.count(), 0);

    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x) {
                const double bx = (x - cx) / body_rx;
                const double by = (y - cy) / body_ry;
                if (bx * bx + by * by <= 1.0) body[pc.lung_mask.index(x, y, z)] = 1;
                for (const auto& e : lungs)
                    if (e.contains(x, y, z)) pc.lung_mask.at(x, y, z) = 1;
            }

    Rng rng(cfg.seed);
    if (cfg.lesion.mode != LesionMode::None) {
        for (int b = 0; b < cfg.lesion.blob_count; ++b) {
            const double r = rng.uniform(cfg.lesion.radius_min, cfg.lesion.radius_max);
            bool placed = false;
            for (int attempt = 0; attempt < cfg.placement_attempts && !placed; ++attempt) {
                const auto& e = lungs[rng.below(lungs.size())];
                // uniform point in the ellipsoid by rejection from its box
                double px, py, pz;
                do {
                    px = rng.uniform(-1.0, 1.0);
                    py = rng.uniform(-1.0, 1.0);
                    pz = rng.uniform(-1.0, 1.0);
                } while (px * px + py * py + pz * pz > 1.0);
                const std::array<double, 3> c{e.center[0] + px * e.radii[0], e.center[1] + py * e.radii[1],
                                              e.center[2] + pz * e.radii[2]};
                placed = try_place_blob(pc.lung_mask, pc.lesion_mask, c[0], c[1], c[2], r);
                if (placed) pc.blobs.push_back({c, r});
            }
            if (!placed) {
                throw ArgumentError("lesion recipe unsatisfiable: could not fit a blob of radius " +
                                    std::to_string(r) + " inside the lungs");
            }
        }
    }

    std::vector<std::int16_t> hu(d.count());
    for (std::size_t i = 0; i < hu.size(); ++i) {
        double base = cfg.air_hu;
        if (pc.lesion_mask.voxels()[i]) {
            base = cfg.lesion.hu;
        } else if (pc.lung_mask.voxels()[i]) {
            base = cfg.lung_hu;
        } else if (body[i]) {
            base = cfg.body_hu;
        }
        hu[i] = to_hu(base + cfg.noise_sigma_hu * rng.normal());
    }
    pc.volume = CtVolume(d, cfg.spacing, std::move(hu), cfg.case_id);

    const double vv = voxel_volume(pc.volume);
    pc.slice_labels = slice_labels_from(pc.lesion_mask, cfg.slice_area_threshold);
    pc.lesion_volume_mm3 = static_cast<double>(count_set(pc.lesion_mask)) * vv;
    pc.lung_volume_mm3 = static_cast<double>(count_set(pc.lung_mask)) * vv;
    pc.severity = pc.lesion_volume_mm3 > 0 && pc.lesion_volume_mm3 >= cfg.severe_lung_fraction * pc.lung_volume_mm3
                      ? Severity::Severe
                      : Severity::NonSevere;
    pc.cluster_style = cfg.lesion.mode;
    return pc;
}

std::array<int, 3> mix_counts(int n_cases, const CohortMix& mix) {
    const std::array<double, 3> f{mix.none, mix.focal, mix.diffuse};
    double sum = 0.0;
    for (double v : f) {
        if (v < 0.0) throw ArgumentError("cohort mix fractions must be non-negative");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ArgumentError("cohort mix fractions must sum to 1");
    std::array<int, 3> counts{};
    std::array<double, 3> rem{};
    int assigned = 0;
    for (int i = 0; i < 3; ++i) {
        const double exact = f[i] * n_cases;
        counts[i] = static_cast<int>(std::floor(exact + 1e-9));
        rem[i] = exact - counts[i];
        assigned += counts[i];
    }
    while (assigned < n_cases) {
        int best = 0;
        for (int i = 1; i < 3; ++i)
            if (rem[i] > rem[best]) best = i;
        ++counts[best];
        rem[best] = -1.0;
        ++assigned;
    }
    return counts;
}

std::vector<LesionMode> cohort_modes(const CohortOptions& opts) {
    const auto counts = mix_counts(opts.n_cases, opts.mix);
    std::vector<LesionMode> modes;
    modes.insert(modes.end(), counts[0], LesionMode::None);
    modes.insert(modes.end(), counts[1], LesionMode::Focal);
    modes.insert(modes.end(), counts[2], LesionMode::Diffuse);
    Rng rng(mix_seed(opts.base_seed, 0xC0407ULL));
    rng.shuffle(modes.begin(), modes.end());
    return modes;
}

PhantomConfig cohort_case_config(const CohortOptions& opts, int index, LesionMode mode) {
    PhantomConfig cfg = opts.base;
    cfg.seed = opts.base_seed + static_cast<std::uint64_t>(index);
    char id[32];
    std::snprintf(id, sizeof id, "case_%04d", index);
    cfg.case_id = id;
    Rng recipe(mix_seed(cfg.seed, 1));

    cfg.lesion.mode = mode;
    switch (mode) {
        case LesionMode::None:
            cfg.lesion.blob_count = 0;
            break;
        case LesionMode::Focal:
            cfg.lesion.blob_count = recipe.between(1, 3);
            cfg.lesion.radius_min = 2.5;
            cfg.lesion.radius_max = 4.5;
            break;
        case LesionMode::Diffuse:
            // many small scattered foci rather than a few large ones
            cfg.lesion.blob_count = recipe.between(60, 80);
            cfg.lesion.radius_min = 1.5;
            cfg.lesion.radius_max = 2.5;
            break;
    }
    return cfg;
}

CohortManifest generate_cohort(const CohortOptions& opts, const fs::path& out_dir) {
    if (opts.n_cases <= 0) throw ArgumentError("cohort needs at least one case");
    const auto modes = cohort_modes(opts);
    ensure_directory(out_dir);

    CohortManifest manifest;
    manifest.has_ground_truth = true;
    CsvTable man({"case_id", "volume", "lung_mask", "lesion_mask", "seed"});
    CsvTable truth({"case_id", "label", "lesion_volume_mm3", "severity", "cluster_style"});
    CsvTable slices({"case_id", "z", "label"});
    for (int i = 0; i < opts.n_cases; ++i) {
        const auto cfg = cohort_case_config(opts, i, modes[i]);
        const auto pc = generate_case(cfg);
        ManifestRow row;
        row.case_id = cfg.case_id;
        row.volume = out_dir / (cfg.case_id + ".cthdr");
        row.lung_mask = out_dir / (cfg.case_id + "_lung.cthdr");
        row.lesion_mask = out_dir / (cfg.case_id + "_lesion.cthdr");
        row.label = pc.lesion_volume_mm3 > 0 ? 1 : 0;
        row.lesion_volume_mm3 = pc.lesion_volume_mm3;
        row.severity = pc.severity;
        row.cluster_style = pc.cluster_style;
        row.seed = cfg.seed;
        save_volume(row.volume, pc.volume);
        save_volume(row.lung_mask, pc.lung_mask);
        save_volume(row.lesion_mask, pc.lesion_mask);

        man.add_row({row.case_id, row.volume.filename().string(), row.lung_mask.filename().string(),
                     row.lesion_mask.filename().string(), std::to_string(row.seed)});
        truth.add_row({row.case_id, std::to_string(row.label), format_number(row.lesion_volume_mm3),
                       to_string(row.severity), to_string(row.cluster_style)});
        for (int z = 0; z < cfg.dims.nz; ++z)
            slices.add_row({row.case_id, std::to_string(z), std::to_string(pc.slice_labels[z])});
        manifest.rows.push_back(std::move(row));
    }
    man.save(out_dir / "manifest.csv");
    truth.save(out_dir / "ground_truth.csv");
    slices.save(out_dir / "slice_labels.csv");
    return manifest;
}

CohortManifest load_manifest(const fs::path& data_dir) {
    if (!fs::is_directory(data_dir)) throw IoError("data directory not found: " + data_dir.string());
    const auto man = CsvTable::load(data_dir / "manifest.csv");
    CohortManifest out;
    std::map<std::string, std::size_t> by_id;
    for (std::size_t r = 0; r < man.size(); ++r) {
        ManifestRow row;
        row.case_id = man.at(r, "case_id");
        row.volume = data_dir / man.at(r, "volume");
        row.lung_mask = data_dir / man.at(r, "lung_mask");
        row.lesion_mask = data_dir / man.at(r, "lesion_mask");
        row.seed = static_cast<std::uint64_t>(parse_int(man.at(r, "seed"), "seed"));
        by_id[row.case_id] = out.rows.size();
        out.rows.push_back(std::move(row));
    }
    const fs::path truth_path = data_dir / "ground_truth.csv";
    if (fs::exists(truth_path)) {
        const auto truth = CsvTable::load(truth_path);
        out.has_ground_truth = true;
        for (std::size_t r = 0; r < truth.size(); ++r) {
            const auto it = by_id.find(truth.at(r, "case_id"));
            if (it == by_id.end()) continue;
            auto& row = out.rows[it->second];
            row.label = static_cast<int>(parse_int(truth.at(r, "label"), "label"));
            row.lesion_volume_mm3 = parse_double(truth.at(r, "lesion_volume_mm3"), "lesion_volume_mm3");
            row.severity = parse_severity(truth.at(r, "severity"));
            row.cluster_style = parse_lesion_mode(truth.at(r, "cluster_style"));
        }
    }
    return out;
}

}  // namespace lungcam
