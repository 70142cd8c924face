#include "lungcam/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include "lungcam/cluster.hpp"
#include "lungcam/csv.hpp"
#include "lungcam/digest.hpp"
#include "lungcam/error.hpp"
#include "lungcam/files.hpp"
#include "lungcam/plots.hpp"
#include "lungcam/png_writer.hpp"
#include "lungcam/stats.hpp"
#include "lungcam/volume_io.hpp"

namespace fs = std::filesystem;

namespace lungcam {

// ---------------------------------------------------------------- config

namespace {

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

template <typename Fn>
auto as_config(const std::string& key, Fn&& fn) {
    try {
        return fn();
    } catch (const FormatError& e) {
        throw ConfigError(key + ": " + e.what());
    }
}

int to_int(const std::string& key, const std::string& v) {
    return as_config(key, [&] { return static_cast<int>(parse_int(v, key)); });
}

double to_double(const std::string& key, const std::string& v) {
    return as_config(key, [&] { return parse_double(v, key); });
}

std::vector<std::string> words(const std::string& v) {
    std::vector<std::string> out;
    for (auto& w : split(v, ' '))
        if (!trim(w).empty()) out.push_back(trim(w));
    return out;
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

}  // namespace

std::vector<std::string> PipelineConfig::keys() {
    return {"data_dir",       "model_dir",      "output_dir",    "workers",         "seed",
            "n_cases",        "mix",            "window",        "seg.input_size",  "seg.base_channels",
            "seg.epochs",     "seg.batch_size", "seg.lr",        "val_fraction",    "cls.input_size",
            "cls.base_channels", "cls.epochs",  "cls.batch_size", "cls.lr",         "cls.augment",
            "t_activation",   "slice_threshold", "case_threshold", "heatmap_png",   "n_boot",
            "k",              "k_max",          "restarts",      "representatives"};
}

void PipelineConfig::set(const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    if (key == "data_dir") data_dir = v;
    else if (key == "model_dir") model_dir = v;
    else if (key == "output_dir") output_dir = v;
    else if (key == "workers") workers = to_int(key, v);
    else if (key == "seed") {
        const long long s = as_config(key, [&] { return parse_int(v, key); });
        if (s < 0) throw ConfigError("seed must be non-negative");
        seed = static_cast<std::uint64_t>(s);
        seg.seed = cls.seed = seed;
    } else if (key == "n_cases") n_cases = to_int(key, v);
    else if (key == "mix") {
        const auto w = words(v);
        if (w.size() != 3) throw ConfigError("mix: expected three fractions (none focal diffuse)");
        mix = {to_double(key, w[0]), to_double(key, w[1]), to_double(key, w[2])};
    } else if (key == "window") {
        const auto w = words(v);
        if (w.size() != 2) throw ConfigError("window: expected two HU bounds");
        window_lo = seg.window_lo = to_int(key, w[0]);
        window_hi = seg.window_hi = to_int(key, w[1]);
    } else if (key == "seg.input_size") seg.input_size = to_int(key, v);
    else if (key == "seg.base_channels") seg.base_channels = to_int(key, v);
    else if (key == "seg.epochs") seg.epochs = to_int(key, v);
    else if (key == "seg.batch_size") seg.batch_size = to_int(key, v);
    else if (key == "seg.lr") seg.learning_rate = to_double(key, v);
    else if (key == "val_fraction") seg.val_fraction = cls.val_fraction = to_double(key, v);
    else if (key == "cls.input_size") cls.input_size = to_int(key, v);
    else if (key == "cls.base_channels") cls.base_channels = to_int(key, v);
    else if (key == "cls.epochs") cls.epochs = to_int(key, v);
    else if (key == "cls.batch_size") cls.batch_size = to_int(key, v);
    else if (key == "cls.lr") cls.learning_rate = to_double(key, v);
    else if (key == "cls.augment") cls.augment = parse_bool(v, key);
    else if (key == "t_activation") scoring.t_activation = to_double(key, v);
    else if (key == "slice_threshold") scoring.slice_positive_threshold = to_double(key, v);
    else if (key == "case_threshold") {
        if (v.empty() || v == "none") {
            case_threshold_set = false;
            scoring.case_score_threshold = 0.0;
        } else {
            scoring.case_score_threshold = to_double(key, v);
            case_threshold_set = true;
        }
    } else if (key == "heatmap_png") heatmap_png = parse_bool(v, key);
    else if (key == "n_boot") n_boot = to_int(key, v);
    else if (key == "k") k = to_int(key, v);
    else if (key == "k_max") k_max = to_int(key, v);
    else if (key == "restarts") restarts = to_int(key, v);
    else if (key == "representatives") representatives = to_int(key, v);
    else throw ConfigError("unknown config key '" + key + "'");
}

void PipelineConfig::apply(const KeyValueText& kv) {
    for (const auto& [key, value] : kv.values()) set(key, value);
}

void PipelineConfig::apply_environment() {
    if (const char* dir = std::getenv("LUNGCAM_OUTPUT_DIR"); dir && *dir) output_dir = dir;
}

void PipelineConfig::validate() const {
    if (workers < 0) throw ConfigError("workers must be >= 0");
    if (n_cases <= 0) throw ConfigError("n_cases must be positive");
    const double total = mix.none + mix.focal + mix.diffuse;
    if (mix.none < 0 || mix.focal < 0 || mix.diffuse < 0 || std::abs(total - 1.0) > 1e-9) {
        throw ConfigError("mix fractions must be non-negative and sum to 1");
    }
    if (window_lo >= window_hi) throw ConfigError("window: lower bound must be below the upper bound");
    if (seg.input_size <= 0 || seg.input_size % 4 != 0) throw ConfigError("seg.input_size must be a positive multiple of 4");
    if (cls.input_size <= 0 || cls.input_size % 8 != 0) throw ConfigError("cls.input_size must be a positive multiple of 8");
    if (seg.base_channels <= 0 || cls.base_channels <= 0) throw ConfigError("base_channels must be positive");
    if (seg.epochs < 0 || cls.epochs < 0) throw ConfigError("epochs must be >= 0");
    if (seg.batch_size <= 0 || cls.batch_size <= 0) throw ConfigError("batch_size must be positive");
    if (!(seg.learning_rate > 0) || !(cls.learning_rate > 0)) throw ConfigError("learning rates must be positive");
    if (!(seg.val_fraction >= 0.0 && seg.val_fraction < 1.0)) throw ConfigError("val_fraction must lie in [0, 1)");
    scoring.validate();
    if (n_boot < 0) throw ConfigError("n_boot must be >= 0");
    if (k < 0) throw ConfigError("k must be >= 0");
    if (k_max < 2) throw ConfigError("k_max must be >= 2");
    if (restarts < 1) throw ConfigError("restarts must be >= 1");
    if (representatives < 1) throw ConfigError("representatives must be >= 1");
}

int PipelineConfig::worker_count() const {
    if (workers > 0) return workers;
    return std::max(1u, std::thread::hardware_concurrency());
}

KeyValueText PipelineConfig::snapshot() const {
    KeyValueText kv;
    kv.set("data_dir", data_dir.string());
    kv.set("model_dir", model_dir.string());
    kv.set("output_dir", output_dir.string());
    kv.set("workers", std::to_string(workers));
    kv.set("seed", std::to_string(seed));
    kv.set("n_cases", std::to_string(n_cases));
    kv.set("mix", format_number(mix.none) + " " + format_number(mix.focal) + " " + format_number(mix.diffuse));
    kv.set("window", std::to_string(window_lo) + " " + std::to_string(window_hi));
    kv.set("seg.input_size", std::to_string(seg.input_size));
    kv.set("seg.base_channels", std::to_string(seg.base_channels));
    kv.set("seg.epochs", std::to_string(seg.epochs));
    kv.set("seg.batch_size", std::to_string(seg.batch_size));
    kv.set("seg.lr", format_number(seg.learning_rate));
    kv.set("val_fraction", format_number(seg.val_fraction));
    kv.set("cls.input_size", std::to_string(cls.input_size));
    kv.set("cls.base_channels", std::to_string(cls.base_channels));
    kv.set("cls.epochs", std::to_string(cls.epochs));
    kv.set("cls.batch_size", std::to_string(cls.batch_size));
    kv.set("cls.lr", format_number(cls.learning_rate));
    kv.set("cls.augment", bool_text(cls.augment));
    kv.set("t_activation", format_number(scoring.t_activation));
    kv.set("slice_threshold", format_number(scoring.slice_positive_threshold));
    kv.set("case_threshold", case_threshold_set ? format_number(scoring.case_score_threshold) : "none");
    kv.set("heatmap_png", bool_text(heatmap_png));
    kv.set("n_boot", std::to_string(n_boot));
    kv.set("k", std::to_string(k));
    kv.set("k_max", std::to_string(k_max));
    kv.set("restarts", std::to_string(restarts));
    kv.set("representatives", std::to_string(representatives));
    return kv;
}

// ---------------------------------------------------------------- manifest

RunManifest::RunManifest(std::string command, const PipelineConfig& cfg) : command_(std::move(command)), cfg_(cfg) {}

void RunManifest::add_output(const fs::path& file) { outputs_.push_back(file); }

void RunManifest::time_stage(const std::string& stage, std::chrono::steady_clock::duration elapsed) {
    timings_ms_.emplace_back(stage, std::chrono::duration<double, std::milli>(elapsed).count());
}

fs::path RunManifest::write() const {
    std::string text = "# lungcam run manifest\n";
    text += "command: " + command_ + "\n";
    text += "seed: " + std::to_string(cfg_.seed) + "\n";
    const auto snapshot = cfg_.snapshot();
    for (const auto& [key, value] : snapshot.values()) text += "config." + key + ": " + value + "\n";
    for (const auto& [stage, ms] : timings_ms_) text += "timing." + stage + "_ms: " + format_fixed(ms, 1) + "\n";
    text += "output_count: " + std::to_string(outputs_.size()) + "\n";
    for (std::size_t i = 0; i < outputs_.size(); ++i) {
        const auto rel = fs::relative(outputs_[i], cfg_.output_dir).generic_string();
        text += "output." + std::to_string(i) + ": " + rel + " " + sha256_file(outputs_[i]) + "\n";
    }
    const fs::path path = cfg_.output_dir / ("run_manifest_" + command_ + ".txt");
    write_file_atomic(path, text);
    return path;
}

std::vector<std::string> verify_run_manifest(const fs::path& manifest) {
    const auto kv = KeyValueText::load(manifest);
    const auto n = parse_int(kv.get("output_count"), "output_count");
    std::vector<std::string> bad;
    for (long long i = 0; i < n; ++i) {
        const auto f = kv.fields("output." + std::to_string(i));
        if (f.size() != 2) throw FormatError(manifest.string() + ": malformed output entry " + std::to_string(i));
        const fs::path file = manifest.parent_path() / f[0];
        if (!fs::exists(file) || sha256_file(file) != f[1]) bad.push_back(f[0]);
    }
    return bad;
}

// ---------------------------------------------------------------- helpers

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
    if (n <= 0) return;
    workers = std::clamp(workers, 1, n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<int> next{0};
    auto body = [&] {
        for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        body();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(body);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

namespace {

using Clock = std::chrono::steady_clock;

SegModel load_segmenter(const PipelineConfig& cfg) { return load_seg_model(cfg.models() / kSegModelFile); }
ClsModel load_classifier(const PipelineConfig& cfg) { return load_cls_model(cfg.models() / kClsModelFile); }

CohortManifest require_manifest(const PipelineConfig& cfg) {
    auto m = load_manifest(cfg.data_dir);
    if (m.rows.empty()) throw ConfigError("cohort in " + cfg.data_dir.string() + " has no cases");
    return m;
}

// Per-slice ground-truth labels keyed by case.
std::map<std::string, std::vector<std::uint8_t>> load_slice_labels(const fs::path& data_dir) {
    const auto t = CsvTable::load(data_dir / "slice_labels.csv");
    std::map<std::string, std::vector<std::uint8_t>> out;
    for (std::size_t r = 0; r < t.size(); ++r) {
        auto& v = out[t.at(r, "case_id")];
        const auto z = static_cast<std::size_t>(parse_int(t.at(r, "z"), "z"));
        if (v.size() <= z) v.resize(z + 1, 0);
        v[z] = static_cast<std::uint8_t>(parse_int(t.at(r, "label"), "label") != 0);
    }
    return out;
}

std::vector<Image> gt_masks(const MaskVolume& m) {
    std::vector<Image> out;
    for (int z = 0; z < m.dims().nz; ++z) out.push_back(extract_slice(m, z));
    return out;
}

std::string style_of(const ManifestRow& row, bool abnormal) {
    return abnormal ? to_string(row.cluster_style) : to_string(LesionMode::None);
}

}  // namespace

std::vector<SegTrainingCase> segmenter_cases(const CohortManifest& manifest, const PipelineConfig& cfg) {
    std::vector<SegTrainingCase> cases(manifest.rows.size());
    parallel_for(static_cast<int>(cases.size()), cfg.worker_count(), [&](int i) {
        const auto& row = manifest.rows[i];
        cases[i] = {row.case_id, window_normalize(load_volume(row.volume), cfg.window_lo, cfg.window_hi),
                    load_mask(row.lung_mask)};
    });
    return cases;
}

std::vector<ClsSample> classifier_samples(const CohortManifest& manifest, const PipelineConfig& cfg) {
    const auto labels = load_slice_labels(cfg.data_dir);
    std::vector<std::vector<ClsSample>> per_case(manifest.rows.size());
    parallel_for(static_cast<int>(per_case.size()), cfg.worker_count(), [&](int i) {
        const auto& row = manifest.rows[i];
        const auto vol = window_normalize(load_volume(row.volume), cfg.window_lo, cfg.window_hi);
        const auto roi = case_roi(gt_masks(load_mask(row.lung_mask)));
        auto slices = crop_resize(vol, roi, cfg.cls.input_size);
        const auto it = labels.find(row.case_id);
        if (it == labels.end() || it->second.size() != slices.size()) {
            throw FormatError("slice labels missing or incomplete for " + row.case_id);
        }
        for (std::size_t z = 0; z < slices.size(); ++z) per_case[i].push_back({row.case_id, std::move(slices[z]), it->second[z]});
    });
    std::vector<ClsSample> out;
    for (auto& v : per_case)
        for (auto& s : v) out.push_back(std::move(s));
    return out;
}

CaseAnalysis analyze_case(const SegModel& seg, const ClsModel& cls, const CtVolume& volume, const PipelineConfig& cfg) {
    CaseAnalysis a;
    const auto norm = window_normalize(volume, seg.window_lo, seg.window_hi);
    const auto masks = segment_volume(seg, norm);
    a.roi = case_roi(masks);
    for (const auto& m : masks)
        a.lung_pixels.push_back(std::count_if(m.pixels().begin(), m.pixels().end(), [](float v) { return v > 0.5f; }));
    a.roi_slices = crop_resize(norm, a.roi, cls.input_size);
    a.slices = localize_slices(cls, a.roi_slices);

    std::vector<double> probs;
    std::vector<Image> maps;
    for (const auto& s : a.slices) {
        probs.push_back(s.probability);
        maps.push_back(s.fused);
    }
    a.heatmap = assemble_heatmap_volume(volume.dims(), volume.spacing(), volume.case_id(), probs, maps, a.roi, cfg.scoring);

    auto& r = a.report;
    r.case_id = volume.case_id();
    r.slice_probs = probs;
    r.n_positive_slices = static_cast<int>(
        std::count_if(probs.begin(), probs.end(), [&](double p) { return p > cfg.scoring.slice_positive_threshold; }));
    r.corona_score_cm3 = corona_score(a.heatmap, cfg.scoring);
    r.predicted_positive = classify_case(r.corona_score_cm3, cfg.scoring);
    return a;
}

// ---------------------------------------------------------------- commands

RunManifest cmd_phantom(const PipelineConfig& cfg) {
    cfg.validate();
    RunManifest run("phantom", cfg);
    const auto t0 = Clock::now();
    CohortOptions opts;
    opts.n_cases = cfg.n_cases;
    opts.base_seed = cfg.seed;
    opts.mix = cfg.mix;
    const auto manifest = generate_cohort(opts, cfg.output_dir);
    run.time_stage("generate", Clock::now() - t0);
    for (const auto& row : manifest.rows) {
        for (const auto& hdr : {row.volume, row.lung_mask, row.lesion_mask}) {
            run.add_output(hdr);
            run.add_output(payload_path_for(hdr));
        }
    }
    for (const char* f : {"manifest.csv", "ground_truth.csv", "slice_labels.csv"}) run.add_output(cfg.output_dir / f);
    run.write();
    return run;
}

RunManifest cmd_train_seg(const PipelineConfig& cfg) {
    cfg.validate();
    RunManifest run("train_seg", cfg);
    auto t0 = Clock::now();
    const auto manifest = require_manifest(cfg);
    const auto cases = segmenter_cases(manifest, cfg);
    run.time_stage("load", Clock::now() - t0);
    t0 = Clock::now();
    const auto result = train_segmenter(cases, cfg.seg);
    run.time_stage("train", Clock::now() - t0);

    ensure_directory(cfg.output_dir);
    const fs::path model = cfg.output_dir / kSegModelFile;
    const fs::path log = cfg.output_dir / "seg_training_log.csv";
    save_seg_model(model, result.model);
    training_log_table(result.log).save(log);
    run.add_output(model);
    run.add_output(fs::path(model).replace_extension(".weights"));
    run.add_output(log);
    run.write();
    return run;
}

RunManifest cmd_train_cls(const PipelineConfig& cfg) {
    cfg.validate();
    RunManifest run("train_cls", cfg);
    auto t0 = Clock::now();
    const auto manifest = require_manifest(cfg);
    const auto samples = classifier_samples(manifest, cfg);
    run.time_stage("load", Clock::now() - t0);
    t0 = Clock::now();
    const auto result = train_classifier(samples, cfg.cls);
    run.time_stage("train", Clock::now() - t0);

    ensure_directory(cfg.output_dir);
    const fs::path model = cfg.output_dir / kClsModelFile;
    const fs::path log = cfg.output_dir / "cls_training_log.csv";
    save_cls_model(model, result.model);
    training_log_table(result.log).save(log);
    run.add_output(model);
    run.add_output(fs::path(model).replace_extension(".weights"));
    run.add_output(log);
    run.write();
    return run;
}

RunManifest cmd_infer(const PipelineConfig& cfg) {
    cfg.validate();
    RunManifest run("infer", cfg);
    auto t0 = Clock::now();
    const auto seg = load_segmenter(cfg);
    const auto cls = load_classifier(cfg);
    const auto manifest = require_manifest(cfg);
    run.time_stage("load_models", Clock::now() - t0);

    t0 = Clock::now();
    std::vector<CaseAnalysis> results(manifest.rows.size());
    parallel_for(static_cast<int>(results.size()), cfg.worker_count(), [&](int i) {
        auto vol = load_volume(manifest.rows[i].volume);
        if (vol.case_id().empty()) vol.set_case_id(manifest.rows[i].case_id);
        results[i] = analyze_case(seg, cls, vol, cfg);
        results[i].report.case_id = manifest.rows[i].case_id;
    });
    run.time_stage("analyze", Clock::now() - t0);

    // everything computed; now write
    t0 = Clock::now();
    const fs::path heat_dir = cfg.output_dir / "heatmaps";
    ensure_directory(heat_dir);
    CsvTable cases({"case_id", "n_positive_slices", "corona_score_cm3", "predicted_label"});
    CsvTable slices({"case_id", "z", "probability"});
    CsvTable rois({"case_id", "x0", "y0", "x1", "y1"});
    std::vector<std::string> fheader{"case_id", "z"};
    const int d = results.empty() || results.front().slices.empty()
                      ? 0
                      : static_cast<int>(results.front().slices.front().feature.size());
    for (int j = 0; j < d; ++j) fheader.push_back("f" + std::to_string(j));
    CsvTable features(fheader);

    for (auto& a : results) {
        const auto& r = a.report;
        const std::string label = !cfg.case_threshold_set ? "unscored" : r.predicted_positive ? "positive" : "negative";
        cases.add_row({r.case_id, std::to_string(r.n_positive_slices), format_number(r.corona_score_cm3), label});
        rois.add_row({r.case_id, std::to_string(a.roi.x0), std::to_string(a.roi.y0), std::to_string(a.roi.x1),
                      std::to_string(a.roi.y1)});
        for (std::size_t z = 0; z < a.slices.size(); ++z) {
            slices.add_row({r.case_id, std::to_string(z), format_number(a.slices[z].probability)});
            const double slice_area = static_cast<double>(a.heatmap.dims().nx) * a.heatmap.dims().ny;
            if (static_cast<double>(a.lung_pixels[z]) < kFeatureMinLungFraction * slice_area) continue;
            std::vector<std::string> row{r.case_id, std::to_string(z)};
            for (double f : a.slices[z].feature) row.push_back(format_number(f));
            features.add_row(std::move(row));
        }
        const fs::path hdr = heat_dir / (r.case_id + "_heatmap.cthdr");
        a.heatmap.set_case_id(r.case_id);
        save_volume(hdr, a.heatmap);
        run.add_output(hdr);
        run.add_output(payload_path_for(hdr));
        if (cfg.heatmap_png) {
            for (std::size_t z = 0; z < a.slices.size(); ++z) {
                if (!(a.slices[z].probability > cfg.scoring.slice_positive_threshold)) continue;
                char name[64];
                std::snprintf(name, sizeof name, "_z%03zu.png", z);
                const fs::path png = heat_dir / (r.case_id + name);
                write_png(png, render_overlay(a.roi_slices[z], &a.slices[z].fused));
                run.add_output(png);
            }
        }
    }
    for (auto& [table, name] : std::vector<std::pair<CsvTable*, const char*>>{
             {&cases, "cases.csv"}, {&slices, "slice_probs.csv"}, {&features, "features.csv"}, {&rois, "rois.csv"}}) {
        table->save(cfg.output_dir / name);
        run.add_output(cfg.output_dir / name);
    }
    run.time_stage("write", Clock::now() - t0);
    run.write();
    return run;
}

RunManifest cmd_stats(const PipelineConfig& cfg) {
    cfg.validate();
    RunManifest run("stats", cfg);
    const auto t0 = Clock::now();
    const auto manifest = require_manifest(cfg);
    if (!manifest.has_ground_truth) throw ConfigError("stats needs ground_truth.csv in " + cfg.data_dir.string());
    const auto cases = CsvTable::load(cfg.output_dir / "cases.csv");
    std::map<std::string, const ManifestRow*> truth;
    for (const auto& row : manifest.rows) truth[row.case_id] = &row;

    std::vector<std::string> ids;
    std::vector<double> scores;
    std::vector<std::uint8_t> labels;
    std::vector<double> severe, non_severe;
    CsvTable severity({"case_id", "severity", "corona_score_cm3"});
    for (std::size_t r = 0; r < cases.size(); ++r) {
        const auto& id = cases.at(r, "case_id");
        const auto it = truth.find(id);
        if (it == truth.end()) throw FormatError("cases.csv: case " + id + " has no ground truth");
        const double s = parse_double(cases.at(r, "corona_score_cm3"), "corona_score_cm3");
        ids.push_back(id);
        scores.push_back(s);
        labels.push_back(static_cast<std::uint8_t>(it->second->label != 0));
        if (it->second->label) {
            (it->second->severity == Severity::Severe ? severe : non_severe).push_back(s);
            severity.add_row({id, to_string(it->second->severity), format_number(s)});
        }
    }
    const auto n_pos = std::count(labels.begin(), labels.end(), 1);
    if (n_pos == 0 || n_pos == static_cast<long>(labels.size())) {
        throw ConfigError("stats needs both positive and negative cases; the cohort has a single class");
    }

    const auto roc = roc_auc_ci(scores, labels, cfg.n_boot, cfg.seed);
    const auto youden = youden_threshold(scores, labels);

    std::string text = "# lungcam cohort statistics\n";
    auto line = [&](const std::string& k, const std::string& v) { text += k + ": " + v + "\n"; };
    line("n_cases", std::to_string(scores.size()));
    line("n_positive", std::to_string(n_pos));
    line("case_auc", format_number(roc.auc));
    line("case_auc_ci_low", format_number(roc.ci_low));
    line("case_auc_ci_high", format_number(roc.ci_high));
    line("bootstrap_replicates", std::to_string(roc.n_boot));
    line("bootstrap_seed", std::to_string(roc.seed));
    line("youden_threshold_cm3", format_number(youden.threshold));
    line("youden_sensitivity", format_number(youden.sensitivity));
    line("youden_specificity", format_number(youden.specificity));
    line("n_severe", std::to_string(severe.size()));
    line("n_non_severe", std::to_string(non_severe.size()));
    if (!severe.empty() && !non_severe.empty()) {
        const auto w = wilcoxon_rank_sum(severe, non_severe);
        line("median_severe_cm3", format_number(w.median_a));
        line("median_non_severe_cm3", format_number(w.median_b));
        line("wilcoxon_rank_sum", format_number(w.rank_sum));
        line("wilcoxon_p", format_number(w.p_value));
        line("wilcoxon_method", w.exact ? "exact" : "normal");
    } else {
        line("wilcoxon_p", "nan");
    }

    // slice-level metrics when both inputs are present
    const fs::path slice_probs = cfg.output_dir / "slice_probs.csv";
    const fs::path slice_truth = cfg.data_dir / "slice_labels.csv";
    if (fs::exists(slice_probs) && fs::exists(slice_truth)) {
        const auto gt = load_slice_labels(cfg.data_dir);
        const auto sp = CsvTable::load(slice_probs);
        std::vector<double> p;
        std::vector<std::uint8_t> y;
        for (std::size_t r = 0; r < sp.size(); ++r) {
            const auto it = gt.find(sp.at(r, "case_id"));
            const auto z = static_cast<std::size_t>(parse_int(sp.at(r, "z"), "z"));
            if (it == gt.end() || z >= it->second.size()) continue;
            p.push_back(parse_double(sp.at(r, "probability"), "probability"));
            y.push_back(it->second[z]);
        }
        const auto np = std::count(y.begin(), y.end(), 1);
        if (np > 0 && np < static_cast<long>(y.size())) {
            const auto m = evaluate_slices(p, y, cfg.scoring.slice_positive_threshold);
            line("slice_auc", format_number(m.auc));
            line("slice_sensitivity", format_number(m.sensitivity));
            line("slice_specificity", format_number(m.specificity));
            line("slice_tp", std::to_string(m.tp));
            line("slice_fp", std::to_string(m.fp));
            line("slice_tn", std::to_string(m.tn));
            line("slice_fn", std::to_string(m.fn));
        }
    }
    run.time_stage("compute", Clock::now() - t0);

    CsvTable roc_csv({"threshold", "fpr", "tpr"});
    for (const auto& pt : roc.curve) roc_csv.add_row({format_number(pt.threshold), format_number(pt.fpr), format_number(pt.tpr)});
    const fs::path out = cfg.output_dir;
    ensure_directory(out);
    roc_csv.save(out / "roc.csv");
    write_png(out / "roc.png", plot_roc(roc.curve));
    severity.save(out / "severity_boxplot.csv");
    write_png(out / "severity_boxplot.png", plot_boxes({{"severe", severe}, {"non-severe", non_severe}}));
    write_file_atomic(out / "stats.txt", text);
    for (const char* f : {"roc.csv", "roc.png", "severity_boxplot.csv", "severity_boxplot.png", "stats.txt"}) run.add_output(out / f);
    run.write();
    return run;
}

RunManifest cmd_cluster(const PipelineConfig& cfg) {
    cfg.validate();
    RunManifest run("cluster", cfg);
    const auto t0 = Clock::now();
    const auto table = CsvTable::load(cfg.output_dir / "features.csv");
    std::map<std::string, const ManifestRow*> truth;
    std::map<std::string, std::vector<std::uint8_t>> slice_gt;
    CohortManifest manifest;
    if (fs::exists(cfg.data_dir / "manifest.csv")) {
        manifest = load_manifest(cfg.data_dir);
        for (const auto& row : manifest.rows) truth[row.case_id] = &row;
        if (fs::exists(cfg.data_dir / "slice_labels.csv")) slice_gt = load_slice_labels(cfg.data_dir);
    }

    FeatureMatrix fm;
    std::vector<double> values;
    for (std::size_t r = 0; r < table.size(); ++r) {
        values.clear();
        for (std::size_t j = 2; j < table.header().size(); ++j) values.push_back(parse_double(table.rows()[r][j], "feature"));
        SliceId id{table.at(r, "case_id"), static_cast<int>(parse_int(table.at(r, "z"), "z"))};
        std::string label;
        const auto t = truth.find(id.case_id);
        const auto g = slice_gt.find(id.case_id);
        if (t != truth.end() && g != slice_gt.end() && static_cast<std::size_t>(id.z) < g->second.size()) {
            label = style_of(*t->second, g->second[id.z] != 0);
        }
        fm.add_row(values, std::move(id), std::move(label));
    }
    if (fm.rows < 3) throw ConfigError("clustering needs at least three slices");

    const auto normalized = zscore(fm);
    const auto elbow = elbow_select(normalized, cfg.k_max, cfg.seed, cfg.restarts);
    const int k = cfg.k > 0 ? std::min(cfg.k, normalized.rows) : elbow.k;
    const auto model = kmeans(normalized, k, cfg.seed, cfg.restarts);
    const auto proj = pca2(normalized);
    const auto reps = representatives(model, normalized, cfg.representatives);
    run.time_stage("cluster", Clock::now() - t0);

    CsvTable clusters({"case_id", "z", "label", "cluster", "distance"});
    CsvTable pca({"case_id", "z", "label", "cluster", "pc1", "pc2"});
    std::vector<std::string> label_names;
    std::vector<int> markers;
    for (int i = 0; i < fm.rows; ++i) {
        const auto& id = fm.ids[i];
        clusters.add_row({id.case_id, std::to_string(id.z), fm.labels[i], std::to_string(model.assignment[i]),
                          format_number(model.distance[i])});
        pca.add_row({id.case_id, std::to_string(id.z), fm.labels[i], std::to_string(model.assignment[i]),
                     format_number(proj.coords[2 * i]), format_number(proj.coords[2 * i + 1])});
        auto it = std::find(label_names.begin(), label_names.end(), fm.labels[i]);
        if (it == label_names.end()) it = label_names.insert(label_names.end(), fm.labels[i]);
        markers.push_back(static_cast<int>(it - label_names.begin()));
    }
    CsvTable elbow_csv({"k", "inertia"});
    for (std::size_t i = 0; i < elbow.inertia.size(); ++i) elbow_csv.add_row({std::to_string(i + 1), format_number(elbow.inertia[i])});

    std::string rep_text = "# representative key slices per cluster (nearest to centroid first)\n";
    rep_text += "k: " + std::to_string(k) + "\n";
    rep_text += "elbow_k: " + std::to_string(elbow.k) + "\n";
    if (elbow.shrunk) rep_text += "warning: k_max reduced to " + std::to_string(elbow.k_max) + " (fewer slices than k_max)\n";
    rep_text += "explained_variance: " + format_number(proj.explained[0]) + " " + format_number(proj.explained[1]) + "\n";
    const auto purity = cluster_purity(model, fm.labels);
    for (int c = 0; c < k; ++c) {
        std::string line = "cluster." + std::to_string(c) + ":";
        for (int i : reps[c]) line += " " + fm.ids[i].case_id + "/z" + std::to_string(fm.ids[i].z);
        rep_text += line + "\n";
        rep_text += "cluster." + std::to_string(c) + ".purity: " + format_number(purity[c]) + "\n";
    }

    const fs::path out = cfg.output_dir;
    clusters.save(out / "clusters.csv");
    pca.save(out / "pca.csv");
    elbow_csv.save(out / "elbow.csv");
    write_png(out / "pca_scatter.png", plot_scatter(proj.coords, model.assignment, markers));
    write_png(out / "elbow.png", plot_curve(elbow.inertia, elbow.k));
    write_file_atomic(out / "representatives.txt", rep_text);
    for (const char* f : {"clusters.csv", "pca.csv", "elbow.csv", "pca_scatter.png", "elbow.png", "representatives.txt"})
        run.add_output(out / f);
    run.write();
    return run;
}

}  // namespace lungcam
