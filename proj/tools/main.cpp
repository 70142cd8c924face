// lungcam: command-line front end for the chest-CT pipeline.
//
// Exit codes: 0 success, 1 I/O or file-format failure (or a failed
// gradient check), 2 configuration or usage error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lungcam/csv.hpp"
#include "lungcam/error.hpp"
#include "lungcam/kv_text.hpp"
#include "lungcam/nn/gradcheck.hpp"
#include "lungcam/pipeline.hpp"

namespace fs = std::filesystem;
using namespace lungcam;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitConfig = 2;

// Flag values are collected as key -> text and applied last, so they win
// over the config file and the environment.
struct FlagSet {
    std::map<std::string, std::string> values;
    std::vector<std::string> assignments;  // --set key=value

    template <typename T>
    void bind(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
        app->add_option_function<std::string>(flag, [this, key](const std::string& v) { values[key] = v; }, help)
            ->type_name(std::is_same_v<T, std::string> ? "TEXT" : std::is_floating_point_v<T> ? "FLOAT" : "INT");
    }
};

void add_common(CLI::App* app, FlagSet& flags) {
    flags.bind<std::string>(app, "--data", "data_dir", "cohort directory (manifest.csv, volumes)");
    flags.bind<std::string>(app, "--models", "model_dir", "directory holding trained models");
    flags.bind<std::string>(app, "--out", "output_dir", "output directory");
    flags.bind<int>(app, "--workers", "workers", "worker threads (0 = available parallelism)");
    flags.bind<int>(app, "--seed", "seed", "seed for every random stream");
    app->add_option("--set", flags.assignments, "any config key as key=value (repeatable)");
}

PipelineConfig build_config(const std::optional<std::string>& config_path, const FlagSet& flags) {
    PipelineConfig cfg;
    fs::path file;
    if (config_path) {
        file = *config_path;
        if (!fs::exists(file)) throw IoError("config file not found: " + file.string());
    } else if (fs::exists("pipeline.cfg")) {
        file = "pipeline.cfg";
    }
    if (!file.empty()) {
        try {
            cfg.apply(KeyValueText::load(file));
        } catch (const FormatError& e) {
            throw ConfigError(e.what());
        }
    }
    cfg.apply_environment();
    for (const auto& a : flags.assignments) {
        const auto eq = a.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + a + "'");
        cfg.set(trim(a.substr(0, eq)), a.substr(eq + 1));
    }
    for (const auto& [key, value] : flags.values) cfg.set(key, value);
    cfg.validate();
    return cfg;
}

void report(const RunManifest& run, const PipelineConfig& cfg, const std::string& what) {
    std::cout << what << ": wrote " << run.outputs().size() << " files under " << cfg.output_dir.string() << "\n";
}

int run_gradcheck(int trials, std::uint64_t seed) {
    const auto results = nn::gradcheck_all_layers(trials, seed);
    bool ok = true;
    std::map<std::string, double> worst;
    for (const auto& r : results) worst[r.label] = std::max(worst[r.label], r.max_rel_error);
    for (const auto& [label, err] : worst) {
        const bool pass = err < 1e-3;
        ok = ok && pass;
        std::printf("%-20s max_rel_error %.3e  %s\n", label.c_str(), err, pass ? "ok" : "FAIL");
    }
    return ok ? kExitOk : kExitIo;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lungcam: lung segmentation, slice classification, GradCAM localization and severity scoring"};
    app.require_subcommand(1);
    app.fallthrough();  // --config may follow the subcommand
    std::optional<std::string> config_path;
    app.add_option("--config", config_path, "key: value config file (default: ./pipeline.cfg if present)");

    FlagSet flags;

    auto* phantom = app.add_subcommand("phantom", "generate a synthetic cohort");
    add_common(phantom, flags);
    flags.bind<int>(phantom, "--n", "n_cases", "number of cases");
    flags.bind<std::string>(phantom, "--mix", "mix", "fractions \"none focal diffuse\"");

    auto* train = app.add_subcommand("train", "train the segmenter or the classifier");
    std::string which;
    train->add_option("model", which, "seg or cls")->required()->check(CLI::IsMember({"seg", "cls"}));
    add_common(train, flags);
    std::optional<int> epochs, batch;
    std::optional<double> lr;
    train->add_option("--epochs", epochs, "training epochs");
    train->add_option("--batch-size", batch, "mini-batch size");
    train->add_option("--lr", lr, "Adam learning rate");

    auto* infer = app.add_subcommand("infer", "segment, classify, localize and score every case");
    add_common(infer, flags);
    flags.bind<double>(infer, "--case-threshold", "case_threshold", "corona score (cm^3) above which a case is positive");
    flags.bind<double>(infer, "--t-activation", "t_activation", "heatmap activation threshold");
    flags.bind<double>(infer, "--slice-threshold", "slice_threshold", "slice probability threshold");
    bool png = false;
    infer->add_flag("--png", png, "also write per-slice heatmap overlays");

    auto* stats = app.add_subcommand("stats", "case ROC/AUC, severity test and slice metrics");
    add_common(stats, flags);
    flags.bind<int>(stats, "--n-boot", "n_boot", "bootstrap replicates");

    auto* cluster = app.add_subcommand("cluster", "k-means, elbow and PCA on slice features");
    add_common(cluster, flags);
    flags.bind<int>(cluster, "--k", "k", "number of clusters (0 = elbow)");
    flags.bind<int>(cluster, "--k-max", "k_max", "largest k tried by the elbow rule");
    flags.bind<int>(cluster, "--restarts", "restarts", "k-means restarts");

    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every layer type");
    int trials = 10;
    std::uint64_t gc_seed = 1;
    gradcheck->add_option("--trials", trials, "random trials per layer type");
    gradcheck->add_option("--seed", gc_seed, "base seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (gradcheck->parsed()) return run_gradcheck(trials, gc_seed);

        if (train->parsed()) {
            const std::string prefix = which == "seg" ? "seg." : "cls.";
            if (epochs) flags.values[prefix + "epochs"] = std::to_string(*epochs);
            if (batch) flags.values[prefix + "batch_size"] = std::to_string(*batch);
            if (lr) flags.values[prefix + "lr"] = format_number(*lr);
        }
        if (infer->parsed() && png) flags.values["heatmap_png"] = "true";

        const auto cfg = build_config(config_path, flags);
        if (phantom->parsed()) report(cmd_phantom(cfg), cfg, "phantom");
        else if (train->parsed()) report(which == "seg" ? cmd_train_seg(cfg) : cmd_train_cls(cfg), cfg, "train " + which);
        else if (infer->parsed()) report(cmd_infer(cfg), cfg, "infer");
        else if (stats->parsed()) report(cmd_stats(cfg), cfg, "stats");
        else if (cluster->parsed()) report(cmd_cluster(cfg), cfg, "cluster");
        return kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\nrun with --help for usage\n";
        return kExitConfig;
    } catch (const ArgumentError& e) {
        std::cerr << "invalid argument: " << e.what() << "\nrun with --help for usage\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
}
