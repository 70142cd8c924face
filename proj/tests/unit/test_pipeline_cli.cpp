#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include "lungcam/csv.hpp"
#include "lungcam/digest.hpp"
#include "lungcam/error.hpp"
#include "lungcam/files.hpp"
#include "lungcam/kv_text.hpp"
#include "lungcam/pipeline.hpp"
#include "lungcam/stats.hpp"
#include "oracles.hpp"

using namespace lungcam;
namespace fs = std::filesystem;

namespace {

const std::string kTiny =
    " --set seg.input_size=32 --set seg.base_channels=4 --set seg.epochs=1"
    " --set cls.input_size=16 --set cls.base_channels=4 --set cls.epochs=1 --set n_boot=50";

int run_cli(const std::string& args, const std::string& env = {}) {
    const std::string cmd = env + (env.empty() ? "" : " ") + "'" LUNGCAM_CLI_PATH "' " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

// Six-case cohort plus tiny models, built once for the whole suite.
struct Fixture {
    oracle::TempDir root{"cli_fixture"};
    fs::path data = root / "data";
    fs::path models = root / "models";

    Fixture() {
        REQUIRE(run_cli("phantom --n 6 --seed 3 --out " + q(data)) == 0);
        REQUIRE(run_cli("train seg --data " + q(data) + " --out " + q(models) + kTiny) == 0);
        REQUIRE(run_cli("train cls --data " + q(data) + " --out " + q(models) + kTiny) == 0);
    }
};

Fixture& fixture() {
    static Fixture f;
    return f;
}

std::string infer_args(const fs::path& data, const fs::path& models, const fs::path& out, int workers) {
    return "infer --data " + q(data) + " --models " + q(models) + " --out " + q(out) + " --workers " +
           std::to_string(workers) + " --case-threshold 0.01" + kTiny;
}

}  // namespace

TEST_SUITE("pipeline_cli") {

TEST_CASE("usage and configuration errors exit with code 2") {
    oracle::TempDir tmp("cli_usage");
    CHECK(run_cli("") == 2);
    CHECK(run_cli("bogus") == 2);
    CHECK(run_cli("phantom --no-such-flag") == 2);
    CHECK(run_cli("phantom --out " + q(tmp / "o") + " --set unknown_key=1") == 2);
    CHECK(run_cli("phantom --out " + q(tmp / "o") + " --set n_cases=zero") == 2);
    CHECK(run_cli("phantom --out " + q(tmp / "o") + " --mix '0.5 0.5 0.5'") == 2);
    CHECK(run_cli("train xyz") == 2);
    CHECK(run_cli("phantom --config " + q(tmp / "missing.cfg")) == 1);
    CHECK(run_cli("--help") == 0);
    CHECK_FALSE(fs::exists(tmp / "o"));
}

TEST_CASE("gradcheck subcommand passes") { CHECK(run_cli("gradcheck --trials 2") == 0); }

TEST_CASE("phantom output is byte-identical across runs") {
    oracle::TempDir tmp("cli_phantom");
    REQUIRE(run_cli("phantom --n 4 --seed 9 --out " + q(tmp / "a")) == 0);
    REQUIRE(run_cli("phantom --n 4 --seed 9 --out " + q(tmp / "b")) == 0);
    for (const auto& e : fs::directory_iterator(tmp / "a")) {
        const auto name = e.path().filename();
        if (name.string().rfind("run_manifest", 0) == 0) continue;
        CHECK(sha256_file(e.path()) == sha256_file(tmp / "b" / name));
    }
    CHECK(verify_run_manifest(tmp / "a" / "run_manifest_phantom.txt").empty());
    write_file_atomic(tmp / "a" / "manifest.csv", "tampered\n");
    CHECK(verify_run_manifest(tmp / "a" / "run_manifest_phantom.txt") == std::vector<std::string>{"manifest.csv"});
}

TEST_CASE("config precedence: defaults < file < environment < --set < flags") {
    oracle::TempDir tmp("cli_precedence");
    write_file_atomic(tmp / "p.cfg", "seed: 5\nn_cases: 2\noutput_dir: " + (tmp / "from_file").string() + "\n");
    const std::string cfg = " --config " + q(tmp / "p.cfg");

    REQUIRE(run_cli("phantom" + cfg) == 0);
    auto kv = KeyValueText::load(tmp / "from_file" / "run_manifest_phantom.txt");
    CHECK(kv.get("config.seed") == "5");
    CHECK(kv.get("config.n_cases") == "2");

    const std::string env = "LUNGCAM_OUTPUT_DIR=" + q(tmp / "from_env");
    REQUIRE(run_cli("phantom" + cfg, env) == 0);
    CHECK(fs::exists(tmp / "from_env" / "run_manifest_phantom.txt"));

    REQUIRE(run_cli("phantom" + cfg + " --set output_dir=" + q(tmp / "from_set") + " --set seed=6", env) == 0);
    kv = KeyValueText::load(tmp / "from_set" / "run_manifest_phantom.txt");
    CHECK(kv.get("config.seed") == "6");

    REQUIRE(run_cli("phantom" + cfg + " --set output_dir=x --out " + q(tmp / "from_flag") + " --set seed=6 --seed 7", env) ==
            0);
    kv = KeyValueText::load(tmp / "from_flag" / "run_manifest_phantom.txt");
    CHECK(kv.get("config.seed") == "7");
    CHECK_FALSE(fs::exists("x"));
}

TEST_CASE("config keys round-trip through the snapshot") {
    PipelineConfig cfg;
    cfg.set("k", "3");
    cfg.set("case_threshold", "0.25");
    cfg.set("mix", "0.2 0.3 0.5");
    PipelineConfig back;
    back.apply(cfg.snapshot());
    CHECK(back.snapshot().values() == cfg.snapshot().values());
    CHECK(back.case_threshold_set);
    CHECK(back.k == 3);
    for (const auto& key : PipelineConfig::keys()) CHECK_NOTHROW(back.set(key, cfg.snapshot().get(key)));
    CHECK_THROWS_AS(back.set("nope", "1"), ConfigError);
    back.set("t_activation", "2");
    CHECK_THROWS_AS(back.validate(), ConfigError);
}

TEST_CASE("infer is byte-identical across worker counts and stats agree with cases.csv") {
    auto& f = fixture();
    oracle::TempDir tmp("cli_infer");
    REQUIRE(run_cli(infer_args(f.data, f.models, tmp / "w1", 1)) == 0);
    REQUIRE(run_cli(infer_args(f.data, f.models, tmp / "w3", 3)) == 0);
    for (const char* file : {"cases.csv", "slice_probs.csv", "features.csv", "rois.csv"})
        CHECK(sha256_file(tmp / "w1" / file) == sha256_file(tmp / "w3" / file));
    for (const auto& e : fs::directory_iterator(tmp / "w1" / "heatmaps"))
        CHECK(sha256_file(e.path()) == sha256_file(tmp / "w3" / "heatmaps" / e.path().filename()));
    CHECK(verify_run_manifest(tmp / "w1" / "run_manifest_infer.txt").empty());

    const auto cases = CsvTable::load(tmp / "w1" / "cases.csv");
    CHECK(cases.size() == 6);
    for (std::size_t r = 0; r < cases.size(); ++r) {
        const double s = parse_double(cases.at(r, "corona_score_cm3"), "score");
        CHECK(s >= 0.0);
        CHECK(cases.at(r, "predicted_label") == (s > 0.01 ? "positive" : "negative"));
    }

    for (const char* w : {"w1", "w3"})
        REQUIRE(run_cli("stats --data " + q(f.data) + " --out " + q(tmp / w) + " --seed 4" + kTiny) == 0);
    CHECK(sha256_file(tmp / "w1" / "stats.txt") == sha256_file(tmp / "w3" / "stats.txt"));
    CHECK(sha256_file(tmp / "w1" / "roc.csv") == sha256_file(tmp / "w3" / "roc.csv"));

    const auto truth = CsvTable::load(f.data / "ground_truth.csv");
    std::map<std::string, std::uint8_t> label;
    for (std::size_t r = 0; r < truth.size(); ++r) label[truth.at(r, "case_id")] = truth.at(r, "label") == "1";
    std::vector<double> scores;
    std::vector<std::uint8_t> labels;
    for (std::size_t r = 0; r < cases.size(); ++r) {
        scores.push_back(parse_double(cases.at(r, "corona_score_cm3"), "score"));
        labels.push_back(label.at(cases.at(r, "case_id")));
    }
    const auto stats = KeyValueText::load(tmp / "w1" / "stats.txt");
    CHECK(parse_double(stats.get("case_auc"), "auc") == doctest::Approx(oracle::auc_pairs(scores, labels)).epsilon(1e-12));
    CHECK(fs::exists(tmp / "w1" / "roc.png"));
    CHECK(fs::exists(tmp / "w1" / "severity_boxplot.png"));

    REQUIRE(run_cli("cluster --data " + q(f.data) + " --out " + q(tmp / "w1") + " --k 3" + kTiny) == 0);
    const auto clusters = CsvTable::load(tmp / "w1" / "clusters.csv");
    CHECK(clusters.size() == CsvTable::load(tmp / "w1" / "features.csv").size());
    CHECK(fs::exists(tmp / "w1" / "pca_scatter.png"));
}

TEST_CASE("a corrupted volume fails infer with exit 1 and leaves no outputs") {
    auto& f = fixture();
    oracle::TempDir tmp("cli_corrupt");
    fs::copy(f.data, tmp / "data", fs::copy_options::recursive);
    const auto first = CsvTable::load(tmp / "data" / "manifest.csv").at(0, "volume");
    const fs::path hdr = tmp / "data" / first;
    std::string text = read_file(hdr);
    text.replace(text.find("dims:"), 5, "dims: 3");  // first dimension no longer matches the payload
    write_file_atomic(hdr, text);
    CHECK(run_cli(infer_args(tmp / "data", f.models, tmp / "out", 2)) == 1);
    CHECK((!fs::exists(tmp / "out") || fs::is_empty(tmp / "out")));

    // missing models are file errors too
    CHECK(run_cli(infer_args(f.data, tmp / "no_models", tmp / "out2", 1)) == 1);
}

TEST_CASE("parallel_for runs every index and rethrows the lowest failing one") {
    std::vector<int> hit(50, 0);
    parallel_for(50, 4, [&](int i) { hit[i] += 1; });
    CHECK(std::all_of(hit.begin(), hit.end(), [](int h) { return h == 1; }));
    try {
        parallel_for(20, 3, [](int i) {
            if (i == 7 || i == 12) throw ArgumentError("fail " + std::to_string(i));
        });
        FAIL("expected an exception");
    } catch (const ArgumentError& e) {
        CHECK(std::string(e.what()) == "fail 7");
    }
}

}  // TEST_SUITE
