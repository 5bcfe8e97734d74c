#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "adasense/bench.hpp"
#include "helpers.hpp"

using namespace adasense;
namespace fs = std::filesystem;

namespace {

ExperimentConfig gaussian_cfg() {
    auto j = nlohmann::json::parse(R"({
        "prior": {"type": "gaussian",
                  "mean": [0.0, 0.0, 0.0],
                  "cov": [[4.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.25]]},
        "N": 2, "r": 1, "trials": 3, "seed": 7
    })");
    return config_from_json(j);
}

fs::path fresh_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("adasense_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) { return read_text_file(p); }

}  // namespace

TEST_CASE("default sample count follows ceil(4r/3)") {
    REQUIRE(default_sample_count(1) == 2);
    REQUIRE(default_sample_count(3) == 4);
    REQUIRE(default_sample_count(24) == 32);
    ExperimentConfig cfg = gaussian_cfg();
    REQUIRE(cfg.effective_samples() == 2);
    cfg.samples = 5;
    REQUIRE(cfg.effective_samples() == 5);
}

TEST_CASE("config parsing validates inputs") {
    auto good = nlohmann::json::parse(R"({
        "prior": {"type": "gaussian", "mean": [0.0], "cov": [[1.0]]},
        "trials": 1
    })");
    REQUIRE_NOTHROW(config_from_json(good));

    auto zero_trials = good;
    zero_trials["trials"] = 0;
    REQUIRE_THROWS_AS(config_from_json(zero_trials), ConfigError);

    auto bad_mode = good;
    bad_mode["selection"] = "magic";
    REQUIRE_THROWS_AS(config_from_json(bad_mode), ConfigError);

    auto bad_sampler = good;
    bad_sampler["sampler"] = "langevin";
    REQUIRE_THROWS_AS(config_from_json(bad_sampler), ConfigError);

    auto bad_restore = good;
    bad_restore["restoration"] = "cnn";
    REQUIRE_THROWS_AS(config_from_json(bad_restore), ConfigError);

    auto missing_file = nlohmann::json::parse(
        R"({"prior_file": "does_not_exist.json"})");
    try {
        config_from_json(missing_file);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        REQUIRE(std::string(e.what()).find("does_not_exist.json") !=
                std::string::npos);
    }
}

TEST_CASE("config candidate dimension defaults to the prior dimension") {
    auto j = nlohmann::json::parse(R"({
        "prior": {"type": "gaussian",
                  "mean": [0.0, 0.0, 0.0, 0.0],
                  "cov": [[1,0,0,0],[0,1,0,0],[0,0,1,0],[0,0,0,1]]},
        "selection": "constrained-heuristic",
        "candidates": {"family": "pixel"}
    })");
    ExperimentConfig cfg = config_from_json(j);
    REQUIRE(cfg.candidates.has_value());
    REQUIRE(cfg.candidates->dim == 4);
    REQUIRE(cfg.candidates->size() == 4);
}

TEST_CASE("CSV schema is stable") {
    REQUIRE(std::string(kCsvHeader) ==
            "strategy,N,r,s,trial,mse,psnr,time_ms,status");
    ResultRow row;
    row.strategy = "offline-pca";
    row.steps = 2;
    row.rows_per_step = 1;
    row.samples = 2;
    row.trial = 5;
    row.mse_value = 0.25;
    row.psnr_value = 12.0;
    REQUIRE(csv_line(row) == "offline-pca,2,1,2,5,0.25,12,0,ok");
}

TEST_CASE("paired seeding gives every strategy the same ground truth") {
    ExperimentConfig cfg = gaussian_cfg();
    Vec a = trial_ground_truth(cfg, 0);
    Vec b = trial_ground_truth(cfg, 0);
    Vec c = trial_ground_truth(cfg, 1);
    REQUIRE(a == b);
    REQUIRE(a != c);
}

TEST_CASE("cmd_run writes results and per-trial artifacts") {
    ExperimentConfig cfg = gaussian_cfg();
    fs::path out = fresh_dir("run");
    RunArtifacts art = cmd_run(cfg, out);
    REQUIRE(art.rows.size() == 3);
    for (const auto& row : art.rows) REQUIRE(row.status == "ok");
    REQUIRE(fs::exists(out / "results.csv"));
    for (int t = 0; t < 3; ++t) {
        REQUIRE(fs::exists(out / ("mask_trial" + std::to_string(t) + ".json")));
        REQUIRE(fs::exists(out / ("rows_trial" + std::to_string(t) + ".txt")));
        REQUIRE(
            fs::exists(out / ("restored_trial" + std::to_string(t) + ".txt")));
    }
    // The rows dump round-trips through the matrix text format.
    Mat rows = read_matrix_file(out / "rows_trial0.txt");
    REQUIRE(rows.rows() == 2);
    REQUIRE(rows.cols() == 3);
    REQUIRE(rows_orthonormal(rows));
}

TEST_CASE("sweep-adaptivity enforces the budget") {
    ExperimentConfig cfg = gaussian_cfg();
    fs::path out = fresh_dir("sweep_a");
    REQUIRE_THROWS_AS(
        cmd_sweep_adaptivity(cfg, 2, {{1, 2}, {3, 1}}, out), ConfigError);
    auto rows = cmd_sweep_adaptivity(cfg, 2, {{1, 2}, {2, 1}}, out);
    REQUIRE(rows.size() == 6);
    REQUIRE(rows.front().strategy == "N1_r2");
    REQUIRE(rows.back().strategy == "N2_r1");
    REQUIRE(fs::exists(out / "sweep_adaptivity.csv"));
}

TEST_CASE("sweep-samples adds an s-independent exact reference block") {
    ExperimentConfig cfg = gaussian_cfg();
    fs::path out1 = fresh_dir("sweep_s1");
    fs::path out2 = fresh_dir("sweep_s2");
    auto r1 = cmd_sweep_samples(cfg, {2, 4}, out1);
    auto r2 = cmd_sweep_samples(cfg, {8}, out2);
    auto exact_rows = [](const std::vector<ResultRow>& rows) {
        std::vector<double> v;
        for (const auto& r : rows)
            if (r.strategy == "exact-cov") v.push_back(r.mse_value);
        return v;
    };
    REQUIRE(exact_rows(r1) == exact_rows(r2));
    REQUIRE_THROWS_AS(cmd_sweep_samples(cfg, {0}, out1), ConfigError);
}

TEST_CASE("single-sample selection is flagged as degenerate") {
    ExperimentConfig cfg = gaussian_cfg();
    cfg.samples = 1;
    ResultRow row = run_trial(cfg, "adasense-unconstrained", 0, 0);
    REQUIRE(row.status == "degenerate");
}

TEST_CASE("bench reruns are byte-identical and thread-count independent") {
    ExperimentConfig cfg = gaussian_cfg();
    const std::vector<std::string> strategies = {
        "random-orthonormal", "offline-pca", "adasense-unconstrained"};
    fs::path a = fresh_dir("bench_a");
    fs::path b = fresh_dir("bench_b");
    cmd_bench(cfg, strategies, a);
    cfg.threads = 3;
    cmd_bench(cfg, strategies, b);
    REQUIRE(slurp(a / "bench.csv") == slurp(b / "bench.csv"));
    REQUIRE(slurp(a / "bench_summary.csv") == slurp(b / "bench_summary.csv"));
}

TEST_CASE("bench rejects unknown strategies and empty lists") {
    ExperimentConfig cfg = gaussian_cfg();
    fs::path out = fresh_dir("bench_err");
    REQUIRE_THROWS_AS(cmd_bench(cfg, {}, out), ConfigError);
    REQUIRE_THROWS_AS(cmd_bench(cfg, {"simulated-annealing"}, out), ConfigError);
}

TEST_CASE("summarize groups by strategy and skips error rows") {
    std::vector<ResultRow> rows(3);
    rows[0].strategy = "a";
    rows[0].mse_value = 1.0;
    rows[1].strategy = "a";
    rows[1].mse_value = 3.0;
    rows[2].strategy = "a";
    rows[2].mse_value = 999.0;
    rows[2].status = "error:boom";
    auto sums = summarize(rows);
    REQUIRE(sums.size() == 1);
    REQUIRE(sums[0].ok_trials == 2);
    REQUIRE(sums[0].mean_mse == Catch::Approx(2.0));
}

TEST_CASE("psnr peak override and prior-derived default") {
    ExperimentConfig cfg = gaussian_cfg();
    REQUIRE(psnr_peak_for(cfg) == Catch::Approx(8.0));  // 4 * sqrt(4) + 0
    cfg.psnr_peak = 255.0;
    REQUIRE(psnr_peak_for(cfg) == 255.0);
}
