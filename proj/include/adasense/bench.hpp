#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "adasense/engine.hpp"
#include "adasense/io.hpp"
#include "adasense/restoration.hpp"

namespace adasense {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::size_t default_sample_count(Index rows_per_step) {
    // s = ceil(4r/3) heuristic.
    return static_cast<std::size_t>((4 * rows_per_step + 2) / 3);
}

struct ExperimentConfig {
    Prior prior;
    PosteriorSamplerSpec sampler;
    SelectionMode mode = SelectionMode::UnconstrainedEmpirical;
    std::optional<CandidateSet> candidates;
    Index steps = 1;          // N
    Index rows_per_step = 1;  // r
    std::size_t samples = 0;  // 0 -> ceil(4r/3)
    RestorationSpec restoration;
    std::size_t trials = 1;
    std::uint64_t seed = 0;
    double psnr_peak = 0.0;  // 0 -> derived from prior spread
    bool record_timing = false;
    int threads = 1;

    std::size_t effective_samples() const {
        return samples > 0 ? samples : default_sample_count(rows_per_step);
    }
};

// ---- config parsing ---------------------------------------------------------

namespace detail {

inline SelectionMode selection_mode_from_string(const std::string& s) {
    if (s == "unconstrained") return SelectionMode::UnconstrainedEmpirical;
    if (s == "unconstrained-exact") return SelectionMode::UnconstrainedExact;
    if (s == "constrained-exact") return SelectionMode::ConstrainedExact;
    if (s == "constrained-heuristic") return SelectionMode::ConstrainedHeuristic;
    if (s == "greedy-oracle") return SelectionMode::GreedyOracle;
    throw ConfigError("config: unknown selection mode '" + s + "'");
}

inline RestorationMode restoration_mode_from_string(const std::string& s) {
    if (s == "linear") return RestorationMode::Linear;
    if (s == "sample") return RestorationMode::Sample;
    if (s == "mean") return RestorationMode::Mean;
    throw ConfigError("config: unknown restoration mode '" + s + "'");
}

inline PosteriorSamplerSpec sampler_spec_from_json(const nlohmann::json& j) {
    PosteriorSamplerSpec spec;
    const std::string kind = j.value("sampler", "exact");
    if (kind == "exact")
        spec.kind = SamplerKind::Exact;
    else if (kind == "ddrm")
        spec.kind = SamplerKind::Ddrm;
    else
        throw ConfigError("config: unknown sampler '" + kind + "'");
    spec.steps = j.value("steps", 25);
    spec.sigma_max_scale = j.value("sigma_max_scale", 1.0);
    spec.sigma_min_ratio = j.value("sigma_min_ratio", 1e-3);
    spec.eta = j.value("eta", 0.0);
    try {
        validate_sampler_spec(spec);
    } catch (const InvalidInputError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return spec;
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j,
                                         const std::filesystem::path& base_dir = ".") {
    ExperimentConfig cfg;
    try {
        if (j.contains("prior_file")) {
            const auto path = base_dir / j.at("prior_file").get<std::string>();
            if (!std::filesystem::exists(path))
                throw ConfigError("config: prior file not found: " + path.string());
            cfg.prior = prior_from_json(
                nlohmann::json::parse(read_text_file(path)));
        } else {
            cfg.prior = prior_from_json(j.at("prior"));
        }
        cfg.sampler = detail::sampler_spec_from_json(j);
        cfg.mode = detail::selection_mode_from_string(
            j.value("selection", "unconstrained"));
        if (j.contains("candidates")) {
            auto cj = j.at("candidates");
            if (!cj.contains("dim") && !cj.contains("image_width") &&
                cj.value("family", "") != "explicit")
                cj["dim"] = prior_dim(cfg.prior);
            cfg.candidates = candidate_set_from_json(cj);
        }
        cfg.steps = j.value("N", Index{1});
        cfg.rows_per_step = j.value("r", Index{1});
        cfg.samples = j.value("s", std::size_t{0});
        cfg.restoration.mode = detail::restoration_mode_from_string(
            j.value("restoration", "linear"));
        cfg.restoration.mean_count = j.value("mean_count", std::size_t{16});
        cfg.restoration.sampler = cfg.sampler;
        cfg.trials = j.value("trials", std::size_t{1});
        cfg.seed = j.value("seed", std::uint64_t{0});
        cfg.psnr_peak = j.value("psnr_peak", 0.0);
        cfg.record_timing = j.value("record_timing", false);
        if (cfg.trials < 1) throw ConfigError("config: trials must be >= 1");
        if (cfg.steps < 0 || cfg.rows_per_step < 1)
            throw ConfigError("config: N must be >= 0 and r >= 1");
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const InvalidInputError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const DimensionError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return cfg;
}

inline ExperimentConfig config_from_file(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path))
        throw ConfigError("config file not found: " + path.string());
    return config_from_json(nlohmann::json::parse(read_text_file(path)),
                            path.parent_path());
}

// ---- results ----------------------------------------------------------------

struct ResultRow {
    std::string strategy;
    Index steps = 0;
    Index rows_per_step = 0;
    std::size_t samples = 0;
    std::size_t trial = 0;
    double mse_value = 0.0;
    double psnr_value = 0.0;
    double time_ms = 0.0;
    std::string status = "ok";
};

inline constexpr const char* kCsvHeader =
    "strategy,N,r,s,trial,mse,psnr,time_ms,status";

inline std::string csv_line(const ResultRow& row) {
    std::string out = row.strategy;
    out += ',' + std::to_string(row.steps);
    out += ',' + std::to_string(row.rows_per_step);
    out += ',' + std::to_string(row.samples);
    out += ',' + std::to_string(row.trial);
    out += ',' + format_double(row.mse_value);
    out += ',' + format_double(row.psnr_value);
    out += ',' + format_double(row.time_ms);
    out += ',' + row.status;
    return out;
}

inline void write_csv(const std::filesystem::path& path,
                      const std::vector<ResultRow>& rows) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os << kCsvHeader << '\n';
    for (const auto& r : rows) os << csv_line(r) << '\n';
}

inline double psnr_peak_for(const ExperimentConfig& cfg) {
    if (cfg.psnr_peak > 0.0) return cfg.psnr_peak;
    // Dynamic-range estimate: mean spread plus four standard deviations.
    Vec mean;
    Mat cov;
    prior_moments(cfg.prior, mean, cov);
    return 4.0 * std::sqrt(std::max(cov.diagonal().maxCoeff(), 1e-30)) +
           mean.cwiseAbs().maxCoeff();
}

// ---- strategies -------------------------------------------------------------

inline const std::vector<std::string>& known_strategies() {
    static const std::vector<std::string> k = {
        "random-gaussian-rows",      "random-orthonormal",
        "equispaced-candidates",     "random-candidate",
        "offline-pca",               "adasense-unconstrained",
        "adasense-constrained-exact", "adasense-constrained-heuristic",
        "greedy-oracle"};
    return k;
}

namespace detail {

inline Reconstructor linear_reconstructor(const Prior& prior) {
    Vec mean;
    Mat cov;
    prior_moments(prior, mean, cov);
    return [mean](const Mat& h, const Vec& y) {
        Mat hp = pinv(h);
        return Vec(hp * y + (mean - hp * (h * mean)));
    };
}

/// Build the acquisition state for one trial of one strategy. Non-adaptive
/// strategies fill the sensing matrix in a single append.
inline AcquisitionState run_strategy(const ExperimentConfig& cfg,
                                     const std::string& strategy,
                                     const Vec& ground_truth,
                                     const RngStream& rng) {
    const Index d = prior_dim(cfg.prior);
    const Index total_rows = cfg.steps * cfg.rows_per_step;
    AcquisitionState state;
    state.sensing = SensingMatrix::empty(d);
    state.measurements = Vec(0);
    state.config = {cfg.steps, cfg.rows_per_step, cfg.effective_samples()};

    auto require_candidates = [&]() -> const CandidateSet& {
        if (!cfg.candidates)
            throw ConfigError("strategy '" + strategy + "' needs a candidate set");
        return *cfg.candidates;
    };

    if (strategy == "random-gaussian-rows") {
        RngStream r = rng.child(1);
        Mat h(total_rows, d);
        for (Index i = 0; i < total_rows; ++i)
            h.row(i) = r.normal_vec(d).transpose() / std::sqrt(double(d));
        append_measurement(state, h, ground_truth);
        return state;
    }
    if (strategy == "random-orthonormal") {
        RngStream r = rng.child(2);
        Mat g(d, total_rows);
        for (Index i = 0; i < d; ++i)
            for (Index j = 0; j < total_rows; ++j) g(i, j) = r.normal();
        Eigen::HouseholderQR<Mat> qr(g);
        Mat q = Mat(qr.householderQ()).leftCols(total_rows);
        append_measurement(state, Mat(q.transpose()), ground_truth);
        return state;
    }
    if (strategy == "equispaced-candidates") {
        const auto& cands = require_candidates();
        const std::size_t n = cands.size();
        if (static_cast<Index>(n) < cfg.steps)
            throw ExhaustedCandidatesError("equispaced-candidates: too few members");
        for (Index i = 0; i < cfg.steps; ++i) {
            const std::size_t idx =
                static_cast<std::size_t>(i) * n / static_cast<std::size_t>(cfg.steps);
            append_measurement(state, cands.members[idx], ground_truth);
        }
        return state;
    }
    if (strategy == "random-candidate") {
        const auto& cands = require_candidates();
        RngStream r = rng.child(3);
        std::vector<std::size_t> order(cands.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[r.uniform_index(i)]);
        if (static_cast<Index>(order.size()) < cfg.steps)
            throw ExhaustedCandidatesError("random-candidate: too few members");
        for (Index i = 0; i < cfg.steps; ++i)
            append_measurement(state, cands.members[order[i]], ground_truth);
        return state;
    }
    if (strategy == "offline-pca") {
        append_measurement(state, offline_pca(cfg.prior, total_rows), ground_truth);
        return state;
    }

    RunSpec spec;
    spec.prior = cfg.prior;
    spec.sampler = cfg.sampler;
    spec.config = state.config;
    spec.candidates = cfg.candidates;
    if (strategy == "adasense-unconstrained") {
        spec.mode = cfg.mode == SelectionMode::UnconstrainedExact
                        ? SelectionMode::UnconstrainedExact
                        : SelectionMode::UnconstrainedEmpirical;
    } else if (strategy == "adasense-constrained-exact") {
        require_candidates();
        spec.mode = SelectionMode::ConstrainedExact;
    } else if (strategy == "adasense-constrained-heuristic") {
        require_candidates();
        spec.mode = SelectionMode::ConstrainedHeuristic;
    } else if (strategy == "greedy-oracle") {
        require_candidates();
        spec.mode = SelectionMode::GreedyOracle;
        spec.oracle_reconstructor = linear_reconstructor(cfg.prior);
    } else {
        throw ConfigError("unknown strategy '" + strategy + "'");
    }
    return run_adasense(spec, ground_truth, rng.child(4));
}

inline void parallel_for(std::size_t n, int threads,
                         const std::function<void(std::size_t)>& body) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const int nt = std::min<std::size_t>(threads, n);
    for (int t = 0; t < nt; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1))
                body(i);
        });
    for (auto& th : pool) th.join();
}

}  // namespace detail

/// Ground truth for trial t; every strategy sees the identical draw.
inline Vec trial_ground_truth(const ExperimentConfig& cfg, std::size_t trial) {
    RngStream r = RngStream(cfg.seed).child(1000000 + trial);
    return sample_prior(cfg.prior, 1, r).front();
}

/// One trial of one strategy; strategy_tag keys the strategy-local RNG so
/// paired trials stay paired.
inline ResultRow run_trial(const ExperimentConfig& cfg,
                           const std::string& strategy,
                           std::size_t strategy_tag, std::size_t trial,
                           AcquisitionState* state_out = nullptr) {
    ResultRow row;
    row.strategy = strategy;
    row.steps = cfg.steps;
    row.rows_per_step = cfg.rows_per_step;
    row.samples = cfg.effective_samples();
    row.trial = trial;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        Vec x = trial_ground_truth(cfg, trial);
        RngStream rng =
            RngStream(cfg.seed).child(1 + strategy_tag).child(trial);
        AcquisitionState state = detail::run_strategy(cfg, strategy, x, rng);
        Vec estimate = restore(state, cfg.prior, cfg.restoration, rng.child(999));
        row.mse_value = mse(x, estimate);
        row.psnr_value = psnr(x, estimate, psnr_peak_for(cfg));
        if (state.status == RunStatus::CollapsedPosterior)
            row.status = "early-stop";
        else if (std::any_of(state.history.begin(), state.history.end(),
                             [](const StepRecord& s) { return s.degenerate; }))
            row.status = "degenerate";
        if (state_out) *state_out = std::move(state);
    } catch (const std::exception& e) {
        row.status = std::string("error:") + e.what();
        row.mse_value = std::numeric_limits<double>::quiet_NaN();
        row.psnr_value = std::numeric_limits<double>::quiet_NaN();
    }
    if (cfg.record_timing)
        row.time_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
    return row;
}

// ---- commands ---------------------------------------------------------------

struct RunArtifacts {
    std::vector<ResultRow> rows;
};

inline nlohmann::json mask_json(const AcquisitionState& state) {
    nlohmann::json j;
    j["steps"] = state.step;
    nlohmann::json picked = nlohmann::json::array();
    for (const auto& rec : state.history) {
        nlohmann::json pj = nlohmann::json::array();
        for (std::size_t i : rec.picked_candidates) pj.push_back(i);
        picked.push_back(pj);
    }
    j["picked_candidates"] = picked;
    j["orthonormal"] = state.sensing.orthonormal;
    return j;
}

/// `run`: execute the configured strategy per trial, write results.csv,
/// per-trial mask JSON + row dumps, and restored signals.
inline RunArtifacts cmd_run(const ExperimentConfig& cfg,
                            const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    const std::string strategy = [&] {
        switch (cfg.mode) {
            case SelectionMode::ConstrainedExact:
                return "adasense-constrained-exact";
            case SelectionMode::ConstrainedHeuristic:
                return "adasense-constrained-heuristic";
            case SelectionMode::GreedyOracle:
                return "greedy-oracle";
            default:
                return "adasense-unconstrained";
        }
    }();
    RunArtifacts art;
    art.rows.resize(cfg.trials);
    std::vector<AcquisitionState> states(cfg.trials);
    detail::parallel_for(cfg.trials, cfg.threads, [&](std::size_t t) {
        art.rows[t] = run_trial(cfg, strategy, 0, t, &states[t]);
    });
    write_csv(out_dir / "results.csv", art.rows);
    for (std::size_t t = 0; t < cfg.trials; ++t) {
        std::ofstream mj(out_dir / ("mask_trial" + std::to_string(t) + ".json"));
        mj << mask_json(states[t]).dump(2) << '\n';
        write_matrix_file(out_dir / ("rows_trial" + std::to_string(t) + ".txt"),
                          states[t].sensing.rows_matrix);
        RngStream rng = RngStream(cfg.seed).child(1).child(t);
        Vec estimate =
            restore(states[t], cfg.prior, cfg.restoration, rng.child(999));
        write_vector_file(
            out_dir / ("restored_trial" + std::to_string(t) + ".txt"), estimate);
    }
    return art;
}

/// `sweep-adaptivity`: fixed budget N*r, varying (N, r) over shared trials.
inline std::vector<ResultRow> cmd_sweep_adaptivity(
    const ExperimentConfig& base, Index budget,
    const std::vector<std::pair<Index, Index>>& grid,
    const std::filesystem::path& out_dir) {
    for (auto [n, r] : grid)
        if (n * r != budget)
            throw ConfigError("sweep-adaptivity: pair (" + std::to_string(n) +
                              "," + std::to_string(r) +
                              ") violates budget " + std::to_string(budget));
    std::filesystem::create_directories(out_dir);
    std::vector<ResultRow> rows;
    std::size_t tag = 0;
    for (auto [n, r] : grid) {
        ExperimentConfig cfg = base;
        cfg.steps = n;
        cfg.rows_per_step = r;
        if (base.samples == 0) cfg.samples = default_sample_count(r);
        const std::string label =
            "N" + std::to_string(n) + "_r" + std::to_string(r);
        std::vector<ResultRow> block(cfg.trials);
        detail::parallel_for(cfg.trials, cfg.threads, [&](std::size_t t) {
            block[t] = run_trial(cfg, "adasense-unconstrained", tag, t);
            block[t].strategy = label;
        });
        rows.insert(rows.end(), block.begin(), block.end());
        ++tag;
    }
    write_csv(out_dir / "sweep_adaptivity.csv", rows);
    return rows;
}

/// `sweep-samples`: fixed (N, r), varying s, plus an exact-covariance
/// reference block that does not depend on s.
inline std::vector<ResultRow> cmd_sweep_samples(
    const ExperimentConfig& base, const std::vector<std::size_t>& s_values,
    const std::filesystem::path& out_dir) {
    for (std::size_t s : s_values)
        if (s < 1) throw ConfigError("sweep-samples: s must be >= 1");
    std::filesystem::create_directories(out_dir);
    std::vector<ResultRow> rows;
    std::size_t tag = 0;
    for (std::size_t s : s_values) {
        ExperimentConfig cfg = base;
        cfg.samples = s;
        std::vector<ResultRow> block(cfg.trials);
        detail::parallel_for(cfg.trials, cfg.threads, [&](std::size_t t) {
            block[t] = run_trial(cfg, "adasense-unconstrained", tag, t);
            block[t].strategy = "s" + std::to_string(s);
        });
        rows.insert(rows.end(), block.begin(), block.end());
        ++tag;
    }
    {
        ExperimentConfig cfg = base;
        cfg.mode = SelectionMode::UnconstrainedExact;
        std::vector<ResultRow> block(cfg.trials);
        detail::parallel_for(cfg.trials, cfg.threads, [&](std::size_t t) {
            block[t] = run_trial(cfg, "adasense-unconstrained", 9999, t);
            block[t].strategy = "exact-cov";
        });
        rows.insert(rows.end(), block.begin(), block.end());
    }
    write_csv(out_dir / "sweep_samples.csv", rows);
    return rows;
}

struct StrategySummary {
    std::string strategy;
    double mean_mse = 0.0;
    double stderr_mse = 0.0;
    std::size_t ok_trials = 0;
};

inline std::vector<StrategySummary> summarize(
    const std::vector<ResultRow>& rows) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<double>> by;
    for (const auto& r : rows) {
        if (!by.count(r.strategy)) order.push_back(r.strategy);
        if (r.status.rfind("error", 0) != 0) by[r.strategy].push_back(r.mse_value);
    }
    std::vector<StrategySummary> out;
    for (const auto& s : order) {
        const auto& v = by[s];
        StrategySummary sum;
        sum.strategy = s;
        sum.ok_trials = v.size();
        if (!v.empty()) {
            double m = 0.0;
            for (double x : v) m += x;
            m /= v.size();
            double var = 0.0;
            for (double x : v) var += (x - m) * (x - m);
            var = v.size() > 1 ? var / (v.size() - 1) : 0.0;
            sum.mean_mse = m;
            sum.stderr_mse = std::sqrt(var / v.size());
        }
        out.push_back(sum);
    }
    return out;
}

/// `bench`: identical ground-truth trials across strategies plus a summary.
inline std::vector<ResultRow> cmd_bench(
    const ExperimentConfig& cfg, const std::vector<std::string>& strategies,
    const std::filesystem::path& out_dir) {
    if (strategies.empty()) throw ConfigError("bench: empty strategy list");
    for (const auto& s : strategies) {
        const auto& known = known_strategies();
        if (std::find(known.begin(), known.end(), s) == known.end())
            throw ConfigError("bench: unknown strategy '" + s + "'");
    }
    std::filesystem::create_directories(out_dir);
    std::vector<ResultRow> rows;
    for (std::size_t si = 0; si < strategies.size(); ++si) {
        std::vector<ResultRow> block(cfg.trials);
        detail::parallel_for(cfg.trials, cfg.threads, [&](std::size_t t) {
            block[t] = run_trial(cfg, strategies[si], si, t);
        });
        rows.insert(rows.end(), block.begin(), block.end());
    }
    write_csv(out_dir / "bench.csv", rows);
    std::ofstream os(out_dir / "bench_summary.csv");
    os << "strategy,mean_mse,stderr_mse,ok_trials\n";
    for (const auto& s : summarize(rows))
        os << s.strategy << ',' << format_double(s.mean_mse) << ','
           << format_double(s.stderr_mse) << ',' << s.ok_trials << '\n';
    return rows;
}

}  // namespace adasense
