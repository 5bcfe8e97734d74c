// adasense CLI: run acquisitions and benchmark sweeps from a JSON config.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "adasense/bench.hpp"

namespace {

int resolve_threads(int cli_threads) {
    if (cli_threads > 0) return cli_threads;
    if (const char* env = std::getenv("ADASENSE_THREADS")) {
        try {
            return std::max(1, std::stoi(env));
        } catch (...) {
        }
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"AdaSense: greedy adaptive measurement selection"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::size_t trials = 0;
    int threads = 0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "experiment config JSON")
            ->required();
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option("--seed", seed, "RNG seed override")
            ->each([&](const std::string&) { seed_set = true; });
        cmd->add_option("--trials", trials, "trial count override");
        cmd->add_option("--threads", threads,
                        "worker threads (fallback: ADASENSE_THREADS)");
    };

    auto* run = app.add_subcommand("run", "single-strategy acquisition runs");
    add_common(run);

    auto* sweep_a = app.add_subcommand(
        "sweep-adaptivity", "fixed-budget sweep over (N, r) pairs");
    add_common(sweep_a);
    Eigen::Index budget = 0;
    std::vector<std::string> pair_specs;
    sweep_a->add_option("--budget", budget, "total measurement budget N*r")
        ->required();
    sweep_a->add_option("--pair", pair_specs, "grid pair as N,r (repeatable)")
        ->required();

    auto* sweep_s =
        app.add_subcommand("sweep-samples", "sweep over posterior sample count s");
    add_common(sweep_s);
    std::vector<std::size_t> s_values;
    sweep_s->add_option("--s", s_values, "sample counts to sweep")->required();

    auto* bench = app.add_subcommand("bench", "compare strategies on paired trials");
    add_common(bench);
    std::vector<std::string> strategies;
    bench->add_option("--strategy", strategies, "strategy label (repeatable)");

    CLI11_PARSE(app, argc, argv);

    try {
        adasense::ExperimentConfig cfg = adasense::config_from_file(config_path);
        if (seed_set) cfg.seed = seed;
        if (trials > 0) cfg.trials = trials;
        cfg.threads = resolve_threads(threads);

        if (app.got_subcommand(run)) {
            adasense::cmd_run(cfg, out_dir);
        } else if (app.got_subcommand(sweep_a)) {
            std::vector<std::pair<Eigen::Index, Eigen::Index>> grid;
            for (const auto& p : pair_specs) {
                const auto comma = p.find(',');
                if (comma == std::string::npos)
                    throw adasense::ConfigError("bad --pair (expected N,r): " + p);
                grid.emplace_back(std::stoll(p.substr(0, comma)),
                                  std::stoll(p.substr(comma + 1)));
            }
            adasense::cmd_sweep_adaptivity(cfg, budget, grid, out_dir);
        } else if (app.got_subcommand(sweep_s)) {
            adasense::cmd_sweep_samples(cfg, s_values, out_dir);
        } else if (app.got_subcommand(bench)) {
            if (strategies.empty()) strategies = adasense::known_strategies();
            adasense::cmd_bench(cfg, strategies, out_dir);
        }
    } catch (const adasense::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
