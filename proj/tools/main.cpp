// Command-line front end: run one experiment, sweep a (eps_p, M, seed) grid,
// dump the exact planning oracle, or run the invariant battery. All numeric
// behavior lives in the library; this file only dispatches.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <thread>

#include "fedvi/errors.hpp"
#include "fedvi/harness.hpp"
#include "fedvi/serialize.hpp"

namespace {

using nlohmann::json;

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> algorithm;
};

void apply(const Overrides& ov, fedvi::ExperimentConfig& cfg) {
    // Precedence: flag > config file.
    if (ov.seed) cfg.seed = *ov.seed;
    if (ov.algorithm) cfg.algorithm = fedvi::algorithm_from_string(*ov.algorithm);
}

int cmd_run(const std::string& config_path, const Overrides& ov) {
    fedvi::ExperimentConfig cfg = fedvi::load_config(config_path);
    apply(ov, cfg);
    const fedvi::RunMetrics metrics = fedvi::run_experiment(cfg);
    fedvi::write_csv(metrics, cfg.output_path);
    const json summary = {{"env", fedvi::to_string(cfg.env)},
                          {"algorithm", fedvi::to_string(cfg.algorithm)},
                          {"seed", cfg.seed},
                          {"T", cfg.episode_budget},
                          {"M", cfg.n_agents},
                          {"eps_p", cfg.eps_p},
                          {"final_regret", metrics.final_regret()},
                          {"total_rounds", metrics.total_rounds},
                          {"r_max_bound", metrics.r_max_bound_value},
                          {"messages", metrics.total_messages},
                          {"bytes", metrics.total_bytes},
                          {"regret_clamps", metrics.regret_clamps},
                          {"wall_time_ms", metrics.wall_time_ms},
                          {"output_path", cfg.output_path}};
    std::cout << summary.dump() << "\n";
    return 0;
}

int cmd_sweep(const std::string& sweep_path, const Overrides& ov, int jobs) {
    fedvi::SweepSpec spec = fedvi::load_sweep(sweep_path);
    apply(ov, spec.base);
    if (ov.seed) spec.seeds = {*ov.seed};
    const std::string out_dir = spec.base.output_path;
    const auto cells = fedvi::run_sweep(spec, out_dir, jobs);
    fedvi::write_sweep_summary(cells, out_dir + "/summary.csv");
    std::cout << json{{"cells", cells.size()}, {"summary", out_dir + "/summary.csv"}}.dump()
              << "\n";
    return 0;
}

int cmd_oracle(const std::string& config_path, const Overrides& ov) {
    fedvi::ExperimentConfig cfg = fedvi::load_config(config_path);
    apply(ov, cfg);
    const fedvi::Fleet fleet = fedvi::build_fleet(cfg);
    const auto [tables, policy] = fedvi::optimal_values(fleet.common);
    json v_rows = json::array();
    for (int h = 0; h <= fleet.common.horizon; ++h)
        v_rows.push_back(std::vector<double>(tables.v.row(h).begin(), tables.v.row(h).end()));
    json pi_rows = json::array();
    for (int h = 0; h < fleet.common.horizon; ++h)
        pi_rows.push_back(
            std::vector<int>(policy.action.row(h).begin(), policy.action.row(h).end()));
    std::cout << json{{"env", fedvi::to_string(cfg.env)},
                      {"start_state", fleet.common.start_state},
                      {"V", std::move(v_rows)},
                      {"policy", std::move(pi_rows)}}
                     .dump()
              << "\n";
    return 0;
}

int cmd_check(const std::string& config_path, const Overrides& ov) {
    fedvi::ExperimentConfig cfg = fedvi::load_config(config_path);
    apply(ov, cfg);
    const auto results = fedvi::run_invariant_battery(cfg);
    bool all_pass = true;
    for (const auto& res : results) {
        std::printf("[%s] %s: %s\n", res.pass ? "PASS" : "FAIL", res.name.c_str(),
                    res.detail.c_str());
        all_pass = all_pass && res.pass;
    }
    return all_pass ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated UCB value-iteration simulator"};
    app.require_subcommand(1);

    Overrides ov;
    std::uint64_t seed_flag = 0;
    std::string algorithm_flag;
    int jobs = static_cast<int>(std::thread::hardware_concurrency());
    if (jobs < 1) jobs = 1;

    app.add_option("--seed", seed_flag, "Override the config seed")
        ->each([&](const std::string&) { ov.seed = seed_flag; });
    app.add_option("--algorithm", algorithm_flag,
                   "Override the algorithm (fed_ucbvi | concurrent_ucbvi)")
        ->each([&](const std::string&) { ov.algorithm = algorithm_flag; });
    app.add_option("--jobs", jobs, "Parallel sweep cells (default: logical cores)");

    std::string run_cfg, sweep_cfg, oracle_cfg, check_cfg;
    CLI::App* run = app.add_subcommand("run", "Run one experiment and write its CSV");
    run->add_option("config", run_cfg, "JSON experiment config")->required();
    CLI::App* sweep = app.add_subcommand("sweep", "Run a grid of (eps_p, M, seed) cells");
    sweep->add_option("config", sweep_cfg, "JSON sweep spec")->required();
    CLI::App* oracle = app.add_subcommand("oracle", "Print the exact common-MDP solution");
    oracle->add_option("config", oracle_cfg, "JSON experiment config")->required();
    CLI::App* check = app.add_subcommand("check", "Run the invariant battery");
    check->add_option("config", check_cfg, "JSON experiment config")->required();

    try {
        app.parse(argc, argv);
        if (run->parsed()) return cmd_run(run_cfg, ov);
        if (sweep->parsed()) return cmd_sweep(sweep_cfg, ov, jobs);
        if (oracle->parsed()) return cmd_oracle(oracle_cfg, ov);
        if (check->parsed()) return cmd_check(check_cfg, ov);
        return 1;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const fedvi::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const fedvi::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}
