#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fedvi/errors.hpp"
#include "fedvi/harness.hpp"
#include "fedvi/serialize.hpp"

using namespace fedvi;

namespace {

ExperimentConfig small_config() {
    ExperimentConfig cfg;
    cfg.env = EnvKind::synthetic;
    cfg.n_states = 3;
    cfg.n_actions = 3;
    cfg.horizon = 3;
    cfg.n_agents = 2;
    cfg.episode_budget = 50;
    cfg.delta = 0.1;
    cfg.seed = 17;
    return cfg;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path temp_dir(const char* tag) {
    const auto dir = std::filesystem::temp_directory_path() / (std::string("fedvi_") + tag);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("r_max_bound arithmetic") {
    // Second term vanishes once nu covers the whole visit budget.
    const double only_first = r_max_bound(2, 2, 2, 3, 10, 1000.0);
    CHECK(only_first == doctest::Approx(3.0 * 8 * std::log2(1000.0)).epsilon(1e-12));
    // The bound scales linearly in the S*A*H factor.
    const double base = r_max_bound(2, 2, 2, 3, 1000, 50.0);
    const double tripled = r_max_bound(6, 2, 2, 3, 1000, 50.0);
    CHECK(tripled == doctest::Approx(3.0 * base).epsilon(1e-12));
    CHECK_THROWS_AS(r_max_bound(2, 2, 2, 3, 10, 1.0), ConfigError);
}

TEST_CASE("config validation names the offending field") {
    ExperimentConfig cfg = small_config();
    cfg.episode_budget = 0;
    CHECK_THROWS_WITH_AS(validate_config(cfg), doctest::Contains("T"), ConfigError);
    cfg = small_config();
    cfg.delta = 1.5;
    CHECK_THROWS_WITH_AS(validate_config(cfg), doctest::Contains("delta"), ConfigError);
    cfg = small_config();
    cfg.eps_p = 1.0;
    CHECK_THROWS_WITH_AS(validate_config(cfg), doctest::Contains("eps_p"), ConfigError);
}

TEST_CASE("config json round trip and unknown fields") {
    const ExperimentConfig cfg = small_config();
    const ExperimentConfig back = config_from_json(config_to_json(cfg));
    CHECK(back.env == cfg.env);
    CHECK(back.episode_budget == cfg.episode_budget);
    CHECK(back.seed == cfg.seed);
    CHECK(back.output_path == cfg.output_path);

    nlohmann::json j = config_to_json(cfg);
    j["delta"] = 1.5;
    CHECK_THROWS_WITH_AS(config_from_json(j), doctest::Contains("delta"), ConfigError);
    j = config_to_json(cfg);
    j["unknown_knob"] = 1;
    CHECK_THROWS_WITH_AS(config_from_json(j), doctest::Contains("unknown_knob"), ConfigError);
    j = config_to_json(cfg);
    j["env"] = "casino";
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
}

TEST_CASE("run_experiment produces one row per episode with sane columns") {
    const ExperimentConfig cfg = small_config();
    const RunMetrics metrics = run_experiment(cfg);
    REQUIRE(static_cast<long long>(metrics.rows.size()) == cfg.episode_budget);
    double prev = 0.0;
    long long prev_round = 0;
    for (const EpisodeRow& row : metrics.rows) {
        CHECK(row.cum_regret >= prev - 1e-12);
        CHECK(row.round >= prev_round);
        CHECK(row.comm_rounds == row.round - 1);
        prev = row.cum_regret;
        prev_round = row.round;
    }
    CHECK(metrics.rows.front().episode == 1);
    CHECK(metrics.rows.back().episode == cfg.episode_budget);
    CHECK(metrics.total_rounds >= 1);
    CHECK(static_cast<double>(metrics.total_rounds) <= metrics.r_max_bound_value);
}

TEST_CASE("concurrent mode reports one communication round per episode") {
    ExperimentConfig cfg = small_config();
    cfg.algorithm = AlgorithmKind::concurrent_ucbvi;
    cfg.episode_budget = 20;
    const RunMetrics metrics = run_experiment(cfg);
    CHECK(metrics.total_rounds == 20);
}

TEST_CASE("injecting the optimal policy zeroes the regret") {
    const ExperimentConfig cfg = small_config();
    const Fleet fleet = build_fleet(cfg);
    const Policy optimal = optimal_values(fleet.common).second;
    const RunMetrics metrics = run_experiment_fixed_policy(cfg, optimal);
    CHECK(metrics.final_regret() == 0.0);
    for (const EpisodeRow& row : metrics.rows) CHECK(row.cum_regret == 0.0);
}

TEST_CASE("csv format and byte determinism") {
    const auto dir = temp_dir("csv");
    ExperimentConfig cfg = small_config();
    cfg.episode_budget = 3;
    const RunMetrics metrics = run_experiment(cfg);
    const std::string path_a = (dir / "a.csv").string();
    const std::string path_b = (dir / "b.csv").string();
    write_csv(metrics, path_a);
    write_csv(run_experiment(cfg), path_b);

    const std::string text = read_file(path_a);
    CHECK(text == read_file(path_b));
    CHECK(std::count(text.begin(), text.end(), '\n') == 4);  // header + 3 episodes
    CHECK(text.rfind("episode,cum_common_regret,round,comm_rounds,messages,bytes\n", 0) == 0);

    CHECK_THROWS_AS(write_csv(metrics, (dir / "no_dir" / "x.csv").string()), IoError);
}

TEST_CASE("sweep writes a csv per cell plus a consistent summary") {
    const auto dir = temp_dir("sweep");
    SweepSpec spec;
    spec.base = small_config();
    spec.base.episode_budget = 30;
    spec.eps_p_values = {0.0, 0.1};
    spec.m_values = {1, 2};
    spec.seeds = {5};

    const auto cells = run_sweep(spec, dir.string(), 2);
    REQUIRE(cells.size() == 4);
    write_sweep_summary(cells, (dir / "summary.csv").string());
    const std::string summary = read_file((dir / "summary.csv").string());
    CHECK(std::count(summary.begin(), summary.end(), '\n') == 5);

    for (const auto& cell : cells) {
        CHECK(std::filesystem::exists(cell.csv_path));
        // The summary's final regret equals the last row of the cell CSV.
        const std::string text = read_file(cell.csv_path);
        const auto last_line_start = text.rfind('\n', text.size() - 2) + 1;
        std::istringstream last(text.substr(last_line_start));
        std::string field;
        std::getline(last, field, ',');  // episode
        std::getline(last, field, ',');  // cum regret
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.10g", cell.final_regret);
        CHECK(field == buf);
    }
}

TEST_CASE("sweep cells are independent of the thread count") {
    SweepSpec spec;
    spec.base = small_config();
    spec.base.episode_budget = 25;
    spec.eps_p_values = {0.0, 0.2};
    spec.m_values = {2};
    spec.seeds = {1, 2};

    const auto dir1 = temp_dir("jobs1");
    const auto dir8 = temp_dir("jobs8");
    const auto serial = run_sweep(spec, dir1.string(), 1);
    const auto parallel = run_sweep(spec, dir8.string(), 8);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t k = 0; k < serial.size(); ++k) {
        CHECK(serial[k].final_regret == parallel[k].final_regret);
        CHECK(serial[k].comm_rounds == parallel[k].comm_rounds);
        CHECK(read_file(serial[k].csv_path) == read_file(parallel[k].csv_path));
    }
}

TEST_CASE("shared-policy reference lower bound") {
    ExperimentConfig cfg = small_config();
    cfg.eps_p = 0.3;
    cfg.n_agents = 3;
    const Fleet fleet = build_fleet(cfg);
    const SharedPolicyReference ref = best_known_shared_policy(fleet);

    // At least as good as deploying the common-MDP optimum everywhere.
    const Policy common_opt = optimal_values(fleet.common).second;
    double avg = 0.0;
    for (int i = 0; i < fleet.n_agents; ++i)
        avg += evaluate_policy(agent_mdp(fleet, i), common_opt).v(0, fleet.common.start_state);
    avg /= fleet.n_agents;
    CHECK(ref.value >= avg - 1e-12);
    CHECK(ref.value <= fleet.common.horizon + 1e-12);
}

TEST_CASE("lower_bound env wiring") {
    ExperimentConfig cfg;
    cfg.env = EnvKind::lower_bound;
    cfg.horizon = 2;
    cfg.eps_p = 0.5;
    cfg.n_agents = 2;
    cfg.episode_budget = 10;
    const Fleet fleet = build_fleet(cfg);
    CHECK(fleet.common.n_states == 2);
    CHECK(fleet.common.n_actions == 1);
    CHECK(optimal_values(fleet.common).first.v(0, 0) == doctest::Approx(1.5).epsilon(1e-14));
}

TEST_CASE("invariant battery passes on a homogeneous small config") {
    ExperimentConfig cfg = small_config();
    cfg.episode_budget = 100;
    const auto results = run_invariant_battery(cfg);
    CHECK(results.size() >= 5);
    for (const auto& res : results) {
        INFO(res.name, ": ", res.detail);
        CHECK(res.pass);
    }
}
