#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fedvi/protocol.hpp"

namespace fedvi {

enum class EnvKind { gridworld, synthetic, lower_bound };
enum class AlgorithmKind { fed_ucbvi, concurrent_ucbvi };

struct ExperimentConfig {
    EnvKind env = EnvKind::synthetic;
    int n_states = 5;        // S; forced to the grid size for gridworld
    int n_actions = 5;       // A
    int horizon = 5;         // H
    int n_agents = 2;        // M
    long long episode_budget = 1000;  // T
    double eps_p = 0.0;
    double eps_r = 0.0;
    double delta = 0.1;
    AlgorithmKind algorithm = AlgorithmKind::fed_ucbvi;
    std::uint64_t seed = 0;
    bool sync_strict = true;
    std::string output_path = "run.csv";
};

// Throws ConfigError naming the offending field.
void validate_config(const ExperimentConfig& cfg);

// Environment dimensions after env-specific forcing (gridworld: S=8, A=4;
// lower_bound: S=2, A=1). Synthetic passes through unchanged.
ExperimentConfig resolve_dimensions(const ExperimentConfig& cfg);

// Builds the agent fleet for the configured environment, a pure function of
// (config, seed).
Fleet build_fleet(const ExperimentConfig& cfg);

struct EpisodeRow {
    long long episode;       // 1-based episode clock
    double cum_regret;       // cumulative common regret
    long long round;         // round during which the episode was collected
    long long comm_rounds;   // completed synchronizations before the episode
    long long messages;      // cumulative messages visible during collection
    long long bytes;
};

struct RunMetrics {
    std::vector<EpisodeRow> rows;       // one per episode
    long long total_rounds = 0;
    double r_max_bound_value = 0.0;
    double wall_time_ms = 0.0;
    long long total_messages = 0;
    long long total_bytes = 0;
    long long regret_clamps = 0;  // increments zeroed by the 1e-9 float guard

    double final_regret() const { return rows.empty() ? 0.0 : rows.back().cum_regret; }
};

// Called after every policy update with the runner (fresh server tables) and
// the just-finished round.
using RoundObserver = std::function<void(const FedRunner&, const RoundOutcome&)>;

// End-to-end experiment: builds the fleet, solves the common MDP exactly for
// the regret oracle, runs rounds until the episode budget, charging every
// episode of round r the gap V*^c(s1) - V^{c,pi_(r)}(s1) evaluated once per
// round. Asserts the communication bound at the end for the event-triggered
// algorithm.
RunMetrics run_experiment(const ExperimentConfig& cfg, const RoundObserver& observer = {});

// Debug mode: deploys a fixed policy for the whole budget with learning
// disabled; with the optimal policy injected the regret is identically zero.
RunMetrics run_experiment_fixed_policy(const ExperimentConfig& cfg, const Policy& policy);

// Communication-round cap implied by the doubling rules:
//   M S A H log2(nu) + S A H ln(T M / nu) / ln(8/7),
// with the second term floored at zero when T M <= nu.
double r_max_bound(int n_states, int n_actions, int horizon, int n_agents,
                   long long episode_budget, double nu);

// CSV with header episode,cum_common_regret,round,comm_rounds,messages,bytes,
// reals printed with 10 significant digits, '\n' newlines. Byte-identical
// across reruns of the same seed.
void write_csv(const RunMetrics& metrics, const std::string& path);

// Reference value for the best shared policy across the heterogeneous fleet:
// the maximum of the per-agent-averaged value over the candidate set
// {optimal policy of the common MDP} u {each agent's own optimal policy}.
// A lower bound on the true maximum over all policies.
struct SharedPolicyReference {
    double value = 0.0;
    Policy policy;
};
SharedPolicyReference best_known_shared_policy(const Fleet& fleet);

struct SweepSpec {
    ExperimentConfig base;
    std::vector<double> eps_p_values;
    std::vector<int> m_values;
    std::vector<std::uint64_t> seeds;
};

struct SweepCellResult {
    double eps_p = 0.0;
    int m = 0;
    std::uint64_t seed = 0;
    double final_regret = 0.0;
    long long comm_rounds = 0;
    std::string csv_path;
};

// Runs every (eps_p, M, seed) cell, in parallel up to `jobs` threads; each
// cell is independent and lands in its own CSV under out_dir. The summary
// and result order are canonical regardless of the thread count. A failing
// cell aborts the sweep with the cell identity in the error message.
std::vector<SweepCellResult> run_sweep(const SweepSpec& spec, const std::string& out_dir,
                                       int jobs);

// Writes out_dir/summary.csv with columns eps_p,M,seed,final_regret,comm_rounds.
void write_sweep_summary(const std::vector<SweepCellResult>& cells, const std::string& path);

// Runs the configured experiment and reports whether the aggregated start
// value stayed at or above the common-MDP optimum after every round.
bool run_and_check_optimism(const ExperimentConfig& cfg);

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

// Invariant battery behind the `check` subcommand: generator invariants,
// oracle equivalence, closed-form values, counter conservation, optimism
// statistics and the communication bound, at sizes derived from the config.
std::vector<CheckResult> run_invariant_battery(const ExperimentConfig& cfg);

}  // namespace fedvi
