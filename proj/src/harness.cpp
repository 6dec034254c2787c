#include "fedvi/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "fedvi/errors.hpp"

namespace fedvi {

namespace {

constexpr double kRegretClampTol = 1e-9;

const char* env_name(EnvKind env) {
    switch (env) {
        case EnvKind::gridworld: return "gridworld";
        case EnvKind::synthetic: return "synthetic";
        case EnvKind::lower_bound: return "lower_bound";
    }
    return "?";
}

}  // namespace

void validate_config(const ExperimentConfig& cfg) {
    if (cfg.episode_budget < 1) throw ConfigError("config field T must be at least 1");
    if (!(cfg.delta > 0.0 && cfg.delta < 1.0))
        throw ConfigError("config field delta must lie in (0, 1)");
    if (!(cfg.eps_p >= 0.0 && cfg.eps_p < 1.0))
        throw ConfigError("config field eps_p must lie in [0, 1)");
    if (!(cfg.eps_r >= 0.0 && cfg.eps_r < 1.0))
        throw ConfigError("config field eps_r must lie in [0, 1)");
    if (cfg.n_states < 1) throw ConfigError("config field S must be at least 1");
    if (cfg.n_actions < 1) throw ConfigError("config field A must be at least 1");
    if (cfg.horizon < 1) throw ConfigError("config field H must be at least 1");
    if (cfg.n_agents < 1) throw ConfigError("config field M must be at least 1");
    if (cfg.output_path.empty()) throw ConfigError("config field output_path must be set");
    if (cfg.env == EnvKind::lower_bound && cfg.eps_p > 0.0 &&
        !(cfg.eps_p < 2.0 / cfg.horizon))
        throw ConfigError("config field eps_p must be below 2/H for the lower_bound env");
}

ExperimentConfig resolve_dimensions(const ExperimentConfig& cfg) {
    ExperimentConfig out = cfg;
    if (cfg.env == EnvKind::gridworld) {
        out.n_states = 8;  // 3x3 grid minus the (1,1) wall
        out.n_actions = 4;
    } else if (cfg.env == EnvKind::lower_bound) {
        out.n_states = 2;
        out.n_actions = 1;
    }
    return out;
}

Fleet build_fleet(const ExperimentConfig& cfg0) {
    const ExperimentConfig cfg = resolve_dimensions(cfg0);
    validate_config(cfg);
    switch (cfg.env) {
        case EnvKind::gridworld: {
            GridWorldOptions opt;
            opt.horizon = cfg.horizon;
            opt.n_agents = cfg.n_agents;
            opt.eps_p = cfg.eps_p;
            opt.eps_r = cfg.eps_r;
            return make_gridworld(opt, cfg.seed);
        }
        case EnvKind::synthetic: {
            SyntheticOptions opt;
            opt.n_states = cfg.n_states;
            opt.n_actions = cfg.n_actions;
            opt.horizon = cfg.horizon;
            opt.n_agents = cfg.n_agents;
            opt.eps_p = cfg.eps_p;
            opt.eps_r = cfg.eps_r;
            return make_synthetic(opt, cfg.seed);
        }
        case EnvKind::lower_bound: {
            // Degenerate homogeneous fleet around the two-state chain; the
            // chain's leak probability carries the configured eps_p.
            const TabularMDP chain = cfg.eps_p > 0.0
                                         ? make_lower_bound_mdp(cfg.horizon, cfg.eps_p).second
                                         : make_sink_chain(cfg.horizon, 0.0);
            Fleet fleet;
            fleet.n_agents = cfg.n_agents;
            fleet.eps_p = 0.0;
            fleet.eps_r = 0.0;
            fleet.common = chain;
            fleet.individual_kernels.assign(cfg.n_agents, chain.kernel);
            fleet.agent_rewards.assign(cfg.n_agents, chain.reward);
            require_valid(fleet);
            return fleet;
        }
    }
    throw ConfigError("config field env has an unknown value");
}

double r_max_bound(int n_states, int n_actions, int horizon, int n_agents,
                   long long episode_budget, double nu) {
    if (!(nu > 1.0)) throw ConfigError("nu must exceed 1");
    const double sah = static_cast<double>(n_states) * n_actions * horizon;
    const double first = n_agents * sah * std::log2(nu);
    const double ratio = static_cast<double>(episode_budget) * n_agents / nu;
    const double second = ratio > 1.0 ? sah * std::log(ratio) / std::log(8.0 / 7.0) : 0.0;
    return first + second;
}

RunMetrics run_experiment(const ExperimentConfig& cfg0, const RoundObserver& observer) {
    const auto t_start = std::chrono::steady_clock::now();
    const ExperimentConfig cfg = resolve_dimensions(cfg0);
    validate_config(cfg);
    const Fleet fleet = build_fleet(cfg);
    const int start = fleet.common.start_state;
    const double v_star = optimal_values(fleet.common).first.v(0, start);

    ProtocolOptions popt;
    popt.episode_budget = cfg.episode_budget;
    popt.delta = cfg.delta;
    popt.sync_strict = cfg.sync_strict;
    popt.sync_every_episode = (cfg.algorithm == AlgorithmKind::concurrent_ucbvi);
    FedRunner runner(fleet, popt, cfg.seed);

    RunMetrics metrics;
    metrics.rows.reserve(static_cast<std::size_t>(cfg.episode_budget));
    double cum = 0.0;
    while (!runner.finished()) {
        // The policy is frozen within a round, so one exact evaluation
        // prices every episode of the round.
        const long long round_idx = runner.server().round;
        const double v_pol = evaluate_policy(fleet.common, runner.server().policy).v(0, start);
        double gap = v_star - v_pol;
        if (gap < 0.0) {
            if (gap < -kRegretClampTol)
                throw InvariantError("common-regret increment " + std::to_string(gap) +
                                     " below -1e-9; oracle and simulator disagree");
            gap = 0.0;
            ++metrics.regret_clamps;
        }
        const long long t_before = runner.server().episode_clock;
        const RoundOutcome out = runner.run_round();
        for (long long e = 1; e <= out.episodes_run; ++e) {
            cum += gap;
            metrics.rows.push_back({t_before + e, cum, round_idx, round_idx - 1,
                                    out.cum_messages_collection, out.cum_bytes_collection});
        }
        if (observer) observer(runner, out);
    }
    runner.end_training();

    metrics.total_rounds = runner.rounds_completed();
    metrics.total_messages = runner.total_messages();
    metrics.total_bytes = runner.total_bytes();
    metrics.r_max_bound_value =
        r_max_bound(fleet.common.n_states, fleet.common.n_actions, fleet.common.horizon,
                    fleet.n_agents, cfg.episode_budget, runner.nu());
    if (cfg.algorithm == AlgorithmKind::fed_ucbvi &&
        static_cast<double>(metrics.total_rounds) > metrics.r_max_bound_value)
        throw InvariantError("communication rounds exceeded the doubling bound");
    metrics.wall_time_ms = std::chrono::duration<double, std::milli>(
                               std::chrono::steady_clock::now() - t_start)
                               .count();
    return metrics;
}

RunMetrics run_experiment_fixed_policy(const ExperimentConfig& cfg0, const Policy& policy) {
    const auto t_start = std::chrono::steady_clock::now();
    const ExperimentConfig cfg = resolve_dimensions(cfg0);
    validate_config(cfg);
    const Fleet fleet = build_fleet(cfg);
    const int start = fleet.common.start_state;
    const double v_star = optimal_values(fleet.common).first.v(0, start);
    double gap = v_star - evaluate_policy(fleet.common, policy).v(0, start);

    RunMetrics metrics;
    if (gap < 0.0) {
        if (gap < -kRegretClampTol)
            throw InvariantError("fixed policy outperforms the oracle beyond float noise");
        gap = 0.0;
        ++metrics.regret_clamps;
    }
    metrics.rows.reserve(static_cast<std::size_t>(cfg.episode_budget));
    double cum = 0.0;
    for (long long t = 1; t <= cfg.episode_budget; ++t) {
        cum += gap;
        metrics.rows.push_back({t, cum, 1, 0, 0, 0});
    }
    metrics.wall_time_ms = std::chrono::duration<double, std::milli>(
                               std::chrono::steady_clock::now() - t_start)
                               .count();
    return metrics;
}

void write_csv(const RunMetrics& metrics, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "episode,cum_common_regret,round,comm_rounds,messages,bytes\n";
    char buf[192];
    for (const EpisodeRow& row : metrics.rows) {
        std::snprintf(buf, sizeof(buf), "%lld,%.10g,%lld,%lld,%lld,%lld\n", row.episode,
                      row.cum_regret, row.round, row.comm_rounds, row.messages, row.bytes);
        out << buf;
    }
    out.flush();
    if (!out) throw IoError("write failed: " + path);
}

SharedPolicyReference best_known_shared_policy(const Fleet& fleet) {
    std::vector<Policy> candidates;
    candidates.push_back(optimal_values(fleet.common).second);
    std::vector<TabularMDP> models;
    models.reserve(fleet.n_agents);
    for (int i = 0; i < fleet.n_agents; ++i) {
        models.push_back(agent_mdp(fleet, i));
        candidates.push_back(optimal_values(models.back()).second);
    }
    const int start = fleet.common.start_state;
    SharedPolicyReference best;
    best.value = -1.0;
    for (const Policy& pi : candidates) {
        double avg = 0.0;
        for (const TabularMDP& model : models) avg += evaluate_policy(model, pi).v(0, start);
        avg /= fleet.n_agents;
        if (avg > best.value) {
            best.value = avg;
            best.policy = pi;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Sweep

std::vector<SweepCellResult> run_sweep(const SweepSpec& spec, const std::string& out_dir,
                                       int jobs) {
    if (spec.eps_p_values.empty() || spec.m_values.empty() || spec.seeds.empty())
        throw ConfigError("sweep lists eps_p_values, M_values and seeds must be nonempty");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create sweep directory: " + out_dir);

    struct Cell {
        double eps_p;
        int m;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (double eps : spec.eps_p_values)
        for (int m : spec.m_values)
            for (std::uint64_t seed : spec.seeds) cells.push_back({eps, m, seed});

    std::vector<SweepCellResult> results(cells.size());
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::string first_error;
    int first_error_kind = 0;  // 1 config, 2 io, 3 invariant

    auto worker = [&] {
        for (;;) {
            const std::size_t idx = next.fetch_add(1);
            if (idx >= cells.size()) return;
            const Cell& cell = cells[idx];
            char name[160];
            std::snprintf(name, sizeof(name), "%s_ep%g_M%d_s%llu.csv",
                          env_name(spec.base.env), cell.eps_p, cell.m,
                          static_cast<unsigned long long>(cell.seed));
            const std::string csv_path = (std::filesystem::path(out_dir) / name).string();
            try {
                ExperimentConfig cfg = spec.base;
                cfg.eps_p = cell.eps_p;
                cfg.n_agents = cell.m;
                cfg.seed = cell.seed;
                cfg.output_path = csv_path;
                const RunMetrics metrics = run_experiment(cfg);
                write_csv(metrics, csv_path);
                results[idx] = {cell.eps_p, cell.m, cell.seed, metrics.final_regret(),
                                metrics.total_rounds, csv_path};
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (first_error.empty()) {
                    char label[200];
                    std::snprintf(label, sizeof(label),
                                  "sweep cell env=%s eps_p=%g M=%d seed=%llu: ",
                                  env_name(spec.base.env), cell.eps_p, cell.m,
                                  static_cast<unsigned long long>(cell.seed));
                    first_error = label + std::string(e.what());
                    if (dynamic_cast<const ConfigError*>(&e))
                        first_error_kind = 1;
                    else if (dynamic_cast<const IoError*>(&e))
                        first_error_kind = 2;
                    else
                        first_error_kind = 3;
                }
                next.store(cells.size());  // stop the remaining workers
                return;
            }
        }
    };

    const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(cells.size())));
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();

    if (!first_error.empty()) {
        if (first_error_kind == 1) throw ConfigError(first_error);
        if (first_error_kind == 2) throw IoError(first_error);
        throw InvariantError(first_error);
    }
    return results;
}

void write_sweep_summary(const std::vector<SweepCellResult>& cells, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "eps_p,M,seed,final_regret,comm_rounds\n";
    char buf[160];
    for (const SweepCellResult& cell : cells) {
        std::snprintf(buf, sizeof(buf), "%g,%d,%llu,%.10g,%lld\n", cell.eps_p, cell.m,
                      static_cast<unsigned long long>(cell.seed), cell.final_regret,
                      cell.comm_rounds);
        out << buf;
    }
    out.flush();
    if (!out) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Invariant battery

bool run_and_check_optimism(const ExperimentConfig& cfg) {
    const Fleet fleet = build_fleet(cfg);
    const int start = fleet.common.start_state;
    const double v_star = optimal_values(fleet.common).first.v(0, start);
    bool held = true;
    run_experiment(cfg, [&](const FedRunner& runner, const RoundOutcome&) {
        if (runner.server().v_hat(0, start) < v_star - kRegretClampTol) held = false;
    });
    return held;
}

namespace {

// Enumeration oracle: evaluates every deterministic policy by forward
// propagation of the state distribution and keeps the elementwise maximum of
// the first-step values. Independent of the backward-induction code path.
std::vector<double> brute_force_v1(const TabularMDP& mdp) {
    const int H = mdp.horizon, S = mdp.n_states, A = mdp.n_actions;
    double n_policies_f = 1.0;
    for (int k = 0; k < H * S; ++k) n_policies_f *= A;
    if (n_policies_f > 4096.0) throw ConfigError("policy enumeration limited to 4096 policies");
    const long long n_policies = static_cast<long long>(n_policies_f);

    std::vector<double> best(S, -1.0);
    std::vector<int> actions(static_cast<std::size_t>(H) * S, 0);
    for (long long code = 0; code < n_policies; ++code) {
        long long rem = code;
        for (int k = 0; k < H * S; ++k) {
            actions[k] = static_cast<int>(rem % A);
            rem /= A;
        }
        for (int s0 = 0; s0 < S; ++s0) {
            std::vector<double> dist(S, 0.0), dist_next(S, 0.0);
            dist[s0] = 1.0;
            double value = 0.0;
            for (int h = 0; h < H; ++h) {
                std::fill(dist_next.begin(), dist_next.end(), 0.0);
                for (int s = 0; s < S; ++s) {
                    if (dist[s] == 0.0) continue;
                    const int a = actions[static_cast<std::size_t>(h) * S + s];
                    value += dist[s] * mdp.reward(h, s, a);
                    const auto row = mdp.kernel.row(h, s, a);
                    for (int sn = 0; sn < S; ++sn) dist_next[sn] += dist[s] * row[sn];
                }
                std::swap(dist, dist_next);
            }
            best[s0] = std::max(best[s0], value);
        }
    }
    return best;
}

TabularMDP random_small_mdp(int S, int A, int H, Rng& rng) {
    TabularMDP mdp;
    mdp.horizon = H;
    mdp.n_states = S;
    mdp.n_actions = A;
    mdp.start_state = 0;
    mdp.kernel = Array4<double>(H, S, A, S, 0.0);
    mdp.reward = Array3<double>(H, S, A, 0.0);
    for (int h = 0; h < H; ++h)
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                auto row = mdp.kernel.row(h, s, a);
                double sum = 0.0;
                for (double& p : row) {
                    p = rng.next_exponential();
                    sum += p;
                }
                for (double& p : row) p /= sum;
                mdp.reward(h, s, a) = rng.next_double();
            }
    return mdp;
}

CheckResult check_pass(std::string name, std::string detail = "ok") {
    return {std::move(name), true, std::move(detail)};
}
CheckResult check_fail(std::string name, std::string detail) {
    return {std::move(name), false, std::move(detail)};
}

}  // namespace

std::vector<CheckResult> run_invariant_battery(const ExperimentConfig& cfg0) {
    const ExperimentConfig cfg = resolve_dimensions(cfg0);
    validate_config(cfg);
    std::vector<CheckResult> out;

    // Generator invariants on the configured environment across a spread of
    // heterogeneity levels (exhaustive TV / reward / stochasticity scans).
    {
        bool ok = true;
        std::string detail = "ok";
        for (double eps : {0.0, 0.1, 0.5}) {
            ExperimentConfig c = cfg;
            if (c.env == EnvKind::lower_bound) continue;
            c.eps_p = eps;
            c.eps_r = std::min(eps, 0.5);
            const Fleet fleet = build_fleet(c);
            const ValidationReport rep = validate_fleet(fleet);
            if (!rep.ok) {
                ok = false;
                detail = "eps_p=" + std::to_string(eps) + ": " + rep.detail;
                break;
            }
        }
        out.push_back(ok ? check_pass("fleet_invariants") : check_fail("fleet_invariants", detail));
    }

    // Backward induction against the enumeration oracle.
    {
        bool ok = true;
        std::string detail = "max |diff| <= 1e-12";
        Rng rng = Rng::split(cfg.seed, 7001);
        for (int rep = 0; rep < 16 && ok; ++rep) {
            const int A = (rep % 4 == 3) ? 3 : 2;
            const TabularMDP mdp = random_small_mdp(2, A, 2, rng);
            const std::vector<double> oracle = brute_force_v1(mdp);
            const ValueTables vt = optimal_values(mdp).first;
            for (int s = 0; s < mdp.n_states; ++s)
                if (std::abs(vt.v(0, s) - oracle[s]) > 1e-12) {
                    ok = false;
                    detail = "mismatch " + std::to_string(vt.v(0, s) - oracle[s]);
                }
        }
        out.push_back(ok ? check_pass("oracle_equivalence", detail)
                         : check_fail("oracle_equivalence", detail));
    }

    // Closed-form values of the two-state chain.
    {
        bool ok = true;
        std::string detail = "ok";
        const std::pair<int, double> cases[] = {{2, 0.5}, {5, 0.3}, {10, 0.15}};
        for (auto [h, eps] : cases) {
            const auto [zero, leak] = make_lower_bound_mdp(h, eps);
            const Policy only{Array2<int>(h, 2, 0)};
            const double got = evaluate_policy(leak, only).v(0, 0);
            const double want = (1.0 - std::pow(1.0 - eps, h)) / eps;
            const double gap = evaluate_policy(zero, only).v(0, 0) - got;
            if (std::abs(got - want) > 1e-12 || gap < eps * h * h / 4.0 - 1e-12) {
                ok = false;
                detail = "H=" + std::to_string(h);
                break;
            }
        }
        out.push_back(ok ? check_pass("lower_bound_closed_form")
                         : check_fail("lower_bound_closed_form", detail));
    }

    // Counter conservation and the extrapolation identity on a short run
    // (verified inside the runner at every round boundary).
    {
        ExperimentConfig c = cfg;
        c.env = EnvKind::synthetic;
        c.n_states = 3;
        c.n_actions = 3;
        c.horizon = 3;
        c.n_agents = std::min(cfg.n_agents, 4);
        c.episode_budget = 200;
        c.eps_p = 0.1;
        c.eps_r = 0.1;
        try {
            run_experiment(c);
            out.push_back(check_pass("counter_conservation"));
        } catch (const std::exception& e) {
            out.push_back(check_fail("counter_conservation", e.what()));
        }
    }

    // Optimism statistics in the homogeneous regime.
    {
        ExperimentConfig c = cfg;
        c.env = EnvKind::synthetic;
        c.n_states = 3;
        c.n_actions = 3;
        c.horizon = 3;
        c.n_agents = 2;
        c.episode_budget = 300;
        c.eps_p = 0.0;
        c.eps_r = 0.0;
        c.delta = 0.1;
        const int n_runs = 20;
        int held = 0;
        for (int k = 0; k < n_runs; ++k) {
            c.seed = cfg.seed + 100 + static_cast<std::uint64_t>(k);
            if (run_and_check_optimism(c)) ++held;
        }
        const double frac = static_cast<double>(held) / n_runs;
        char detail[64];
        std::snprintf(detail, sizeof(detail), "fraction %.2f (need >= %.2f)", frac,
                      1.0 - c.delta);
        out.push_back(frac >= 1.0 - c.delta ? check_pass("optimism_fraction", detail)
                                            : check_fail("optimism_fraction", detail));
    }

    // Measured communication rounds against the doubling bound.
    {
        ExperimentConfig c = cfg;
        c.env = EnvKind::synthetic;
        c.n_states = 4;
        c.n_actions = 4;
        c.horizon = 4;
        c.n_agents = 5;
        c.episode_budget = 500;
        c.eps_p = 0.0;
        c.eps_r = 0.0;
        c.algorithm = AlgorithmKind::fed_ucbvi;
        bool ok = true;
        std::string detail = "ok";
        for (int k = 0; k < 3 && ok; ++k) {
            c.seed = cfg.seed + 900 + static_cast<std::uint64_t>(k);
            const RunMetrics metrics = run_experiment(c);
            if (static_cast<double>(metrics.total_rounds) > metrics.r_max_bound_value) {
                ok = false;
                detail = "rounds " + std::to_string(metrics.total_rounds) + " exceed bound";
            }
        }
        out.push_back(ok ? check_pass("comm_rounds_bound")
                         : check_fail("comm_rounds_bound", detail));
    }

    return out;
}

}  // namespace fedvi
