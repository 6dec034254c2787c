#include "fedvi/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "fedvi/errors.hpp"

namespace fedvi {

namespace {

// Stream ids for environment generation. Keeping them disjoint from the
// agents' runtime stream ids (0..M-1) and independent of the agent count
// means growing the fleet never perturbs draws already made: the common
// environment uses a fixed stream and agent i's individual draws only ever
// come from its own substream.
constexpr std::uint64_t kEnvStreamBase = 1ULL << 32;

void fill_dirichlet(Rng& rng, std::span<double> out) {
    double sum = 0.0;
    for (double& x : out) {
        x = rng.next_exponential();
        sum += x;
    }
    for (double& x : out) x /= sum;
}

ValidationReport fleet_violation(std::string detail, int h, int s, int a) {
    ValidationReport rep;
    rep.ok = false;
    rep.detail = std::move(detail);
    rep.h = h;
    rep.s = s;
    rep.a = a;
    return rep;
}

constexpr double kScanTol = 1e-9;

}  // namespace

double tv_distance(std::span<const double> p, std::span<const double> q) {
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - q[i]);
    return 0.5 * acc;
}

ValidationReport validate_fleet(const Fleet& fleet) {
    if (fleet.n_agents < 1) return fleet_violation("n_agents must be positive", -1, -1, -1);
    if (!(fleet.eps_p >= 0.0 && fleet.eps_p < 1.0))
        return fleet_violation("eps_p must lie in [0, 1)", -1, -1, -1);
    if (!(fleet.eps_r >= 0.0 && fleet.eps_r < 1.0))
        return fleet_violation("eps_r must lie in [0, 1)", -1, -1, -1);

    ValidationReport common_rep = validate_mdp(fleet.common);
    if (!common_rep.ok) {
        common_rep.detail = "common MDP: " + common_rep.detail;
        return common_rep;
    }
    if (static_cast<int>(fleet.individual_kernels.size()) != fleet.n_agents ||
        static_cast<int>(fleet.agent_rewards.size()) != fleet.n_agents)
        return fleet_violation("per-agent table count does not match n_agents", -1, -1, -1);

    const int H = fleet.common.horizon, S = fleet.common.n_states, A = fleet.common.n_actions;
    for (int i = 0; i < fleet.n_agents; ++i) {
        const auto& ker = fleet.individual_kernels[i];
        const auto& rew = fleet.agent_rewards[i];
        if (ker.dim0() != H || ker.dim1() != S || ker.dim2() != A || ker.dim3() != S)
            return fleet_violation("individual kernel shape mismatch for agent " +
                                       std::to_string(i),
                                   -1, -1, -1);
        if (rew.dim0() != H || rew.dim1() != S || rew.dim2() != A)
            return fleet_violation("agent reward shape mismatch for agent " + std::to_string(i),
                                   -1, -1, -1);
        for (int h = 0; h < H; ++h)
            for (int s = 0; s < S; ++s)
                for (int a = 0; a < A; ++a) {
                    double sum = 0.0;
                    for (double p : ker.row(h, s, a)) {
                        if (p < 0.0)
                            return fleet_violation("negative individual kernel entry, agent " +
                                                       std::to_string(i),
                                                   h, s, a);
                        sum += p;
                    }
                    if (std::abs(sum - 1.0) > kScanTol)
                        return fleet_violation("individual kernel row not stochastic, agent " +
                                                   std::to_string(i),
                                               h, s, a);
                    const double r = rew(h, s, a);
                    if (!(r >= 0.0 && r <= 1.0))
                        return fleet_violation("agent reward outside [0, 1], agent " +
                                                   std::to_string(i),
                                               h, s, a);
                }
    }

    // TV bound: tv(P^c, P^i) <= eps_p at every cell for the mixed kernels.
    std::vector<double> mixed(S);
    for (int i = 0; i < fleet.n_agents; ++i) {
        const auto& ind = fleet.individual_kernels[i];
        for (int h = 0; h < H; ++h)
            for (int s = 0; s < S; ++s)
                for (int a = 0; a < A; ++a) {
                    const auto common_row = fleet.common.kernel.row(h, s, a);
                    const auto ind_row = ind.row(h, s, a);
                    for (int sn = 0; sn < S; ++sn)
                        mixed[sn] = (1.0 - fleet.eps_p) * common_row[sn] +
                                    fleet.eps_p * ind_row[sn];
                    if (tv_distance(common_row, mixed) > fleet.eps_p + kScanTol)
                        return fleet_violation("kernel heterogeneity exceeds eps_p for agent " +
                                                   std::to_string(i),
                                               h, s, a);
                }
    }

    // Reward spread and mean identity.
    for (int h = 0; h < H; ++h)
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                double lo = fleet.agent_rewards[0](h, s, a);
                double hi = lo;
                double sum = 0.0;
                for (int i = 0; i < fleet.n_agents; ++i) {
                    const double r = fleet.agent_rewards[i](h, s, a);
                    lo = std::min(lo, r);
                    hi = std::max(hi, r);
                    sum += r;
                }
                if (hi - lo > fleet.eps_r + kScanTol)
                    return fleet_violation("reward spread exceeds eps_r", h, s, a);
                if (std::abs(sum / fleet.n_agents - fleet.common.reward(h, s, a)) > 1e-12)
                    return fleet_violation("common reward is not the agent mean", h, s, a);
            }
    return {};
}

void require_valid(const Fleet& fleet) {
    const ValidationReport rep = validate_fleet(fleet);
    if (!rep.ok) throw ConfigError("invalid fleet: " + rep.detail);
}

TabularMDP agent_mdp(const Fleet& fleet, int agent) {
    if (agent < 0 || agent >= fleet.n_agents)
        throw ConfigError("agent index " + std::to_string(agent) + " out of range");
    const int H = fleet.common.horizon, S = fleet.common.n_states, A = fleet.common.n_actions;
    TabularMDP mdp;
    mdp.horizon = H;
    mdp.n_states = S;
    mdp.n_actions = A;
    mdp.start_state = fleet.common.start_state;
    mdp.kernel = Array4<double>(H, S, A, S, 0.0);
    mdp.reward = fleet.agent_rewards[agent];
    const auto& ind = fleet.individual_kernels[agent];
    for (int h = 0; h < H; ++h)
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                const auto c = fleet.common.kernel.row(h, s, a);
                const auto d = ind.row(h, s, a);
                auto out = mdp.kernel.row(h, s, a);
                for (int sn = 0; sn < S; ++sn)
                    out[sn] = (1.0 - fleet.eps_p) * c[sn] + fleet.eps_p * d[sn];
            }
    return mdp;
}

MixtureDraw sample_mixture_transition(const Fleet& fleet, int agent, int h, int s, int a,
                                      Rng& rng) {
    if (agent < 0 || agent >= fleet.n_agents)
        throw ConfigError("agent index " + std::to_string(agent) + " out of range");
    const bool individual = rng.next_bernoulli(fleet.eps_p);
    const auto row = individual ? fleet.individual_kernels[agent].row(h, s, a)
                                : fleet.common.kernel.row(h, s, a);
    return {rng.next_categorical(row), individual};
}

// ---------------------------------------------------------------------------
// GridWorld

namespace {

struct GridGeometry {
    int rows, cols;
    std::vector<int> state_of;  // rows*cols -> state id or -1 for walls
    std::vector<std::pair<int, int>> cell_of;

    bool in_grid(int r, int c) const { return r >= 0 && r < rows && c >= 0 && c < cols; }
    int id(int r, int c) const { return state_of[r * cols + c]; }
};

GridGeometry build_geometry(const GridWorldOptions& opt) {
    GridGeometry g{opt.rows, opt.cols, std::vector<int>(opt.rows * opt.cols, -1), {}};
    std::vector<bool> wall(opt.rows * opt.cols, false);
    for (auto [r, c] : opt.walls) {
        if (r < 0 || r >= opt.rows || c < 0 || c >= opt.cols)
            throw ConfigError("wall coordinate outside the grid");
        wall[r * opt.cols + c] = true;
    }
    auto is_wall = [&](std::pair<int, int> rc) { return wall[rc.first * opt.cols + rc.second]; };
    if (!g.in_grid(opt.start.first, opt.start.second) ||
        !g.in_grid(opt.target.first, opt.target.second))
        throw ConfigError("start/target outside the grid");
    if (is_wall(opt.start) || is_wall(opt.target))
        throw ConfigError("start/target may not be walls");

    int next = 0;
    for (int r = 0; r < opt.rows; ++r)
        for (int c = 0; c < opt.cols; ++c)
            if (!wall[r * opt.cols + c]) {
                g.state_of[r * opt.cols + c] = next++;
                g.cell_of.emplace_back(r, c);
            }
    if (next < 2) throw ConfigError("grid must have at least two free squares");
    return g;
}

// Action order: 0 up, 1 down, 2 left, 3 right.
constexpr int kMoves[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};

}  // namespace

Fleet make_gridworld(const GridWorldOptions& opt, std::uint64_t seed) {
    if (opt.horizon < 1) throw ConfigError("horizon must be positive");
    if (opt.n_agents < 1) throw ConfigError("n_agents must be positive");
    if (!(opt.eps_p >= 0.0 && opt.eps_p < 1.0)) throw ConfigError("eps_p must lie in [0, 1)");
    if (!(opt.eps_r >= 0.0 && opt.eps_r < 1.0)) throw ConfigError("eps_r must lie in [0, 1)");

    const GridGeometry geo = build_geometry(opt);
    const int S = static_cast<int>(geo.cell_of.size());
    const int A = 4;
    const int H = opt.horizon;
    const int target = geo.id(opt.target.first, opt.target.second);

    Fleet fleet;
    fleet.n_agents = opt.n_agents;
    fleet.eps_p = opt.eps_p;
    fleet.eps_r = opt.eps_r;
    fleet.common.horizon = H;
    fleet.common.n_states = S;
    fleet.common.n_actions = A;
    fleet.common.start_state = geo.id(opt.start.first, opt.start.second);
    fleet.common.kernel = Array4<double>(H, S, A, S, 0.0);
    fleet.common.reward = Array3<double>(H, S, A, 0.0);

    // The dynamics are the same at every step; build one (s, a) layer and
    // replicate it across h.
    std::vector<std::vector<int>> accessible(S);
    for (int s = 0; s < S; ++s) {
        auto [r, c] = geo.cell_of[s];
        for (const auto& mv : kMoves) {
            const int nr = r + mv[0], nc = c + mv[1];
            if (geo.in_grid(nr, nc) && geo.id(nr, nc) >= 0)
                accessible[s].push_back(geo.id(nr, nc));
        }
    }

    for (int s = 0; s < S; ++s) {
        auto [r, c] = geo.cell_of[s];
        for (int a = 0; a < A; ++a) {
            std::vector<double> row(S, 0.0);
            const int nr = r + kMoves[a][0], nc = c + kMoves[a][1];
            const int intended = (geo.in_grid(nr, nc)) ? geo.id(nr, nc) : -1;
            if (intended >= 0) {
                row[intended] += 0.8;
                std::vector<int> others;
                for (int nb : accessible[s])
                    if (nb != intended) others.push_back(nb);
                if (others.empty())
                    row[s] += 0.2;
                else
                    for (int nb : others) row[nb] += 0.2 / others.size();
            } else {
                // Blocked move: stay in place with the 0.8 mass.
                row[s] += 0.8;
                if (accessible[s].empty())
                    row[s] += 0.2;
                else
                    for (int nb : accessible[s]) row[nb] += 0.2 / accessible[s].size();
            }
            for (int h = 0; h < H; ++h) {
                for (int sn = 0; sn < S; ++sn) fleet.common.kernel(h, s, a, sn) = row[sn];
                fleet.common.reward(h, s, a) = (s == target) ? 1.0 : 0.0;
            }
        }
    }

    // Individual kernels: one Dirichlet draw over the accessible neighbors
    // per (s, a) per agent, replicated across steps. All agents share the
    // common reward table here.
    fleet.individual_kernels.reserve(opt.n_agents);
    fleet.agent_rewards.assign(opt.n_agents, fleet.common.reward);
    for (int i = 0; i < opt.n_agents; ++i) {
        Rng rng = Rng::split(seed, kEnvStreamBase + 1 + static_cast<std::uint64_t>(i));
        Array4<double> ker(H, S, A, S, 0.0);
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                std::vector<double> weights(accessible[s].size());
                if (weights.empty()) {
                    for (int h = 0; h < H; ++h) ker(h, s, a, s) = 1.0;
                    continue;
                }
                fill_dirichlet(rng, weights);
                for (int h = 0; h < H; ++h)
                    for (std::size_t k = 0; k < weights.size(); ++k)
                        ker(h, s, a, accessible[s][k]) = weights[k];
            }
        fleet.individual_kernels.push_back(std::move(ker));
    }
    require_valid(fleet);
    return fleet;
}

// ---------------------------------------------------------------------------
// Synthetic random fleet

Fleet make_synthetic(const SyntheticOptions& opt, std::uint64_t seed) {
    if (opt.n_states < 1 || opt.n_actions < 1 || opt.horizon < 1 || opt.n_agents < 1)
        throw ConfigError("n_states, n_actions, horizon and n_agents must be positive");
    if (!(opt.eps_p >= 0.0 && opt.eps_p < 1.0)) throw ConfigError("eps_p must lie in [0, 1)");
    if (!(opt.eps_r >= 0.0 && opt.eps_r < 1.0)) throw ConfigError("eps_r must lie in [0, 1)");

    const int S = opt.n_states, A = opt.n_actions, H = opt.horizon, M = opt.n_agents;

    Fleet fleet;
    fleet.n_agents = M;
    fleet.eps_p = opt.eps_p;
    fleet.eps_r = opt.eps_r;
    fleet.common.horizon = H;
    fleet.common.n_states = S;
    fleet.common.n_actions = A;
    fleet.common.start_state = 0;
    fleet.common.kernel = Array4<double>(H, S, A, S, 0.0);
    fleet.common.reward = Array3<double>(H, S, A, 0.0);

    Rng env_rng = Rng::split(seed, kEnvStreamBase);
    Array3<double> base_reward(H, S, A, 0.0);
    for (int h = 0; h < H; ++h)
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                fill_dirichlet(env_rng, fleet.common.kernel.row(h, s, a));
                base_reward(h, s, a) =
                    env_rng.next_uniform(opt.eps_r / 2.0, 1.0 - opt.eps_r / 2.0);
            }

    fleet.individual_kernels.reserve(M);
    fleet.agent_rewards.reserve(M);
    for (int i = 0; i < M; ++i) {
        Rng rng = Rng::split(seed, kEnvStreamBase + 1 + static_cast<std::uint64_t>(i));
        Array4<double> ker(H, S, A, S, 0.0);
        Array3<double> rew(H, S, A, 0.0);
        for (int h = 0; h < H; ++h)
            for (int s = 0; s < S; ++s)
                for (int a = 0; a < A; ++a) {
                    fill_dirichlet(rng, ker.row(h, s, a));
                    rew(h, s, a) = base_reward(h, s, a) +
                                   rng.next_uniform(-opt.eps_r / 2.0, opt.eps_r / 2.0);
                }
        fleet.individual_kernels.push_back(std::move(ker));
        fleet.agent_rewards.push_back(std::move(rew));
    }

    // The common MDP carries the mean agent reward.
    for (int h = 0; h < H; ++h)
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                double sum = 0.0;
                for (int i = 0; i < M; ++i) sum += fleet.agent_rewards[i](h, s, a);
                fleet.common.reward(h, s, a) = sum / M;
            }
    require_valid(fleet);
    return fleet;
}

// ---------------------------------------------------------------------------
// Two-state sink chain

TabularMDP make_sink_chain(int horizon, double p) {
    if (horizon < 1) throw ConfigError("horizon must be positive");
    if (!(p >= 0.0 && p < 1.0)) throw ConfigError("leak probability must lie in [0, 1)");
    TabularMDP mdp;
    mdp.horizon = horizon;
    mdp.n_states = 2;
    mdp.n_actions = 1;
    mdp.start_state = 0;
    mdp.kernel = Array4<double>(horizon, 2, 1, 2, 0.0);
    mdp.reward = Array3<double>(horizon, 2, 1, 0.0);
    for (int h = 0; h < horizon; ++h) {
        mdp.kernel(h, 0, 0, 0) = 1.0 - p;
        mdp.kernel(h, 0, 0, 1) = p;
        mdp.kernel(h, 1, 0, 1) = 1.0;  // absorbing
        mdp.reward(h, 0, 0) = 1.0;
    }
    return mdp;
}

std::pair<TabularMDP, TabularMDP> make_lower_bound_mdp(int horizon, double eps) {
    if (horizon < 1) throw ConfigError("horizon must be positive");
    if (!(eps > 0.0 && eps < 2.0 / horizon))
        throw ConfigError("eps must lie in (0, 2/horizon)");
    return {make_sink_chain(horizon, 0.0), make_sink_chain(horizon, eps)};
}

}  // namespace fedvi
