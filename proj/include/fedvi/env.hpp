#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "fedvi/mdp.hpp"

namespace fedvi {

// A fleet of agents sharing a common kernel P^c, each with an individual
// kernel blended in with weight eps_p:
//
//     P^i = (1 - eps_p) P^c + eps_p P^ind,i
//
// so that tv_distance(P^c, P^i) <= eps_p at every cell. Agent rewards stay
// within eps_r of each other in sup norm, and the common MDP's reward table
// is the elementwise mean of the agent reward tables.
struct Fleet {
    int n_agents = 0;
    double eps_p = 0.0;
    double eps_r = 0.0;
    TabularMDP common;                               // kernel P^c, reward = agent mean
    std::vector<Array4<double>> individual_kernels;  // per agent, [h][s][a][s']
    std::vector<Array3<double>> agent_rewards;       // per agent, [h][s][a]

    bool operator==(const Fleet&) const = default;
};

struct MixtureDraw {
    int next_state;
    bool used_individual;  // the Bernoulli(eps_p) component choice
};

// Total-variation distance between two distributions, 0.5 * sum |p - q|.
double tv_distance(std::span<const double> p, std::span<const double> q);

// Exhaustive scan of the fleet invariants: heterogeneity parameters in
// [0, 1), stochastic rows everywhere, TV bound, reward spread bound, and the
// mean-reward identity for the common MDP.
ValidationReport validate_fleet(const Fleet& fleet);
void require_valid(const Fleet& fleet);

// Materializes agent i's MDP: mixed kernel, its own reward table, the shared
// start state.
TabularMDP agent_mdp(const Fleet& fleet, int agent);

// Samples one transition through the two-component mixture; the marginal law
// equals the corresponding agent_mdp kernel row. Consumes two draws.
MixtureDraw sample_mixture_transition(const Fleet& fleet, int agent, int h, int s, int a,
                                      Rng& rng);

struct GridWorldOptions {
    int rows = 3;
    int cols = 3;
    std::vector<std::pair<int, int>> walls = {{1, 1}};
    std::pair<int, int> start = {0, 0};
    std::pair<int, int> target = {2, 2};
    int horizon = 10;
    int n_agents = 1;
    double eps_p = 0.0;
    double eps_r = 0.0;
};

// Grid navigation task. Actions 0..3 are up/down/left/right. The common
// kernel moves to the intended neighboring square with probability 0.8 and
// spreads the remaining 0.2 uniformly over the other accessible neighbors;
// when the intended square is a wall or outside the grid the 0.8 goes to
// staying in place. Reward is 1 on any action taken from the target square,
// 0 elsewhere, for every step. Individual kernels are per-agent Dirichlet
// draws over the accessible-neighbor support; all agents share the reward.
Fleet make_gridworld(const GridWorldOptions& opt, std::uint64_t seed);

struct SyntheticOptions {
    int n_states = 5;
    int n_actions = 5;
    int horizon = 5;
    int n_agents = 1;
    double eps_p = 0.0;
    double eps_r = 0.0;
};

// Random tabular fleet: common and individual kernel rows i.i.d. uniform on
// the simplex (normalized exponentials). Rewards: a base draw
// b ~ U[eps_r/2, 1 - eps_r/2] per cell plus a per-agent offset
// u_i ~ U[-eps_r/2, eps_r/2], which keeps every reward in [0, 1] and every
// pairwise gap within eps_r without clipping.
Fleet make_synthetic(const SyntheticOptions& opt, std::uint64_t seed);

// Two-state chain used for closed-form value checks: state 0 pays reward 1
// and leaks to the absorbing zero-reward state 1 with probability p each
// step. Returns the (p = 0, p = eps) pair; requires 0 < eps < 2/horizon.
// The eps variant has V[start] = (1 - (1 - eps)^H) / eps, so the value gap
// between the variants is (H eps - 1 + (1 - eps)^H) / eps >= eps H^2 / 4.
std::pair<TabularMDP, TabularMDP> make_lower_bound_mdp(int horizon, double eps);

// Same chain for a single leak probability p in [0, 1); used by the
// experiment harness to build degenerate single-parameter fleets.
TabularMDP make_sink_chain(int horizon, double p);

}  // namespace fedvi
