#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fedvi/array.hpp"
#include "fedvi/rng.hpp"

namespace fedvi {

// Finite-horizon tabular MDP with step-indexed transition kernels and
// deterministic rewards in [0, 1]. Step indices run 0..horizon-1 internally;
// value tables carry one extra terminal row which is identically zero.
// Kernel rows must be probability vectors; nothing is ever renormalized,
// a malformed row is reported instead.
struct TabularMDP {
    int horizon = 0;
    int n_states = 0;
    int n_actions = 0;
    int start_state = 0;
    Array4<double> kernel;  // [h][s][a][s']
    Array3<double> reward;  // [h][s][a]

    bool operator==(const TabularMDP&) const = default;
};

// Deterministic policy: one action per (step, state).
struct Policy {
    Array2<int> action;  // [h][s]

    bool operator==(const Policy&) const = default;
};

struct ValueTables {
    Array2<double> v;  // [h][s] for h = 0..horizon (terminal row zero)
    Array3<double> q;  // [h][s][a]
};

struct TrajectoryStep {
    int step;        // 0-based step index
    int state;
    int action;
    double reward;
    int next_state;
};
using Trajectory = std::vector<TrajectoryStep>;

struct ValidationReport {
    bool ok = true;
    std::string detail;      // first violation found, empty when ok
    int h = -1, s = -1, a = -1;
};

// Checks dimensions, index ranges, row stochasticity (|sum - 1| <= 1e-9,
// entries >= 0) and reward bounds. Reports the first offending cell.
ValidationReport validate_mdp(const TabularMDP& mdp);

// Throws ConfigError carrying the report detail when validation fails.
void require_valid(const TabularMDP& mdp);

// Backward induction: Q[h] = r[h] + kernel[h] V[h+1], V[h] = max_a Q[h].
// Argmax ties break toward the lowest action index.
std::pair<ValueTables, Policy> optimal_values(const TabularMDP& mdp);

// Policy evaluation through the same backward recursion; Q is filled for
// every action, V follows the policy's action.
ValueTables evaluate_policy(const TabularMDP& mdp, const Policy& policy);

// Rolls out one episode from the fixed start state, consuming exactly
// `horizon` draws from the stream (one categorical draw per step).
Trajectory sample_episode(const TabularMDP& mdp, const Policy& policy, Rng& rng);

}  // namespace fedvi
