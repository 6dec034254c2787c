#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "fedvi/mdp.hpp"
#include "fedvi/rng.hpp"

namespace testutil {

// Enumeration oracle, independent of the library's planning code: walks
// every deterministic policy, evaluates it by forward propagation of the
// state distribution, and keeps the elementwise best first-step value.
inline std::vector<double> enumerate_optimal_v1(const fedvi::TabularMDP& mdp) {
    const int H = mdp.horizon, S = mdp.n_states, A = mdp.n_actions;
    long long n_policies = 1;
    for (int k = 0; k < H * S; ++k) n_policies *= A;

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

inline fedvi::TabularMDP random_mdp(int S, int A, int H, fedvi::Rng& rng) {
    fedvi::TabularMDP mdp;
    mdp.horizon = H;
    mdp.n_states = S;
    mdp.n_actions = A;
    mdp.start_state = 0;
    mdp.kernel = fedvi::Array4<double>(H, S, A, S, 0.0);
    mdp.reward = fedvi::Array3<double>(H, S, A, 0.0);
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

// Upper chi-square quantile via the Wilson-Hilferty approximation; z is the
// standard normal quantile of the same level (3.0902 for 0.999).
inline double chi_square_critical(int df, double z) {
    const double t = 2.0 / (9.0 * df);
    const double body = 1.0 - t + z * std::sqrt(t);
    return df * body * body * body;
}

}  // namespace testutil
