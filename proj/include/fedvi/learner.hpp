#pragma once

#include <span>
#include <utility>
#include <vector>

#include "fedvi/array.hpp"

namespace fedvi {

// Dimensions and confidence level shared by all confidence-width functions.
struct ConfidenceParams {
    double delta = 0.1;
    int n_states = 1;
    int n_actions = 1;
    int horizon = 1;
    int n_agents = 1;
    long long episode_budget = 1;  // T
};

// Confidence widths (natural logs throughout). beta_c feeds both the bonus
// (with n = current global count at a cell) and the synchronization threshold
// (with n = T); beta_kl, beta_var and beta_plain are diagnostics only.
double beta_kl(const ConfidenceParams& cp, long long n);
double beta_c(const ConfidenceParams& cp, long long n);
double beta_star(const ConfidenceParams& cp);
double beta_var(const ConfidenceParams& cp, long long t);
double beta_plain(const ConfidenceParams& cp);

// One agent's per-step report for one (s, a) grid: visit counts n,
// local Q estimate q = r_hat + P_hat V, and the first two moments
// pv = P_hat V, pv2 = P_hat V^2 of the broadcast value row under the
// agent's empirical kernel.
struct LocalStatsTable {
    Array2<long long> visits;  // [s][a]
    Array2<double> q;
    Array2<double> pv;
    Array2<double> pv2;
};

// Empirical next-state distribution: counts / n when n > 0, uniform 1/S
// otherwise. Throws when the counts and n disagree.
std::vector<double> empirical_kernel_row(std::span<const long long> transition_counts,
                                         long long visit_count, int n_states);

// Builds a LocalStatsTable for step h from an agent's counters and reward
// estimates, against the server-broadcast next-step value row.
LocalStatsTable local_q_stats(const Array3<long long>& visits,
                              const Array4<long long>& transitions,
                              const Array3<double>& reward_estimate, int h,
                              std::span<const double> v_next);

// Pooled variance of the value row across agents at (s, a):
//   (1/N) sum_i n_i pv2_i - ((1/N) sum_i n_i pv_i)^2,
// clamped below at zero against floating-point cancellation.
double combined_variance(std::span<const LocalStatsTable> reports, int s, int a);

// Bernstein-style exploration bonus. For fewer than two pooled visits the
// bonus is the trivial upper bound H.
double bonus(long long n_total, double variance, const ConfidenceParams& cp);

// Count-weighted mean of the agents' local Q values plus the bonus, clipped
// at H; H when no agent has visited the cell. Unvisited agents carry zero
// weight, so their uniform-fallback values are inert.
double aggregate_q(std::span<const LocalStatsTable> reports, const ConfidenceParams& cp, int s,
                   int a);

// Max and argmax with the lowest index winning ties.
std::pair<double, int> greedy(std::span<const double> q_row);

}  // namespace fedvi
