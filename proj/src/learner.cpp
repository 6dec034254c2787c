#include "fedvi/learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fedvi/errors.hpp"

namespace fedvi {

namespace {

constexpr double kE = 2.718281828459045235360287471352662498;

void check_delta(const ConfidenceParams& cp) {
    if (!(cp.delta > 0.0 && cp.delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
}

double log_sah_over_delta(const ConfidenceParams& cp, double factor) {
    return std::log(factor * cp.n_states * cp.n_actions * cp.horizon / cp.delta);
}

}  // namespace

double beta_kl(const ConfidenceParams& cp, long long n) {
    check_delta(cp);
    if (n < 0) throw ConfigError("count must be nonnegative");
    return log_sah_over_delta(cp, 6.0) + std::log(kE * (1.0 + static_cast<double>(n)));
}

double beta_c(const ConfidenceParams& cp, long long n) {
    check_delta(cp);
    if (n < 0) throw ConfigError("count must be nonnegative");
    return log_sah_over_delta(cp, 6.0) + std::log(6.0 * kE * (2.0 * static_cast<double>(n) + 1.0));
}

double beta_star(const ConfidenceParams& cp) {
    check_delta(cp);
    return log_sah_over_delta(cp, 12.0);
}

double beta_var(const ConfidenceParams& cp, long long t) {
    check_delta(cp);
    if (t < 0) throw ConfigError("count must be nonnegative");
    return std::log(24.0 * kE * (2.0 * cp.n_agents * static_cast<double>(t) + 1.0) / cp.delta);
}

double beta_plain(const ConfidenceParams& cp) {
    check_delta(cp);
    return std::log(48.0 * cp.horizon / cp.delta);
}

std::vector<double> empirical_kernel_row(std::span<const long long> transition_counts,
                                         long long visit_count, int n_states) {
    if (static_cast<int>(transition_counts.size()) != n_states)
        throw InvariantError("transition count row has the wrong length");
    long long sum = 0;
    for (long long c : transition_counts) {
        if (c < 0) throw InvariantError("negative transition count");
        sum += c;
    }
    if (sum != visit_count)
        throw InvariantError("transition counts disagree with the visit count");
    std::vector<double> row(n_states);
    if (visit_count == 0) {
        std::fill(row.begin(), row.end(), 1.0 / n_states);
    } else {
        const double n = static_cast<double>(visit_count);
        for (int sn = 0; sn < n_states; ++sn)
            row[sn] = static_cast<double>(transition_counts[sn]) / n;
    }
    return row;
}

LocalStatsTable local_q_stats(const Array3<long long>& visits,
                              const Array4<long long>& transitions,
                              const Array3<double>& reward_estimate, int h,
                              std::span<const double> v_next) {
    const int S = visits.dim1(), A = visits.dim2();
    LocalStatsTable out{Array2<long long>(S, A, 0), Array2<double>(S, A, 0.0),
                        Array2<double>(S, A, 0.0), Array2<double>(S, A, 0.0)};
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const long long n = visits(h, s, a);
            const std::vector<double> p_hat =
                empirical_kernel_row(transitions.row(h, s, a), n, S);
            double pv = 0.0, pv2 = 0.0;
            for (int sn = 0; sn < S; ++sn) {
                pv += p_hat[sn] * v_next[sn];
                pv2 += p_hat[sn] * v_next[sn] * v_next[sn];
            }
            out.visits(s, a) = n;
            out.pv(s, a) = pv;
            out.pv2(s, a) = pv2;
            out.q(s, a) = reward_estimate(h, s, a) + pv;
        }
    return out;
}

double combined_variance(std::span<const LocalStatsTable> reports, int s, int a) {
    long long n_total = 0;
    for (const auto& rep : reports) n_total += rep.visits(s, a);
    if (n_total < 1) throw InvariantError("combined_variance requires at least one visit");
    double m1 = 0.0, m2 = 0.0;
    for (const auto& rep : reports) {
        const double w = static_cast<double>(rep.visits(s, a));
        m1 += w * rep.pv(s, a);
        m2 += w * rep.pv2(s, a);
    }
    const double n = static_cast<double>(n_total);
    const double variance = m2 / n - (m1 / n) * (m1 / n);
    return variance < 0.0 ? 0.0 : variance;
}

double bonus(long long n_total, double variance, const ConfidenceParams& cp) {
    if (n_total < 0) throw ConfigError("count must be nonnegative");
    if (variance < 0.0) throw ConfigError("variance must be nonnegative");
    if (n_total <= 1) return static_cast<double>(cp.horizon);
    const double bs = beta_star(cp);
    const double bc = beta_c(cp, n_total);
    const double n = static_cast<double>(n_total);
    return (28.0 * bs * cp.horizon + 11.0 * bc) / n + std::sqrt(8.0 * bs * variance / n);
}

double aggregate_q(std::span<const LocalStatsTable> reports, const ConfidenceParams& cp, int s,
                   int a) {
    long long n_total = 0;
    for (const auto& rep : reports) n_total += rep.visits(s, a);
    const double h_cap = static_cast<double>(cp.horizon);
    if (n_total == 0) return h_cap;
    const double n = static_cast<double>(n_total);
    double weighted = 0.0;
    for (const auto& rep : reports)
        weighted += (static_cast<double>(rep.visits(s, a)) / n) * rep.q(s, a);
    const double b = bonus(n_total, combined_variance(reports, s, a), cp);
    return std::min(weighted + b, h_cap);
}

std::pair<double, int> greedy(std::span<const double> q_row) {
    if (q_row.empty()) throw ConfigError("greedy requires a nonempty row");
    double best = -std::numeric_limits<double>::infinity();
    int best_action = 0;
    for (std::size_t a = 0; a < q_row.size(); ++a)
        if (q_row[a] > best) {
            best = q_row[a];
            best_action = static_cast<int>(a);
        }
    return {best, best_action};
}

}  // namespace fedvi
