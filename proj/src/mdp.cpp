#include "fedvi/mdp.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "fedvi/errors.hpp"

namespace fedvi {

namespace {

constexpr double kRowSumTol = 1e-9;

ValidationReport violation(std::string detail, int h, int s, int a) {
    ValidationReport rep;
    rep.ok = false;
    rep.detail = std::move(detail);
    rep.h = h;
    rep.s = s;
    rep.a = a;
    return rep;
}

std::string cell_str(int h, int s, int a) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), " at (h=%d, s=%d, a=%d)", h, s, a);
    return buf;
}

}  // namespace

ValidationReport validate_mdp(const TabularMDP& mdp) {
    if (mdp.horizon < 1 || mdp.n_states < 1 || mdp.n_actions < 1)
        return violation("horizon, n_states and n_actions must be positive", -1, -1, -1);
    if (mdp.start_state < 0 || mdp.start_state >= mdp.n_states)
        return violation("start_state out of range", -1, -1, -1);
    if (mdp.kernel.dim0() != mdp.horizon || mdp.kernel.dim1() != mdp.n_states ||
        mdp.kernel.dim2() != mdp.n_actions || mdp.kernel.dim3() != mdp.n_states)
        return violation("kernel table shape does not match declared dimensions", -1, -1, -1);
    if (mdp.reward.dim0() != mdp.horizon || mdp.reward.dim1() != mdp.n_states ||
        mdp.reward.dim2() != mdp.n_actions)
        return violation("reward table shape does not match declared dimensions", -1, -1, -1);

    for (int h = 0; h < mdp.horizon; ++h) {
        for (int s = 0; s < mdp.n_states; ++s) {
            for (int a = 0; a < mdp.n_actions; ++a) {
                double sum = 0.0;
                for (double p : mdp.kernel.row(h, s, a)) {
                    if (p < 0.0)
                        return violation("negative kernel entry" + cell_str(h, s, a), h, s, a);
                    sum += p;
                }
                if (std::abs(sum - 1.0) > kRowSumTol) {
                    char buf[96];
                    std::snprintf(buf, sizeof(buf), "kernel row sums to %.12g", sum);
                    return violation(buf + cell_str(h, s, a), h, s, a);
                }
                const double r = mdp.reward(h, s, a);
                if (!(r >= 0.0 && r <= 1.0)) {
                    char buf[96];
                    std::snprintf(buf, sizeof(buf), "reward %.12g outside [0, 1]", r);
                    return violation(buf + cell_str(h, s, a), h, s, a);
                }
            }
        }
    }
    return {};
}

void require_valid(const TabularMDP& mdp) {
    const ValidationReport rep = validate_mdp(mdp);
    if (!rep.ok) throw ConfigError("invalid MDP: " + rep.detail);
}

namespace {

void require_well_formed(const TabularMDP& mdp, const Policy& policy) {
    if (policy.action.dim0() != mdp.horizon || policy.action.dim1() != mdp.n_states)
        throw ConfigError("policy table shape does not match the MDP");
    for (int h = 0; h < mdp.horizon; ++h)
        for (int s = 0; s < mdp.n_states; ++s) {
            const int a = policy.action(h, s);
            if (a < 0 || a >= mdp.n_actions)
                throw ConfigError("policy action out of range" + cell_str(h, s, a));
        }
}

}  // namespace

std::pair<ValueTables, Policy> optimal_values(const TabularMDP& mdp) {
    require_valid(mdp);
    ValueTables out{Array2<double>(mdp.horizon + 1, mdp.n_states, 0.0),
                    Array3<double>(mdp.horizon, mdp.n_states, mdp.n_actions, 0.0)};
    Policy policy{Array2<int>(mdp.horizon, mdp.n_states, 0)};

    for (int h = mdp.horizon - 1; h >= 0; --h) {
        for (int s = 0; s < mdp.n_states; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            int best_action = 0;
            for (int a = 0; a < mdp.n_actions; ++a) {
                const auto row = mdp.kernel.row(h, s, a);
                double q = mdp.reward(h, s, a);
                for (int sn = 0; sn < mdp.n_states; ++sn) q += row[sn] * out.v(h + 1, sn);
                out.q(h, s, a) = q;
                if (q > best) {  // strict: lowest index wins ties
                    best = q;
                    best_action = a;
                }
            }
            out.v(h, s) = best;
            policy.action(h, s) = best_action;
        }
    }
    return {std::move(out), std::move(policy)};
}

ValueTables evaluate_policy(const TabularMDP& mdp, const Policy& policy) {
    require_valid(mdp);
    require_well_formed(mdp, policy);
    ValueTables out{Array2<double>(mdp.horizon + 1, mdp.n_states, 0.0),
                    Array3<double>(mdp.horizon, mdp.n_states, mdp.n_actions, 0.0)};

    for (int h = mdp.horizon - 1; h >= 0; --h) {
        for (int s = 0; s < mdp.n_states; ++s) {
            for (int a = 0; a < mdp.n_actions; ++a) {
                const auto row = mdp.kernel.row(h, s, a);
                double q = mdp.reward(h, s, a);
                for (int sn = 0; sn < mdp.n_states; ++sn) q += row[sn] * out.v(h + 1, sn);
                out.q(h, s, a) = q;
            }
            out.v(h, s) = out.q(h, s, policy.action(h, s));
        }
    }
    return out;
}

Trajectory sample_episode(const TabularMDP& mdp, const Policy& policy, Rng& rng) {
    Trajectory traj;
    traj.reserve(mdp.horizon);
    int s = mdp.start_state;
    for (int h = 0; h < mdp.horizon; ++h) {
        const int a = policy.action(h, s);
        const double r = mdp.reward(h, s, a);
        const int sn = rng.next_categorical(mdp.kernel.row(h, s, a));
        traj.push_back({h, s, a, r, sn});
        s = sn;
    }
    return traj;
}

}  // namespace fedvi
