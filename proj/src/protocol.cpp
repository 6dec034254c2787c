#include "fedvi/protocol.hpp"

#include <string>

#include "fedvi/errors.hpp"

namespace fedvi {

double compute_nu(const ConfidenceParams& cp, double eps_p) {
    if (!(cp.delta > 0.0 && cp.delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
    if (cp.episode_budget < 1 || cp.horizon < 1 || cp.n_agents < 1)
        throw ConfigError("episode budget, horizon and agent count must be positive");
    if (!(eps_p >= 0.0 && eps_p < 1.0)) throw ConfigError("eps_p must lie in [0, 1)");
    return 14.0 * eps_p * static_cast<double>(cp.episode_budget) * cp.horizon * cp.n_agents +
           182.0 * cp.n_agents * beta_c(cp, cp.episode_budget);
}

ClientState::ClientState(int agent_id, int horizon, int n_states, int n_actions)
    : agent_id(agent_id),
      visits(horizon, n_states, n_actions, 0),
      visits_round_start(horizon, n_states, n_actions, 0),
      transitions(horizon, n_states, n_actions, n_states, 0),
      reward_estimate(horizon, n_states, n_actions, 0.0),
      global_estimate(horizon, n_states, n_actions, 0),
      global_snapshot(horizon, n_states, n_actions, 0) {}

void ClientState::record_step(int h, int s, int a, double reward, int next_state,
                              int n_agents) {
    visits(h, s, a) += 1;
    transitions(h, s, a, next_state) += 1;
    global_estimate(h, s, a) += n_agents;
    reward_estimate(h, s, a) = reward;
}

bool ClientState::should_sync(int h, int s, int a, double nu, bool strict) const {
    const long long seen_global = global_snapshot(h, s, a);
    if (static_cast<double>(seen_global) <= nu) {
        // Local doubling of this agent's own count within the round.
        const long long lhs = visits(h, s, a);
        const long long rhs = 2 * visits_round_start(h, s, a);
        return strict ? lhs > rhs : lhs >= rhs;
    }
    // Extrapolated global count against twice the last synchronized count.
    const long long lhs = global_estimate(h, s, a);
    const long long rhs = 2 * seen_global;
    return strict ? lhs > rhs : lhs >= rhs;
}

void ClientState::begin_round(int new_round, const Array3<long long>& server_counters) {
    round = new_round;
    visits_round_start = visits;
    global_snapshot = server_counters;
    global_estimate = server_counters;
}

LocalStatsTable ClientState::local_stats(int h, std::span<const double> v_next) const {
    return local_q_stats(visits, transitions, reward_estimate, h, v_next);
}

ServerState::ServerState(int horizon, int n_states, int n_actions, long long episode_budget,
                         double delta, double nu)
    : episode_budget(episode_budget),
      delta(delta),
      nu(nu),
      counters(horizon, n_states, n_actions, 0),
      q_hat(horizon, n_states, n_actions, static_cast<double>(horizon)),
      v_hat(horizon, n_states, static_cast<double>(horizon)),
      policy{Array2<int>(horizon, n_states, 0)} {}

void end_round_counters(ServerState& server, const std::vector<ClientState>& clients) {
    const int H = server.counters.dim0(), S = server.counters.dim1(),
              A = server.counters.dim2();
    server.counters.fill(0);
    for (const ClientState& client : clients) {
        if (client.visits.dim0() != H || client.visits.dim1() != S ||
            client.visits.dim2() != A)
            throw InvariantError("client counter shape does not match the server");
        for (std::size_t k = 0; k < client.visits.raw().size(); ++k)
            server.counters.raw()[k] += client.visits.raw()[k];
    }
    server.round += 1;
}

long long message_size_bytes(const Message& message) {
    constexpr long long kHeader = 16;
    constexpr long long kCell = 8;
    struct Sizer {
        long long operator()(const PolicyBroadcast& m) const {
            const long long hs =
                static_cast<long long>(m.policy.action.dim0()) * m.policy.action.dim1();
            const long long hsa = static_cast<long long>(m.counters.dim0()) *
                                  m.counters.dim1() * m.counters.dim2();
            return kHeader + kCell * (hs + hsa) + 2 * kCell;  // + round, episode clock
        }
        long long operator()(const SyncSignal&) const { return kHeader + 2 * kCell; }
        long long operator()(const ValueBroadcast& m) const {
            return kHeader + kCell * static_cast<long long>(m.v_row.size());
        }
        long long operator()(const LocalStats& m) const {
            const long long sa =
                static_cast<long long>(m.table.visits.dim0()) * m.table.visits.dim1();
            return kHeader + kCell * 4 * sa;  // n, q, pv, pv2 rows
        }
        long long operator()(const EndTraining&) const { return kHeader; }
    };
    return std::visit(Sizer{}, message);
}

FedRunner::FedRunner(const Fleet& fleet, const ProtocolOptions& opt, std::uint64_t seed,
                     Transport* transport)
    : opt_(opt), transport_(transport) {
    require_valid(fleet);
    if (opt.episode_budget < 1) throw ConfigError("episode budget must be at least 1");
    const int H = fleet.common.horizon, S = fleet.common.n_states, A = fleet.common.n_actions;
    cp_ = ConfidenceParams{opt.delta, S, A, H, fleet.n_agents, opt.episode_budget};
    const double nu = compute_nu(cp_, fleet.eps_p);
    server_ = ServerState(H, S, A, opt.episode_budget, opt.delta, nu);
    clients_.reserve(fleet.n_agents);
    agent_mdps_.reserve(fleet.n_agents);
    rngs_.reserve(fleet.n_agents);
    for (int i = 0; i < fleet.n_agents; ++i) {
        clients_.emplace_back(i, H, S, A);
        agent_mdps_.push_back(agent_mdp(fleet, i));
        rngs_.push_back(Rng::split(seed, static_cast<std::uint64_t>(i)));
    }
}

void FedRunner::send(const Message& message, RoundOutcome& out) {
    ++messages_;
    const long long size = message_size_bytes(message);
    bytes_ += size;
    out.messages_exchanged += 1;
    out.bytes_exchanged += size;
    if (transport_) transport_->deliver(message);
}

RoundOutcome FedRunner::run_round() {
    if (finished()) throw InvariantError("run_round called after the episode budget");
    RoundOutcome out;

    // (i) Round start: the server hands every client the frozen policy and
    // the current global counters.
    const PolicyBroadcast broadcast{server_.policy, server_.counters, server_.round,
                                    server_.episode_clock};
    for (int i = 0; i < static_cast<int>(clients_.size()); ++i) {
        send(Message(broadcast), out);
        clients_[i].begin_round(server_.round, server_.counters);
    }
    out.cum_messages_collection = messages_;
    out.cum_bytes_collection = bytes_;

    // (ii) Lockstep data collection.
    const int n_agents = static_cast<int>(clients_.size());
    std::vector<Trajectory> episodes(n_agents);
    bool triggered = false;
    while (true) {
        for (int i = 0; i < n_agents; ++i) {
            episodes[i] = sample_episode(agent_mdps_[i], server_.policy, rngs_[i]);
            for (const TrajectoryStep& st : episodes[i])
                clients_[i].record_step(st.step, st.state, st.action, st.reward, st.next_state,
                                        n_agents);
        }
        server_.episode_clock += 1;
        out.episodes_run += 1;

        if (opt_.sync_every_episode) {
            out.reason = RoundEnd::forced_every_episode;
            break;
        }
        // Scan this episode's visited triplets, agents in increasing index,
        // steps in increasing order; the first hit triggers.
        for (int i = 0; i < n_agents && !triggered; ++i)
            for (const TrajectoryStep& st : episodes[i]) {
                if (clients_[i].should_sync(st.step, st.state, st.action, server_.nu,
                                            opt_.sync_strict)) {
                    triggered = true;
                    out.reason = RoundEnd::agent_trigger;
                    out.triggering_agent = i;
                    out.trigger_h = st.step;
                    out.trigger_s = st.state;
                    out.trigger_a = st.action;
                    send(Message(SyncSignal{i, server_.episode_clock}), out);
                    break;
                }
            }
        if (triggered) break;
        if (server_.episode_clock >= opt_.episode_budget) {
            out.reason = RoundEnd::budget_exhausted;
            break;
        }
    }

    // (iii) Policy update, also when the budget cut the round short so the
    // metrics close cleanly.
    policy_update(out);
    rounds_completed_ += 1;
    return out;
}

void FedRunner::policy_update(RoundOutcome& out) {
    const int H = cp_.horizon, S = cp_.n_states, A = cp_.n_actions;
    const int n_agents = static_cast<int>(clients_.size());

    // Counters rebuilt from the messages, verified against the clients below.
    Array3<long long> wire_counters(H, S, A, 0);
    std::vector<LocalStatsTable> stats;
    stats.reserve(n_agents);
    std::vector<double> v_next(S, 0.0);  // terminal value row

    for (int h = H - 1; h >= 0; --h) {
        stats.clear();
        for (int i = 0; i < n_agents; ++i) {
            stats.push_back(clients_[i].local_stats(h, v_next));
            send(Message(LocalStats{h, i, stats.back()}), out);
        }
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                long long n_total = 0;
                for (const auto& rep : stats) n_total += rep.visits(s, a);
                wire_counters(h, s, a) = n_total;
                server_.q_hat(h, s, a) = aggregate_q(stats, cp_, s, a);
            }
        for (int s = 0; s < S; ++s) {
            const auto [value, action] = greedy(server_.q_hat.row(h, s));
            server_.v_hat(h, s) = value;
            server_.policy.action(h, s) = action;
        }
        v_next.assign(server_.v_hat.row(h).begin(), server_.v_hat.row(h).end());
        send(Message(ValueBroadcast{h, v_next}), out);
    }

    end_round_counters(server_, clients_);
    verify_round_invariants(wire_counters);
}

void FedRunner::verify_round_invariants(const Array3<long long>& wire_counters) const {
    // Counter conservation: the counters assembled from the per-step
    // messages must match the direct sum over client tables exactly.
    if (!(wire_counters == server_.counters))
        throw InvariantError("counter conservation violated at round " +
                             std::to_string(server_.round));
    // Extrapolation identity for every client, elementwise.
    const long long m = static_cast<long long>(clients_.size());
    for (const ClientState& client : clients_) {
        const auto& est = client.global_estimate.raw();
        const auto& snap = client.global_snapshot.raw();
        const auto& n = client.visits.raw();
        const auto& n0 = client.visits_round_start.raw();
        for (std::size_t k = 0; k < est.size(); ++k)
            if (est[k] != snap[k] + m * (n[k] - n0[k]))
                throw InvariantError("global count extrapolation violated for agent " +
                                     std::to_string(client.agent_id));
    }
    ++invariant_checks_run_;
}

void FedRunner::end_training() {
    if (training_ended_) return;
    training_ended_ = true;
    RoundOutcome sink;
    send(Message(EndTraining{}), sink);
}

}  // namespace fedvi
