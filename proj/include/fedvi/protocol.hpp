#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "fedvi/env.hpp"
#include "fedvi/learner.hpp"
#include "fedvi/mdp.hpp"

namespace fedvi {

// Synchronization threshold: 14 eps_p T H M + 182 M beta_c(delta, T).
// Below it a client signals on its own visit count doubling within the
// round; above it the client extrapolates the global count instead.
double compute_nu(const ConfidenceParams& cp, double eps_p);

// One agent's counters. Between synchronizations the client extrapolates the
// global visit count as if all M agents visited what it visited:
//   global_estimate = global_snapshot + M * (visits - visits_round_start),
// maintained incrementally by record_step.
struct ClientState {
    int agent_id = 0;
    int round = 1;
    Array3<long long> visits;              // n, cumulative
    Array3<long long> visits_round_start;  // n at the last sync
    Array4<long long> transitions;         // (s, a, s') counts
    Array3<double> reward_estimate;        // observed deterministic rewards
    Array3<long long> global_estimate;     // extrapolated global counter
    Array3<long long> global_snapshot;     // server counters at round start

    ClientState() = default;
    ClientState(int agent_id, int horizon, int n_states, int n_actions);

    void record_step(int h, int s, int a, double reward, int next_state, int n_agents);
    // Two-tier synchronization predicate for a triplet visited this episode.
    // strict selects the main doubling comparison form (">" vs ">=").
    bool should_sync(int h, int s, int a, double nu, bool strict) const;
    void begin_round(int new_round, const Array3<long long>& server_counters);
    LocalStatsTable local_stats(int h, std::span<const double> v_next) const;
};

// Central server: global counters, aggregated optimistic tables, policy.
struct ServerState {
    int round = 1;
    long long episode_clock = 0;  // t, episodes completed per agent
    long long episode_budget = 0;
    double delta = 0.1;
    double nu = 0.0;
    Array3<long long> counters;  // N
    Array3<double> q_hat;        // initialized to H
    Array2<double> v_hat;        // initialized to H
    Policy policy;

    ServerState() = default;
    ServerState(int horizon, int n_states, int n_actions, long long episode_budget,
                double delta, double nu);
};

// Pulls each client's cumulative counts into the global counter table and
// advances the round index.
void end_round_counters(ServerState& server, const std::vector<ClientState>& clients);

// ---------------------------------------------------------------------------
// Message vocabulary and wire-cost model. Each message costs a 16-byte header
// plus 8 bytes per scalar or table cell; cost curves across implementations
// compare only under this shared accounting rule.

struct PolicyBroadcast {
    Policy policy;
    Array3<long long> counters;
    int round;
    long long episode_clock;
};
struct SyncSignal {
    int agent_id;
    long long episode_clock;
};
struct ValueBroadcast {
    int h;
    std::vector<double> v_row;
};
struct LocalStats {
    int h;
    int agent_id;
    LocalStatsTable table;
};
struct EndTraining {};

using Message =
    std::variant<PolicyBroadcast, SyncSignal, ValueBroadcast, LocalStats, EndTraining>;

long long message_size_bytes(const Message& message);

// In-process delivery hook; a socket transport would implement the same
// interface. The default sink only keeps the accounting totals.
class Transport {
public:
    virtual ~Transport() = default;
    virtual void deliver(const Message& message) = 0;
};

class AccountingTransport : public Transport {
public:
    void deliver(const Message& message) override {
        ++messages_;
        bytes_ += message_size_bytes(message);
    }
    long long messages() const { return messages_; }
    long long bytes() const { return bytes_; }

private:
    long long messages_ = 0;
    long long bytes_ = 0;
};

enum class RoundEnd { agent_trigger, forced_every_episode, budget_exhausted };

struct RoundOutcome {
    long long episodes_run = 0;
    RoundEnd reason = RoundEnd::budget_exhausted;
    int triggering_agent = -1;  // -1 when no doubling trigger fired
    int trigger_h = -1, trigger_s = -1, trigger_a = -1;
    long long messages_exchanged = 0;  // this round
    long long bytes_exchanged = 0;
    // Cumulative totals visible while the round's episodes were collected
    // (after the round-start policy broadcast, before the update phase).
    long long cum_messages_collection = 0;
    long long cum_bytes_collection = 0;
};

struct ProtocolOptions {
    long long episode_budget = 1;  // T
    double delta = 0.1;
    bool sync_strict = true;           // ">" doubling comparisons; false uses ">="
    bool sync_every_episode = false;   // concurrent baseline: one episode per round
};

// Lockstep round orchestration. Every agent completes one episode with the
// current policy, then triggers are scanned agent-major, step-minor; the
// first hit closes the collection phase. A policy update always runs at the
// end of a round, including the round cut short by the episode budget.
// Counter conservation and the extrapolation identity are verified at every
// round boundary and throw InvariantError on mismatch.
class FedRunner {
public:
    FedRunner(const Fleet& fleet, const ProtocolOptions& opt, std::uint64_t seed,
              Transport* transport = nullptr);

    bool finished() const { return server_.episode_clock >= opt_.episode_budget; }
    RoundOutcome run_round();
    void end_training();  // emits the EndTraining signal once

    const ServerState& server() const { return server_; }
    const std::vector<ClientState>& clients() const { return clients_; }
    const TabularMDP& agent_model(int i) const { return agent_mdps_[i]; }
    double nu() const { return server_.nu; }
    long long rounds_completed() const { return rounds_completed_; }
    long long total_messages() const { return messages_; }
    long long total_bytes() const { return bytes_; }
    long long invariant_checks_run() const { return invariant_checks_run_; }

private:
    void send(const Message& message, RoundOutcome& out);
    void policy_update(RoundOutcome& out);
    void verify_round_invariants(const Array3<long long>& wire_counters) const;

    ConfidenceParams cp_;
    ProtocolOptions opt_;
    ServerState server_;
    std::vector<ClientState> clients_;
    std::vector<TabularMDP> agent_mdps_;
    std::vector<Rng> rngs_;
    Transport* transport_ = nullptr;
    long long rounds_completed_ = 0;
    long long messages_ = 0;
    long long bytes_ = 0;
    mutable long long invariant_checks_run_ = 0;
    bool training_ended_ = false;
};

}  // namespace fedvi
