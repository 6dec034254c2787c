#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "fedvi/errors.hpp"
#include "fedvi/protocol.hpp"

using namespace fedvi;

namespace {

Fleet synthetic_fleet(int n_agents, double eps_p, std::uint64_t seed, int dims = 3) {
    SyntheticOptions opt;
    opt.n_states = dims;
    opt.n_actions = dims;
    opt.horizon = dims;
    opt.n_agents = n_agents;
    opt.eps_p = eps_p;
    opt.eps_r = 0.0;
    return make_synthetic(opt, seed);
}

// Single-state fleet with deterministic dynamics; every episode visits the
// same (h, s, a) cells, which makes round lengths predictable.
Fleet unit_fleet(int horizon) {
    Fleet fleet;
    fleet.n_agents = 1;
    fleet.common.horizon = horizon;
    fleet.common.n_states = 1;
    fleet.common.n_actions = 1;
    fleet.common.start_state = 0;
    fleet.common.kernel = Array4<double>(horizon, 1, 1, 1, 1.0);
    fleet.common.reward = Array3<double>(horizon, 1, 1, 0.5);
    fleet.individual_kernels.assign(1, fleet.common.kernel);
    fleet.agent_rewards.assign(1, fleet.common.reward);
    return fleet;
}

// Counts messages by type.
struct TypeCountingTransport : Transport {
    long long policy = 0, sync = 0, value = 0, local = 0, end = 0;
    void deliver(const Message& m) override {
        if (std::holds_alternative<PolicyBroadcast>(m)) ++policy;
        if (std::holds_alternative<SyncSignal>(m)) ++sync;
        if (std::holds_alternative<ValueBroadcast>(m)) ++value;
        if (std::holds_alternative<LocalStats>(m)) ++local;
        if (std::holds_alternative<EndTraining>(m)) ++end;
    }
};

}  // namespace

TEST_CASE("nu threshold formula") {
    const ConfidenceParams cp{0.1, 5, 5, 5, 10, 3000};
    // Heterogeneity-free: only the beta_c term survives.
    CHECK(compute_nu(cp, 0.0) == doctest::Approx(182.0 * 10 * beta_c(cp, 3000)).epsilon(1e-15));
    const double e = std::exp(1.0);
    const double bc = std::log(6.0 * 5 * 5 * 5 / 0.1) + std::log(6.0 * e * 6001.0);
    CHECK(compute_nu(cp, 0.0) == doctest::Approx(1820.0 * bc).epsilon(1e-12));

    // Monotone in every argument.
    CHECK(compute_nu(cp, 0.2) > compute_nu(cp, 0.1));
    ConfidenceParams larger = cp;
    larger.episode_budget = 6000;
    CHECK(compute_nu(larger, 0.1) > compute_nu(cp, 0.1));
    larger = cp;
    larger.horizon = 10;
    CHECK(compute_nu(larger, 0.1) > compute_nu(cp, 0.1));
    larger = cp;
    larger.n_agents = 20;
    CHECK(compute_nu(larger, 0.1) > compute_nu(cp, 0.1));

    ConfidenceParams bad = cp;
    bad.delta = 0.0;
    CHECK_THROWS_AS(compute_nu(bad, 0.1), ConfigError);
    CHECK_THROWS_AS(compute_nu(cp, 1.0), ConfigError);
}

TEST_CASE("record_step maintains counts and the extrapolated counter") {
    const int M = 4;
    ClientState cs(0, 2, 3, 2);
    Array3<long long> server_counters(2, 3, 2, 0);
    server_counters(1, 2, 1) = 6;
    cs.begin_round(1, server_counters);

    cs.record_step(1, 2, 1, 0.25, 0, M);
    CHECK(cs.visits(1, 2, 1) == 1);
    CHECK(cs.transitions(1, 2, 1, 0) == 1);
    CHECK(cs.global_estimate(1, 2, 1) == 6 + M);
    CHECK(cs.reward_estimate(1, 2, 1) == 0.25);

    cs.record_step(1, 2, 1, 0.25, 2, M);
    CHECK(cs.visits(1, 2, 1) == 2);
    CHECK(cs.transitions(1, 2, 1, 0) == 1);
    CHECK(cs.transitions(1, 2, 1, 2) == 1);
    CHECK(cs.reward_estimate(1, 2, 1) == 0.25);  // deterministic overwrite
}

TEST_CASE("two-tier synchronization predicate") {
    ClientState cs(0, 1, 1, 1);
    const double nu = 100.0;

    // Local regime: own count must better than double within the round.
    cs.global_snapshot(0, 0, 0) = 50;  // below nu
    cs.visits_round_start(0, 0, 0) = 3;
    cs.visits(0, 0, 0) = 7;
    CHECK(cs.should_sync(0, 0, 0, nu, true));  // 7 > 6
    cs.visits(0, 0, 0) = 6;
    CHECK_FALSE(cs.should_sync(0, 0, 0, nu, true));  // strict
    CHECK(cs.should_sync(0, 0, 0, nu, false));       // appendix form

    // Unseen triplets fire on the first visit.
    cs.visits_round_start(0, 0, 0) = 0;
    cs.visits(0, 0, 0) = 1;
    CHECK(cs.should_sync(0, 0, 0, nu, true));

    // Global regime: the extrapolated counter against twice the snapshot.
    cs.global_snapshot(0, 0, 0) = 1000;  // above nu
    cs.global_estimate(0, 0, 0) = 1900;
    CHECK_FALSE(cs.should_sync(0, 0, 0, nu, true));
    cs.global_estimate(0, 0, 0) = 2001;
    CHECK(cs.should_sync(0, 0, 0, nu, true));
    cs.global_estimate(0, 0, 0) = 2000;
    CHECK_FALSE(cs.should_sync(0, 0, 0, nu, true));
    CHECK(cs.should_sync(0, 0, 0, nu, false));
}

TEST_CASE("message sizes follow the wire-cost model") {
    const int S = 5, A = 4, H = 3;
    const LocalStats ls{0, 0,
                        LocalStatsTable{Array2<long long>(S, A, 0), Array2<double>(S, A, 0.0),
                                        Array2<double>(S, A, 0.0), Array2<double>(S, A, 0.0)}};
    CHECK(message_size_bytes(Message(ls)) == 16 + 8 * 4 * S * A);
    CHECK(message_size_bytes(Message(ValueBroadcast{0, std::vector<double>(S, 0.0)})) ==
          16 + 8 * S);
    const PolicyBroadcast pb{Policy{Array2<int>(H, S, 0)}, Array3<long long>(H, S, A, 0), 1, 0};
    CHECK(message_size_bytes(Message(pb)) == 16 + 8 * (H * S + H * S * A) + 16);
    CHECK(message_size_bytes(Message(SyncSignal{0, 0})) == 32);
    CHECK(message_size_bytes(Message(EndTraining{})) == 16);
}

TEST_CASE("round one triggers on the first episode from a cold start") {
    const Fleet fleet = synthetic_fleet(3, 0.0, 7);
    ProtocolOptions opt;
    opt.episode_budget = 50;
    FedRunner runner(fleet, opt, 7);
    const RoundOutcome out = runner.run_round();
    CHECK(out.episodes_run == 1);
    CHECK(out.reason == RoundEnd::agent_trigger);
    CHECK(out.triggering_agent == 0);  // lowest agent in scan order
    CHECK(out.trigger_h == 0);
    CHECK(runner.server().round == 2);
    CHECK(runner.server().episode_clock == 1);
}

TEST_CASE("concurrent mode runs exactly one episode per round") {
    const Fleet fleet = synthetic_fleet(2, 0.0, 9);
    ProtocolOptions opt;
    opt.episode_budget = 25;
    opt.sync_every_episode = true;
    FedRunner runner(fleet, opt, 9);
    long long rounds = 0;
    while (!runner.finished()) {
        const RoundOutcome out = runner.run_round();
        CHECK(out.episodes_run == 1);
        CHECK(out.reason == RoundEnd::forced_every_episode);
        ++rounds;
    }
    CHECK(rounds == 25);
    CHECK(runner.rounds_completed() == 25);
}

TEST_CASE("round lengths follow the doubling rule on the unit fleet") {
    const Fleet fleet = unit_fleet(2);
    ProtocolOptions opt;
    opt.episode_budget = 10;
    FedRunner runner(fleet, opt, 1);
    // Round 1: the unvisited cell fires immediately.
    CHECK(runner.run_round().episodes_run == 1);
    // Round 2 starts with n = 1 per cell; the strict rule n > 2 needs n = 3.
    CHECK(runner.run_round().episodes_run == 2);
    // Round 3 starts at n = 3 and fires at n = 7.
    CHECK(runner.run_round().episodes_run == 4);
    // Budget closes the next round early: only 3 of the needed 8 remain.
    const RoundOutcome last = runner.run_round();
    CHECK(last.reason == RoundEnd::budget_exhausted);
    CHECK(last.episodes_run == 3);
    CHECK(runner.finished());
    CHECK_THROWS_AS(runner.run_round(), InvariantError);
}

TEST_CASE("per-round message counts match the protocol shape") {
    const int M = 3;
    const Fleet fleet = synthetic_fleet(M, 0.1, 21);
    const int H = fleet.common.horizon;
    TypeCountingTransport transport;
    ProtocolOptions opt;
    opt.episode_budget = 30;
    FedRunner runner(fleet, opt, 21, &transport);
    long long rounds = 0, syncs = 0;
    while (!runner.finished()) {
        const RoundOutcome out = runner.run_round();
        ++rounds;
        syncs += out.reason == RoundEnd::agent_trigger ? 1 : 0;
    }
    runner.end_training();
    CHECK(transport.policy == M * rounds);
    CHECK(transport.local == M * H * rounds);
    CHECK(transport.value == H * rounds);
    CHECK(transport.sync == syncs);
    CHECK(transport.end == 1);
    CHECK(runner.total_messages() ==
          transport.policy + transport.local + transport.value + transport.sync + 1);
}

TEST_CASE("server counters conserve client visit totals") {
    const Fleet fleet = synthetic_fleet(3, 0.2, 33);
    ProtocolOptions opt;
    opt.episode_budget = 40;
    FedRunner runner(fleet, opt, 33);
    long long episodes = 0;
    while (!runner.finished()) episodes += runner.run_round().episodes_run;
    CHECK(episodes == 40);
    CHECK(runner.invariant_checks_run() == runner.rounds_completed());

    // Per step, total counts equal M * episodes.
    const auto& counters = runner.server().counters;
    for (int h = 0; h < fleet.common.horizon; ++h) {
        long long per_step = 0;
        for (int s = 0; s < fleet.common.n_states; ++s)
            for (int a = 0; a < fleet.common.n_actions; ++a) per_step += counters(h, s, a);
        CHECK(per_step == 3 * episodes);
    }
}

TEST_CASE("end_round_counters sums disjoint client visits") {
    ServerState server(1, 2, 1, 10, 0.1, 50.0);
    std::vector<ClientState> clients{ClientState(0, 1, 2, 1), ClientState(1, 1, 2, 1)};
    clients[0].visits(0, 0, 0) = 3;
    clients[1].visits(0, 1, 0) = 5;
    end_round_counters(server, clients);
    CHECK(server.counters(0, 0, 0) == 3);
    CHECK(server.counters(0, 1, 0) == 5);
    CHECK(server.round == 2);

    clients[0].visits(0, 1, 0) = 1;  // now overlapping
    end_round_counters(server, clients);
    CHECK(server.counters(0, 1, 0) == 6);
    CHECK(server.round == 3);
}

TEST_CASE("identical seeds replay identical rounds and tables") {
    const Fleet fleet = synthetic_fleet(4, 0.3, 55);
    ProtocolOptions opt;
    opt.episode_budget = 60;
    FedRunner a(fleet, opt, 55), b(fleet, opt, 55);
    while (!a.finished()) {
        const RoundOutcome oa = a.run_round();
        const RoundOutcome ob = b.run_round();
        CHECK(oa.episodes_run == ob.episodes_run);
        CHECK(oa.triggering_agent == ob.triggering_agent);
        CHECK(oa.trigger_h == ob.trigger_h);
        CHECK(oa.bytes_exchanged == ob.bytes_exchanged);
    }
    CHECK(b.finished());
    CHECK(a.server().q_hat == b.server().q_hat);
    CHECK(a.server().v_hat == b.server().v_hat);
    CHECK(a.server().policy == b.server().policy);
}

TEST_CASE("aggregated tables stay clipped to [0, H]") {
    const Fleet fleet = synthetic_fleet(2, 0.1, 77);
    const double h_cap = fleet.common.horizon;
    ProtocolOptions opt;
    opt.episode_budget = 30;
    FedRunner runner(fleet, opt, 77);
    while (!runner.finished()) {
        runner.run_round();
        for (double q : runner.server().q_hat.raw()) {
            CHECK(q >= 0.0);
            CHECK(q <= h_cap);
        }
        for (double v : runner.server().v_hat.raw()) {
            CHECK(v >= 0.0);
            CHECK(v <= h_cap);
        }
    }
}
