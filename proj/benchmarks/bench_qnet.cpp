#include <benchmark/benchmark.h>

#include <qnet/net.hpp>
#include <qnet/opt.hpp>
#include <qnet/sim.hpp>
#include <qnet/sns.hpp>

using namespace qnet;

static void BM_ExpectedTally(benchmark::State& state) {
    const sns::ProtocolParams params = sns::table1_20db();
    const sim::ChannelSpec ch = sim::calibrated_channel(double(state.range(0)));
    const sim::PhaseFilter filter;
    for (auto _ : state) {
        benchmark::DoNotOptimize(sim::expected_tally(params, ch, filter, 1e10));
    }
}
BENCHMARK(BM_ExpectedTally)->Arg(20)->Arg(30);

static void BM_DecoyBounds(benchmark::State& state) {
    const sns::ProtocolParams params = sns::table1_20db();
    const sns::SecurityParams sec;
    const sns::DetectionTally tally =
        sim::expected_tally(params, sim::calibrated_channel(20.0), sim::PhaseFilter{}, 1e10);
    for (auto _ : state) {
        benchmark::DoNotOptimize(sns::decoy_bounds(tally, params, sec));
    }
}
BENCHMARK(BM_DecoyBounds);

static void BM_AoppEstimate(benchmark::State& state) {
    const sns::ProtocolParams params = sns::table1_20db();
    const sns::SecurityParams sec;
    const sns::DetectionTally tally =
        sim::expected_tally(params, sim::calibrated_channel(20.0), sim::PhaseFilter{}, 1e10);
    const sns::DecoyBounds bounds = sns::decoy_bounds(tally, params, sec);
    const sns::AoppMeasured measured{1.5e7, 6.7e6, 3.7e6, 5.9e6, 0.015};
    for (auto _ : state) {
        benchmark::DoNotOptimize(sns::aopp_estimate(bounds, measured, sec));
    }
}
BENCHMARK(BM_AoppEstimate);

static void BM_AoppBitlevel(benchmark::State& state) {
    sns::ZZCounts zz{6000.0, 450000.0, 520000.0, 24000.0};  // ~1e6-bit raw key
    const sim::RawKeyPair raw = sim::synthesize_raw_key(zz, 42);
    std::uint64_t seed = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(sim::aopp_bitlevel(raw, ++seed));
    }
    state.SetItemsProcessed(state.iterations() * int64_t(raw.n_t()));
}
BENCHMARK(BM_AoppBitlevel);

static void BM_MonteCarloSession(benchmark::State& state) {
    const sns::ProtocolParams params = sns::table1_20db();
    const sim::ChannelSpec ch = sim::calibrated_channel(20.0);
    const sim::PhaseFilter filter;
    std::uint64_t seed = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            sim::monte_carlo_session(params, ch, filter, double(state.range(0)), ++seed));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MonteCarloSession)->Arg(100000)->Arg(1000000);

static void BM_MaxPairsBruteforce(benchmark::State& state) {
    const net::MuSpec mu{int(state.range(0)), int(state.range(1))};
    for (auto _ : state) {
        benchmark::DoNotOptimize(net::max_pairs_bruteforce(mu));
    }
}
BENCHMARK(BM_MaxPairsBruteforce)->Args({9, 4})->Args({9, 8});

static void BM_Schedule(benchmark::State& state) {
    const net::MuInventory inv = net::MuInventory::figure4b();
    std::vector<int> users;
    std::vector<net::PairRequest> requests;
    for (int u = 1; u <= 12; ++u) users.push_back(u);
    for (int u = 1; u <= 11; ++u) requests.push_back({u, u + 1});
    for (auto _ : state) {
        benchmark::DoNotOptimize(net::schedule(users, requests, inv));
    }
}
BENCHMARK(BM_Schedule);

BENCHMARK_MAIN();
