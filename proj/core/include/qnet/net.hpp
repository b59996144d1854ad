#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qnet/sim.hpp"
#include "qnet/sns.hpp"

namespace qnet::net {

// One measurement-unit model: n user ports, each user's signal extended to
// i internal S-BSM ports.
struct MuSpec {
    int n_users = 2;
    int ports_per_user = 1;

    void validate() const;  // n >= 2; 1 <= i <= n-1
};

// Eq. 1 per-MU term with the D15 distinct-pair cap.
int mu_capacity(const MuSpec& mu);

// Exact maximum of distinct user pairs with per-user multiplicity <= i
// (degree-constrained subgraph of K_n). Oracle for mu_capacity; n <= 12.
int max_pairs_bruteforce(const MuSpec& mu);

struct MuInventory {
    int m2 = 0;                             // plain 2-user MUs
    std::map<std::pair<int, int>, int> multi;  // (n, i) -> count, n >= 3
    int switch_ports = 0;                   // N of Eq. 1's constraint

    // The published 32-user configuration (Fig. 4b).
    static MuInventory figure4b();
};

struct ConstraintViolation : std::runtime_error {
    int ports_used;
    int switch_ports;
    ConstraintViolation(int used, int ports)
        : std::runtime_error("switch port constraint violated: " + std::to_string(used) +
                             " ports used of " + std::to_string(ports)),
          ports_used(used),
          switch_ports(ports) {}
};

struct CapacityReport {
    long long capacity = 0;             // Eq. 1 with D15 caps
    long long capacity_paper_text = 0;  // same, with the printed 28 for (9,8)
    int ports_used = 0;
    bool at_port_limit = false;  // inclusive boundary (D14 warning)
    std::vector<std::string> notes;
    struct PerMu {
        int n_users;
        int ports_per_user;
        int count;
        int capacity_each;
    };
    std::vector<PerMu> per_mu;
};

// Throws ConstraintViolation when ports_used exceeds switch_ports (or equals
// it under strict_ports, see D14).
CapacityReport total_capacity(const MuInventory& inv, bool strict_ports = false);

struct PairRequest {
    int a = 0;
    int b = 0;
};

struct PairingPlan {
    struct Assignment {
        int user_a;
        int user_b;
        std::string mu_id;  // e.g. "mu2#0", "mu9x8#0"
    };
    std::vector<Assignment> assignments;
    std::vector<PairRequest> unserved;
};

// Maximizes served requests: each user sits in at most one MU, an (n,i) MU
// hosts at most n users, serves only co-located distinct pairs, and no user
// exceeds i pairings inside it. Exact branch-and-bound for <= 12 active
// users, greedy largest-MU-first beyond (D16). Deterministic (lexicographic
// tie-breaks).
PairingPlan schedule(const std::vector<int>& active_users,
                     const std::vector<PairRequest>& requests, const MuInventory& inv);

// Independent re-check of every PairingPlan invariant.
bool validate_plan(const PairingPlan& plan, const MuInventory& inv,
                   const std::vector<PairRequest>& requests, std::string* why = nullptr);

struct NetworkRateOptions {
    sns::DecoyOptions decoy;
    std::uint64_t seed = 1;
    double clock_hz = 1e8;
    double duty = 400.0 / 1024.0;
    double aopp_sample_bits = 1e6;
};

struct NetworkRateReport {
    double total_per_pulse = 0.0;  // sum over pairs, bit/pulse
    double total_bps = 0.0;
    struct PerPair {
        int user_a;
        int user_b;
        std::string mu_id;
        double rate_per_pulse;
        double rate_bps;
        bool feasible;
    };
    std::vector<PerPair> pairs;
};

using PairKey = std::pair<int, int>;  // normalized (min,max)

PairKey make_pair_key(int a, int b);

// Sums expected-mode simulate_keyrate over the plan's assignments. Channels
// come from `channels`; a missing entry fails that pair (rate 0, flagged).
NetworkRateReport network_rate(const PairingPlan& plan,
                               const std::map<PairKey, sim::ChannelSpec>& channels,
                               const sns::ProtocolParams& params,
                               const sns::SecurityParams& sec, double N,
                               const NetworkRateOptions& opt = {});

// Per-pair parameter override (used when each MU class runs its own
// optimized operating point).
NetworkRateReport network_rate(const PairingPlan& plan,
                               const std::map<PairKey, sim::ChannelSpec>& channels,
                               const std::map<PairKey, sns::ProtocolParams>& per_pair_params,
                               const sns::SecurityParams& sec, double N,
                               const NetworkRateOptions& opt = {});

}  // namespace qnet::net
