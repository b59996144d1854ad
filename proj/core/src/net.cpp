#include "qnet/net.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <functional>
#include <set>

namespace qnet::net {

namespace {

void check(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

void MuSpec::validate() const {
    check(n_users >= 2, "MuSpec: n_users must be >= 2");
    check(ports_per_user >= 1 && ports_per_user <= n_users - 1,
          "MuSpec: need 1 <= ports_per_user <= n_users - 1");
}

int mu_capacity(const MuSpec& mu) {
    mu.validate();
    const long long n = mu.n_users, i = mu.ports_per_user;
    return int(std::min(n * i / 2, n * (n - 1) / 2));
}

int max_pairs_bruteforce(const MuSpec& mu) {
    mu.validate();
    check(mu.n_users <= 12, "max_pairs_bruteforce: exhaustive search limited to n <= 12");
    const int n = mu.n_users, cap = mu.ports_per_user;

    std::vector<std::pair<int, int>> edges;
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b) edges.emplace_back(a, b);

    std::vector<int> deg(n, 0);
    int best = 0;
    const int total = int(edges.size());

    std::function<void(int, int)> dfs = [&](int idx, int count) {
        best = std::max(best, count);
        if (idx == total) return;
        // Remaining capacity bound: each extra pair consumes two degrees.
        int slack = 0;
        for (int v = 0; v < n; ++v) slack += cap - deg[v];
        const int bound = count + std::min(total - idx, slack / 2);
        if (bound <= best) return;

        const auto [a, b] = edges[idx];
        if (deg[a] < cap && deg[b] < cap) {
            ++deg[a];
            ++deg[b];
            dfs(idx + 1, count + 1);
            --deg[a];
            --deg[b];
        }
        dfs(idx + 1, count);
    };
    dfs(0, 0);
    return best;
}

MuInventory MuInventory::figure4b() {
    MuInventory inv;
    inv.m2 = 1;
    inv.multi[{3, 2}] = 1;
    inv.multi[{4, 2}] = 1;
    inv.multi[{6, 2}] = 1;
    inv.multi[{8, 2}] = 1;
    inv.multi[{9, 8}] = 1;
    inv.switch_ports = 32;
    return inv;
}

CapacityReport total_capacity(const MuInventory& inv, bool strict_ports) {
    check(inv.m2 >= 0, "MuInventory: negative m2");
    CapacityReport rep;
    rep.ports_used = 2 * inv.m2;
    rep.capacity = inv.m2;
    rep.capacity_paper_text = inv.m2;
    if (inv.m2 > 0) rep.per_mu.push_back({2, 1, inv.m2, 1});

    for (const auto& [key, count] : inv.multi) {
        check(count >= 0, "MuInventory: negative MU count");
        if (count == 0) continue;
        MuSpec spec{key.first, key.second};
        const int cap = mu_capacity(spec);
        rep.per_mu.push_back({key.first, key.second, count, cap});
        rep.ports_used += key.first * count;
        rep.capacity += (long long)cap * count;
        // §4 quotes 28 simultaneous pairs for the 9-user 8-port MU although
        // floor(9*8/2) = C(9,2) = 36; both totals are reported.
        const int paper_cap = (key.first == 9 && key.second == 8) ? 28 : cap;
        rep.capacity_paper_text += (long long)paper_cap * count;
        if (key.first == 9 && key.second == 8)
            rep.notes.push_back(
                "M(9,8): formula/oracle capacity is 36 distinct pairs; the paper text "
                "states 28 — both reported, neither guessed as canonical");
    }

    if (rep.ports_used > inv.switch_ports)
        throw ConstraintViolation(rep.ports_used, inv.switch_ports);
    if (rep.ports_used == inv.switch_ports) {
        rep.at_port_limit = true;
        if (strict_ports) throw ConstraintViolation(rep.ports_used, inv.switch_ports);
        rep.notes.push_back(
            "port usage equals the switch size; the paper's strict '<N' reading would "
            "reject this (inclusive per D14)");
    }
    return rep;
}

PairKey make_pair_key(int a, int b) { return {std::min(a, b), std::max(a, b)}; }

namespace {

struct Instance {
    std::string id;
    int n;    // user seats
    int cap;  // ports per user
};

std::vector<Instance> instances_of(const MuInventory& inv) {
    std::vector<Instance> out;
    for (int k = 0; k < inv.m2; ++k) out.push_back({"mu2#" + std::to_string(k), 2, 1});
    for (const auto& [key, count] : inv.multi)
        for (int k = 0; k < count; ++k)
            out.push_back({"mu" + std::to_string(key.first) + "x" +
                               std::to_string(key.second) + "#" + std::to_string(k),
                           key.first, key.second});
    // Largest first so the greedy path fills big units before leftovers.
    std::stable_sort(out.begin(), out.end(), [](const Instance& a, const Instance& b) {
        const int ca = mu_capacity({a.n, a.cap}), cb = mu_capacity({b.n, b.cap});
        if (ca != cb) return ca > cb;
        return a.id < b.id;
    });
    return out;
}

// Max degree-capped request subset within one MU, with the chosen edges.
struct InnerResult {
    int served = 0;
    std::vector<int> edges;  // indices into the request list
};

InnerResult inner_matching(const std::vector<PairRequest>& reqs,
                           const std::vector<int>& edge_ids,
                           const std::vector<int>& users, int cap) {
    std::map<int, int> deg;
    for (int u : users) deg[u] = 0;
    InnerResult best;
    std::vector<int> chosen;

    std::function<void(std::size_t)> dfs = [&](std::size_t idx) {
        if (int(chosen.size()) > best.served) {
            best.served = int(chosen.size());
            best.edges = chosen;
        }
        if (idx == edge_ids.size()) return;
        int slack = 0;
        for (int u : users) slack += cap - deg[u];
        if (int(chosen.size()) + std::min(int(edge_ids.size() - idx), slack / 2) <=
            best.served)
            return;
        const PairRequest& e = reqs[edge_ids[idx]];
        if (deg[e.a] < cap && deg[e.b] < cap) {
            ++deg[e.a];
            ++deg[e.b];
            chosen.push_back(edge_ids[idx]);
            dfs(idx + 1);
            chosen.pop_back();
            --deg[e.a];
            --deg[e.b];
        }
        dfs(idx + 1);
    };
    dfs(0);
    return best;
}

PairingPlan assemble(const std::vector<PairRequest>& original,
                     const std::vector<std::pair<int, std::string>>& served_by) {
    PairingPlan plan;
    std::vector<bool> served(original.size(), false);
    for (const auto& [req_idx, mu_id] : served_by) {
        served[req_idx] = true;
        plan.assignments.push_back({original[req_idx].a, original[req_idx].b, mu_id});
    }
    for (std::size_t k = 0; k < original.size(); ++k)
        if (!served[k]) plan.unserved.push_back(original[k]);
    return plan;
}

}  // namespace

PairingPlan schedule(const std::vector<int>& active_users,
                     const std::vector<PairRequest>& requests, const MuInventory& inv) {
    if (int(active_users.size()) > inv.switch_ports)
        throw ConstraintViolation(int(active_users.size()), inv.switch_ports);

    std::vector<int> users = active_users;
    std::sort(users.begin(), users.end());
    users.erase(std::unique(users.begin(), users.end()), users.end());
    const std::set<int> user_set(users.begin(), users.end());

    // Deduplicate and normalize; invalid or repeated requests stay unserved.
    std::vector<int> usable;  // indices into `requests`
    std::set<PairKey> seen;
    for (std::size_t k = 0; k < requests.size(); ++k) {
        const auto& r = requests[k];
        if (r.a == r.b || !user_set.count(r.a) || !user_set.count(r.b)) continue;
        if (!seen.insert(make_pair_key(r.a, r.b)).second) continue;
        usable.push_back(int(k));
    }
    std::sort(usable.begin(), usable.end(), [&](int x, int y) {
        return make_pair_key(requests[x].a, requests[x].b) <
               make_pair_key(requests[y].a, requests[y].b);
    });

    const std::vector<Instance> instances = instances_of(inv);
    std::vector<std::pair<int, std::string>> served_by;

    if (users.size() <= 12 && !instances.empty()) {
        // Exact: subset DP over (instance, assigned-user mask). f(k, S) is the
        // best served count using instances k.. with users in S taken.
        const int U = int(users.size());
        const int K = int(instances.size());
        auto user_pos = [&](int id) {
            return int(std::lower_bound(users.begin(), users.end(), id) - users.begin());
        };
        // Requests as local edges.
        std::vector<std::pair<int, int>> edge_local(usable.size());
        for (std::size_t e = 0; e < usable.size(); ++e)
            edge_local[e] = {user_pos(requests[usable[e]].a),
                             user_pos(requests[usable[e]].b)};

        auto edges_in = [&](std::uint32_t mask) {
            std::vector<int> ids;
            for (std::size_t e = 0; e < edge_local.size(); ++e)
                if ((mask >> edge_local[e].first & 1u) &&
                    (mask >> edge_local[e].second & 1u))
                    ids.push_back(int(e));
            return ids;
        };

        std::map<std::pair<int, std::uint32_t>, InnerResult> inner_memo;
        auto inner = [&](std::uint32_t mask, int cap) -> const InnerResult& {
            auto key = std::make_pair(cap, mask);
            auto it = inner_memo.find(key);
            if (it != inner_memo.end()) return it->second;
            std::vector<PairRequest> local;
            local.reserve(edge_local.size());
            for (const auto& e : edge_local) local.push_back({e.first, e.second});
            std::vector<int> members;
            for (int u = 0; u < U; ++u)
                if (mask >> u & 1u) members.push_back(u);
            InnerResult res = inner_matching(local, edges_in(mask), members, cap);
            return inner_memo.emplace(key, std::move(res)).first->second;
        };

        std::map<std::pair<int, std::uint32_t>, std::pair<int, std::uint32_t>> choice;
        std::map<std::pair<int, std::uint32_t>, int> memo;
        std::function<int(int, std::uint32_t)> f = [&](int k, std::uint32_t taken) -> int {
            if (k == K) return 0;
            const auto key = std::make_pair(k, taken);
            auto it = memo.find(key);
            if (it != memo.end()) return it->second;
            const std::uint32_t avail = ~taken & ((1u << U) - 1u);
            int best = f(k + 1, taken);  // leave this MU empty
            std::uint32_t best_T = 0;
            // Enumerate user subsets for this instance (seat-count capped).
            for (std::uint32_t T = avail; T; T = (T - 1) & avail) {
                if (std::popcount(T) > instances[k].n) continue;
                const int v = inner(T, instances[k].cap).served + f(k + 1, taken | T);
                if (v > best) {
                    best = v;
                    best_T = T;
                }
            }
            memo[key] = best;
            choice[key] = {best, best_T};
            return best;
        };
        f(0, 0);

        std::uint32_t taken = 0;
        for (int k = 0; k < K; ++k) {
            const auto ch = choice.find({k, taken});
            const std::uint32_t T =
                ch != choice.end() && ch->second.first == f(k, taken) ? ch->second.second
                                                                      : 0;
            if (T) {
                for (int e : inner(T, instances[k].cap).edges)
                    served_by.push_back({usable[e], instances[k].id});
                taken |= T;
            }
        }
    } else {
        // Greedy largest-MU-first (D16): users join an MU with their first
        // placeable request, in lexicographic request order.
        std::map<int, std::string> user_mu;
        std::vector<bool> used(usable.size(), false);
        for (const auto& inst : instances) {
            std::map<int, int> deg;
            int seats = inst.n;
            for (std::size_t e = 0; e < usable.size(); ++e) {
                if (used[e]) continue;
                const auto& r = requests[usable[e]];
                const bool a_here = user_mu.count(r.a) && user_mu[r.a] == inst.id;
                const bool b_here = user_mu.count(r.b) && user_mu[r.b] == inst.id;
                if ((user_mu.count(r.a) && !a_here) || (user_mu.count(r.b) && !b_here))
                    continue;
                const int need = (a_here ? 0 : 1) + (b_here ? 0 : 1);
                if (need > seats) continue;
                if (deg[r.a] >= inst.cap || deg[r.b] >= inst.cap) continue;
                seats -= need;
                if (!a_here) user_mu[r.a] = inst.id;
                if (!b_here) user_mu[r.b] = inst.id;
                ++deg[r.a];
                ++deg[r.b];
                used[e] = true;
                served_by.push_back({usable[e], inst.id});
            }
        }
    }
    return assemble(requests, served_by);
}

bool validate_plan(const PairingPlan& plan, const MuInventory& inv,
                   const std::vector<PairRequest>& requests, std::string* why) {
    auto fail = [&](const std::string& msg) {
        if (why) *why = msg;
        return false;
    };

    std::map<std::string, std::pair<int, int>> mu_shape;  // id -> (n, cap)
    for (const auto& inst : instances_of(inv)) mu_shape[inst.id] = {inst.n, inst.cap};

    std::multiset<PairKey> requested;
    for (const auto& r : requests) requested.insert(make_pair_key(r.a, r.b));

    std::map<int, std::string> user_mu;
    std::map<std::string, std::set<int>> mu_users;
    std::map<std::string, std::map<int, int>> mu_deg;
    std::map<std::string, std::set<PairKey>> mu_pairs;

    for (const auto& asg : plan.assignments) {
        const auto shape = mu_shape.find(asg.mu_id);
        if (shape == mu_shape.end()) return fail("unknown MU id " + asg.mu_id);
        const PairKey key = make_pair_key(asg.user_a, asg.user_b);
        if (asg.user_a == asg.user_b) return fail("self-pairing");
        auto it = requested.find(key);
        if (it == requested.end()) return fail("assignment not requested");
        requested.erase(it);

        for (int u : {asg.user_a, asg.user_b}) {
            auto [pos, fresh] = user_mu.emplace(u, asg.mu_id);
            if (!fresh && pos->second != asg.mu_id)
                return fail("user " + std::to_string(u) + " split across MUs");
            mu_users[asg.mu_id].insert(u);
            if (++mu_deg[asg.mu_id][u] > shape->second.second)
                return fail("user " + std::to_string(u) + " exceeds ports in " + asg.mu_id);
        }
        if (!mu_pairs[asg.mu_id].insert(key).second)
            return fail("duplicate pair inside " + asg.mu_id);
        if (int(mu_users[asg.mu_id].size()) > shape->second.first)
            return fail("too many users in " + asg.mu_id);
    }

    for (const auto& r : plan.unserved) {
        auto it = requested.find(make_pair_key(r.a, r.b));
        if (it == requested.end()) return fail("unserved entry not in requests");
        requested.erase(it);
    }
    if (!requested.empty()) return fail("requests unaccounted for");
    return true;
}

namespace {

NetworkRateReport network_rate_impl(
    const PairingPlan& plan, const std::map<PairKey, sim::ChannelSpec>& channels,
    const std::function<const sns::ProtocolParams*(const PairKey&)>& params_of,
    const sns::SecurityParams& sec, double N, const NetworkRateOptions& opt) {
    NetworkRateReport rep;
    const sim::PhaseFilter filter;
    for (const auto& asg : plan.assignments) {
        const PairKey key = make_pair_key(asg.user_a, asg.user_b);
        NetworkRateReport::PerPair pp{asg.user_a, asg.user_b, asg.mu_id, 0.0, 0.0, false};
        const auto ch = channels.find(key);
        const sns::ProtocolParams* params = params_of(key);
        if (ch != channels.end() && params != nullptr) {
            sim::SimulateOptions sopt;
            sopt.mode = sim::SimMode::Expected;
            sopt.seed = opt.seed;
            sopt.decoy = opt.decoy;
            sopt.clock_hz = opt.clock_hz;
            sopt.duty = opt.duty;
            sopt.aopp_sample_bits = opt.aopp_sample_bits;
            const sim::SimulateResult r =
                sim::simulate_keyrate(*params, ch->second, filter, N, sec, sopt);
            pp.rate_per_pulse = r.report.rate_per_pulse;
            pp.rate_bps = r.report.rate_bps;
            pp.feasible = r.report.feasible;
        }
        rep.total_per_pulse += pp.rate_per_pulse;
        rep.total_bps += pp.rate_bps;
        rep.pairs.push_back(pp);
    }
    return rep;
}

}  // namespace

NetworkRateReport network_rate(const PairingPlan& plan,
                               const std::map<PairKey, sim::ChannelSpec>& channels,
                               const sns::ProtocolParams& params,
                               const sns::SecurityParams& sec, double N,
                               const NetworkRateOptions& opt) {
    return network_rate_impl(
        plan, channels, [&](const PairKey&) { return &params; }, sec, N, opt);
}

NetworkRateReport network_rate(const PairingPlan& plan,
                               const std::map<PairKey, sim::ChannelSpec>& channels,
                               const std::map<PairKey, sns::ProtocolParams>& per_pair_params,
                               const sns::SecurityParams& sec, double N,
                               const NetworkRateOptions& opt) {
    return network_rate_impl(
        plan, channels,
        [&](const PairKey& key) -> const sns::ProtocolParams* {
            const auto it = per_pair_params.find(key);
            return it == per_pair_params.end() ? nullptr : &it->second;
        },
        sec, N, opt);
}

}  // namespace qnet::net
