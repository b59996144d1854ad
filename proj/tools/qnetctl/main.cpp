// qnetctl: command-line front end for the qnet library.
//
// Subcommands: keyrate, simulate, sweep, capacity, plan, network.
// Exit codes: 0 ok, 2 malformed input, 3 infeasible (R = 0 report still
// emitted), 4 constraint violation.
//
// stdout carries machine-readable output (JSON, or CSV for sweep); short
// human-readable summaries go to stderr.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qnet/io.hpp"
#include "qnet/opt.hpp"

using nlohmann::json;
namespace sns = qnet::sns;
namespace sim = qnet::sim;
namespace net = qnet::net;
namespace qio = qnet::io;
namespace qopt = qnet::opt;

namespace {

// Bare file names are also looked up in $QNETCTL_CONFIG_DIR.
std::string resolve_input(const std::string& path) {
    namespace fs = std::filesystem;
    if (fs::exists(path)) return path;
    if (const char* dir = std::getenv("QNETCTL_CONFIG_DIR")) {
        const fs::path candidate = fs::path(dir) / path;
        if (fs::exists(candidate)) return candidate.string();
    }
    return path;
}

sns::DecoyOptions make_decoy(const std::string& estimation, const std::string& tx_norm) {
    sns::DecoyOptions d;
    d.estimation = estimation == "paper" ? sns::Estimation::Paper : sns::Estimation::Strict;
    d.tx_norm = tx_norm == "detected" ? sns::TxNormalization::DetectedFiltered
                                      : sns::TxNormalization::SentFiltered;
    return d;
}

sns::SecurityParams load_security(const std::string& path) {
    if (path.empty()) return sns::SecurityParams{};
    return qio::parse_security(qio::load_json(resolve_input(path)));
}

void emit(const json& j, const std::string& out_path) {
    std::cout << j.dump(2) << "\n";
    if (!out_path.empty()) qio::save_json(out_path, j);
}

struct CommonFlags {
    std::uint64_t seed = 1;
    std::string estimation = "strict";
    std::string tx_norm = "sent";
    double clock_hz = 1e8;
    double duty = 400.0 / 1024.0;
    std::string out_path;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_rate_flags = true) {
    cmd->add_option("--seed", f.seed, "RNG seed (bit-level AOPP / Monte-Carlo)");
    cmd->add_option("--estimation", f.estimation, "finite-size estimation mode")
        ->check(CLI::IsMember({"strict", "paper"}));
    cmd->add_option("--tx-norm", f.tx_norm, "T_x normalization")
        ->check(CLI::IsMember({"sent", "detected"}));
    if (with_rate_flags) {
        cmd->add_option("--clock-hz", f.clock_hz, "system clock in Hz");
        cmd->add_option("--duty", f.duty, "signal duty cycle");
    }
    cmd->add_option("-o,--out", f.out_path, "also write the JSON output here");
}

// --- keyrate ---------------------------------------------------------------

int cmd_keyrate(const std::string& tally_path, const std::string& params_path,
                const std::string& sec_path, const std::string& window_map,
                const CommonFlags& f) {
    qio::TallyFile tf = qio::parse_tally(qio::load_json(resolve_input(tally_path)));
    if (window_map == "merged")
        tf.window_map = qio::WindowMap::MergedTestWindows;
    else if (window_map == "test-only")
        tf.window_map = qio::WindowMap::TestOnly;

    const sns::ProtocolParams params =
        qio::parse_params(qio::load_json(resolve_input(params_path)));
    const sns::SecurityParams sec = load_security(sec_path);
    const sim::PhaseFilter filter;
    const sns::DetectionTally tally = qio::ingest_tally(tf, params, filter);

    const qio::PipelineResult res = qio::keyrate_pipeline(
        tally, params, sec, f.seed, make_decoy(f.estimation, f.tx_norm), f.clock_hz, f.duty);

    json out = qio::report_to_json(res.report);
    if (!tf.pair_label.empty()) out["pair"] = tf.pair_label;
    if (tf.loss_db) out["loss_db"] = *tf.loss_db;
    out["seed"] = f.seed;
    emit(out, f.out_path);
    std::cerr << "R = " << res.report.rate_per_pulse << " bit/pulse, "
              << res.report.rate_bps << " bit/s"
              << (res.report.feasible ? "" : "  [infeasible]") << "\n";
    return res.report.feasible ? 0 : 3;
}

// --- simulate ---------------------------------------------------------------

int cmd_simulate(const std::string& channel_path, const std::string& params_path,
                 const std::string& sec_path, double N, const std::string& mode,
                 const std::string& out_tally, const CommonFlags& f) {
    const sim::ChannelSpec ch = qio::parse_channel(qio::load_json(resolve_input(channel_path)));
    const sns::ProtocolParams params =
        qio::parse_params(qio::load_json(resolve_input(params_path)));
    const sns::SecurityParams sec = load_security(sec_path);
    const sim::PhaseFilter filter;

    sns::DetectionTally tally;
    if (mode == "mc") {
        tally = sim::monte_carlo_session(params, ch, filter, N, f.seed).tally;
    } else {
        tally = sim::expected_tally(params, ch, filter, N);
    }

    // The report is produced by the same tally -> key pipeline keyrate runs,
    // so re-ingesting the emitted tally reproduces it bit-for-bit.
    const qio::PipelineResult res = qio::keyrate_pipeline(
        tally, params, sec, f.seed, make_decoy(f.estimation, f.tx_norm), f.clock_hz, f.duty);

    const double total_loss = ch.loss_i_db + ch.loss_j_db;
    json jt = qio::tally_to_json(tally, "", total_loss);
    if (!out_tally.empty()) qio::save_json(out_tally, jt);

    json out;
    out["schema"] = "qnet.simulate/1";
    out["mode"] = mode;
    out["seed"] = f.seed;
    out["tally"] = std::move(jt);
    out["report"] = qio::report_to_json(res.report);
    emit(out, f.out_path);
    std::cerr << "simulated N = " << N << " (" << mode << "), R = "
              << res.report.rate_per_pulse << " bit/pulse\n";
    return res.report.feasible ? 0 : 3;
}

// --- sweep -------------------------------------------------------------------

int cmd_sweep(const std::string& channel_path, const std::string& params_path, bool optimize,
              double from, double to, double step, const std::string& unit, double N,
              const std::string& mode, const CommonFlags& f) {
    sim::ChannelSpec base = channel_path.empty()
                                ? sim::calibrated_channel(0.0)
                                : qio::parse_channel(qio::load_json(resolve_input(channel_path)));
    const sns::SecurityParams sec;
    const sim::PhaseFilter filter;
    const sns::DecoyOptions decoy = make_decoy(f.estimation, f.tx_norm);

    sns::ProtocolParams params;
    if (!optimize) params = qio::parse_params(qio::load_json(resolve_input(params_path)));

    if (step <= 0) throw qio::ParseError("--step", "must be positive");
    if (to < from) throw qio::ParseError("--to", "must be >= --from");

    std::vector<qio::SweepRow> rows;
    for (double v = from; v <= to + 1e-9; v += step) {
        qio::SweepRow row;
        row.loss_db = unit == "km" ? 0.2 * v : v;
        row.km = unit == "km" ? v : v / 0.2;

        sim::ChannelSpec ch = base;
        ch.loss_i_db = ch.loss_j_db = row.loss_db / 2.0;

        sns::KeyRateReport rep;
        bool evaluated = true;
        if (optimize) {
            qopt::OptimizeOptions oo;
            oo.decoy = decoy;
            oo.clock_hz = f.clock_hz;
            oo.duty = f.duty;
            try {
                rep = qopt::optimize_params(ch, N, sec, qopt::ParamBounds{}, f.seed, oo).report;
            } catch (const qopt::InfeasibleEverywhere&) {
                evaluated = false;
            }
        } else {
            sim::SimulateOptions so;
            so.mode = mode == "mc" ? sim::SimMode::MonteCarlo : sim::SimMode::Expected;
            so.seed = f.seed;
            so.decoy = decoy;
            so.clock_hz = f.clock_hz;
            so.duty = f.duty;
            rep = sim::simulate_keyrate(params, ch, filter, N, sec, so).report;
        }
        if (evaluated) {
            row.rate_per_pulse = rep.rate_per_pulse;
            row.rate_bps = rep.rate_bps;
            row.e1ph = rep.aopp.e1ph_prime;
            row.n1_prime = rep.aopp.n1_prime;
            row.feasible = rep.feasible;
        }
        rows.push_back(row);
    }
    std::sort(rows.begin(), rows.end(),
              [](const qio::SweepRow& a, const qio::SweepRow& b) { return a.loss_db < b.loss_db; });

    const std::string csv = qio::sweep_csv(rows);
    std::cout << csv;
    if (!f.out_path.empty()) {
        std::ofstream out(f.out_path);
        if (!out) throw qio::ParseError(f.out_path, "cannot open file for writing");
        out << csv;
    }
    const bool any_feasible =
        std::any_of(rows.begin(), rows.end(), [](const qio::SweepRow& r) { return r.feasible; });
    return any_feasible ? 0 : 3;
}

// --- capacity ----------------------------------------------------------------

json capacity_json(const net::CapacityReport& rep, const net::MuInventory& inv) {
    json per_mu = json::array();
    for (const auto& m : rep.per_mu) {
        json row = {{"n", m.n_users},
                    {"i", m.ports_per_user},
                    {"count", m.count},
                    {"capacity_each", m.capacity_each}};
        if (m.n_users <= 12) {
            net::MuSpec spec{m.n_users, m.ports_per_user};
            row["oracle_each"] = net::max_pairs_bruteforce(spec);
        }
        per_mu.push_back(row);
    }
    return {{"schema", "qnet.capacity/1"},
            {"capacity", rep.capacity},
            {"capacity_paper_text", rep.capacity_paper_text},
            {"ports_used", rep.ports_used},
            {"switch_ports", inv.switch_ports},
            {"at_port_limit", rep.at_port_limit},
            {"notes", rep.notes},
            {"per_mu", per_mu}};
}

int cmd_capacity(const std::string& inventory_path, bool strict_ports,
                 const std::string& out_path) {
    const net::MuInventory inv =
        qio::parse_inventory(qio::load_json(resolve_input(inventory_path)));
    const net::CapacityReport rep = net::total_capacity(inv, strict_ports);
    emit(capacity_json(rep, inv), out_path);
    std::cerr << "capacity " << rep.capacity << " pairs (" << rep.ports_used << "/"
              << inv.switch_ports << " ports)\n";
    return 0;
}

// --- plan --------------------------------------------------------------------

int cmd_plan(const std::string& inventory_path, const std::string& requests_path,
             std::vector<int> users, bool strict_ports, const std::string& out_path) {
    const net::MuInventory inv =
        qio::parse_inventory(qio::load_json(resolve_input(inventory_path)));
    net::total_capacity(inv, strict_ports);  // enforce the port constraint

    const qio::RequestsFile req =
        qio::parse_requests(qio::load_json(resolve_input(requests_path)));
    if (users.empty()) users = req.users;

    const net::PairingPlan plan = net::schedule(users, req.pairs, inv);
    std::string why;
    const bool valid = net::validate_plan(plan, inv, req.pairs, &why);

    json assignments = json::array();
    for (const auto& a : plan.assignments)
        assignments.push_back({{"a", a.user_a}, {"b", a.user_b}, {"mu", a.mu_id}});
    json unserved = json::array();
    for (const auto& u : plan.unserved) unserved.push_back({u.a, u.b});

    json out = {{"schema", "qnet.plan/1"},
                {"users", users},
                {"requested", req.pairs.size()},
                {"served", plan.assignments.size()},
                {"assignments", assignments},
                {"unserved", unserved},
                {"valid", valid}};
    if (!valid) out["invalid_reason"] = why;
    emit(out, out_path);
    std::cerr << "served " << plan.assignments.size() << "/" << req.pairs.size()
              << " requests\n";
    if (!valid) return 4;
    if (!req.pairs.empty() && plan.assignments.empty()) return 3;
    return 0;
}

// --- network -----------------------------------------------------------------

struct NetworkClass {
    int n = 0, i = 0, count = 0;
    double excess_db = 0.0;
    sns::ProtocolParams params;
    sns::KeyRateReport report;
    bool feasible = false;
    int users_assigned = 0;
    long long pairs = 0;
    long long pairs_paper_text = 0;
};

long long pairs_for(int users, int ports) {
    if (users < 2) return 0;
    const long long cap = std::min(ports, users - 1);
    return std::min<long long>(users * cap / 2, 1LL * users * (users - 1) / 2);
}

int cmd_network(const std::string& inventory_path, double distance_km, double N,
                int active_users, const std::string& params_path, bool strict_ports,
                const CommonFlags& f) {
    const net::MuInventory inv =
        qio::parse_inventory(qio::load_json(resolve_input(inventory_path)));
    const net::CapacityReport cap = net::total_capacity(inv, strict_ports);

    const sns::SecurityParams sec;
    const sim::PhaseFilter filter;
    const sns::DecoyOptions decoy = make_decoy(f.estimation, f.tx_norm);
    const double fiber_db = 0.2 * distance_km;

    std::vector<NetworkClass> classes;
    if (inv.m2 > 0) classes.push_back({2, 1, inv.m2});
    for (const auto& [key, count] : inv.multi)
        if (count > 0) classes.push_back({key.first, key.second, count});

    int total_seats = 0;
    for (const auto& c : classes) total_seats += c.n * c.count;
    if (active_users < 0) active_users = total_seats;
    active_users = std::min(active_users, total_seats);

    sns::ProtocolParams fixed_params;
    const bool optimize = params_path.empty();
    if (!optimize) fixed_params = qio::parse_params(qio::load_json(resolve_input(params_path)));

    // The operating point depends on the channel only, i.e. on the port count
    // i; evaluate each distinct i once.
    std::map<int, std::pair<sns::ProtocolParams, sns::KeyRateReport>> by_ports;
    for (auto& c : classes) {
        c.excess_db = sim::mu_excess_loss_db(c.i);
        auto it = by_ports.find(c.i);
        if (it == by_ports.end()) {
            const sim::ChannelSpec ch = sim::calibrated_channel(fiber_db, c.excess_db);
            sns::ProtocolParams p = fixed_params;
            sns::KeyRateReport rep;
            if (optimize) {
                qopt::OptimizeOptions oo;
                oo.decoy = decoy;
                oo.clock_hz = f.clock_hz;
                oo.duty = f.duty;
                try {
                    const qopt::OptimizeResult r =
                        qopt::optimize_params(ch, N, sec, qopt::ParamBounds{}, f.seed, oo);
                    p = r.best;
                    rep = r.report;
                } catch (const qopt::InfeasibleEverywhere&) {
                    rep = sns::KeyRateReport{};  // R = 0, infeasible
                }
            } else {
                sim::SimulateOptions so;
                so.seed = f.seed;
                so.decoy = decoy;
                so.clock_hz = f.clock_hz;
                so.duty = f.duty;
                rep = sim::simulate_keyrate(p, ch, filter, N, sec, so).report;
            }
            it = by_ports.emplace(c.i, std::make_pair(p, rep)).first;
        }
        c.params = it->second.first;
        c.report = it->second.second;
        c.feasible = c.report.feasible;
    }

    // Users join the best-rate MUs first.
    std::sort(classes.begin(), classes.end(), [](const NetworkClass& a, const NetworkClass& b) {
        if (a.report.rate_bps != b.report.rate_bps) return a.report.rate_bps > b.report.rate_bps;
        if (a.n != b.n) return a.n < b.n;
        return a.i < b.i;
    });
    int remaining = active_users;
    for (auto& c : classes) {
        for (int inst = 0; inst < c.count; ++inst) {
            const int u = std::min(c.n, remaining);
            remaining -= u;
            const long long p = pairs_for(u, c.i);
            c.users_assigned += u;
            c.pairs += p;
            c.pairs_paper_text += (c.n == 9 && c.i == 8 && u == 9) ? 28 : p;
        }
    }

    double total_pp = 0.0, total_bps = 0.0, total_bps_pt = 0.0;
    double best_pair_bps = 0.0, worst_pair_bps = 0.0;
    json rows = json::array();
    for (const auto& c : classes) {
        const double subtotal = c.pairs * c.report.rate_bps;
        total_pp += c.pairs * c.report.rate_per_pulse;
        total_bps += subtotal;
        total_bps_pt += c.pairs_paper_text * c.report.rate_bps;
        if (c.pairs > 0 && c.feasible) {
            best_pair_bps = std::max(best_pair_bps, c.report.rate_bps);
            worst_pair_bps = worst_pair_bps == 0.0
                                 ? c.report.rate_bps
                                 : std::min(worst_pair_bps, c.report.rate_bps);
        }
        rows.push_back({{"mu", c.i == 1 ? "mu2" : "mu" + std::to_string(c.n) + "x" +
                                                      std::to_string(c.i)},
                        {"n", c.n},
                        {"i", c.i},
                        {"count", c.count},
                        {"users", c.users_assigned},
                        {"pairs", c.pairs},
                        {"excess_db_per_arm", c.excess_db},
                        {"params", qio::params_to_json(c.params)},
                        {"rate_per_pulse", c.report.rate_per_pulse},
                        {"rate_bps", c.report.rate_bps},
                        {"subtotal_bps", subtotal},
                        {"feasible", c.feasible}});
    }

    json out = {{"schema", "qnet.network/1"},
                {"distance_km", distance_km},
                {"fiber_loss_db", fiber_db},
                {"pulses", N},
                {"active_users", active_users},
                {"optimized", optimize},
                {"seed", f.seed},
                {"classes", rows},
                {"total_rate_per_pulse", total_pp},
                {"total_rate_bps", total_bps},
                {"total_rate_bps_paper_text", total_bps_pt},
                {"best_pair_bps", best_pair_bps},
                {"worst_pair_bps", worst_pair_bps},
                {"capacity", capacity_json(cap, inv)},
                {"decisions", qio::decision_ledger()}};
    emit(out, f.out_path);
    std::cerr << "network total " << total_bps << " bit/s over "
              << (total_bps_pt == total_bps ? "" : "formula-counted ")
              << "pairs at " << distance_km << " km\n";
    return total_bps > 0.0 ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"twin-field QKD network toolkit"};
    app.require_subcommand(1);

    // keyrate
    std::string tally_path, params_path, sec_path, window_map = "file";
    CommonFlags kf;
    CLI::App* keyrate = app.add_subcommand("keyrate", "finite-key rate from a tally file");
    keyrate->add_option("tally", tally_path, "qnet.tally/1 file")->required();
    keyrate->add_option("params", params_path, "qnet.params/1 file")->required();
    keyrate->add_option("security", sec_path, "qnet.security/1 file (optional)");
    keyrate->add_option("--window-map", window_map, "override the tally's window map")
        ->check(CLI::IsMember({"file", "merged", "test-only"}));
    add_common(keyrate, kf);

    // simulate
    std::string channel_path, out_tally, mode = "expected";
    double N = 0.0;
    CommonFlags sf;
    CLI::App* simulate = app.add_subcommand("simulate", "simulate a session and rate it");
    simulate->add_option("channel", channel_path, "qnet.channel/1 file")->required();
    simulate->add_option("params", params_path, "qnet.params/1 file")->required();
    simulate->add_option("-N,--pulses", N, "number of pulse pairs")->required();
    simulate->add_option("--mode", mode, "expected | mc")
        ->check(CLI::IsMember({"expected", "mc"}));
    simulate->add_option("--security", sec_path, "qnet.security/1 file");
    simulate->add_option("--out-tally", out_tally, "write the emitted tally here");
    add_common(simulate, sf);

    // sweep
    std::string sweep_channel, sweep_params, unit = "db", sweep_mode = "expected";
    bool optimize = false;
    double from = 10.0, to = 45.0, step = 5.0, sweep_N = 1e10;
    CommonFlags wf;
    CLI::App* sweep = app.add_subcommand("sweep", "rate vs loss/distance as CSV");
    sweep->add_option("--channel", sweep_channel, "channel template (loss overridden per row)");
    CLI::Option* sp = sweep->add_option("--params", sweep_params, "fixed operating point");
    sweep->add_flag("--optimize", optimize, "optimize parameters per row")->excludes(sp);
    sweep->add_option("--from", from, "range start")->required();
    sweep->add_option("--to", to, "range end")->required();
    sweep->add_option("--step", step, "range step");
    sweep->add_option("--unit", unit, "sweep variable unit")
        ->check(CLI::IsMember({"db", "km"}));
    sweep->add_option("-N,--pulses", sweep_N, "pulse pairs per row");
    sweep->add_option("--mode", sweep_mode, "expected | mc")
        ->check(CLI::IsMember({"expected", "mc"}));
    add_common(sweep, wf);

    // capacity
    std::string inventory_path, cap_out;
    bool strict_ports = false;
    CLI::App* capacity = app.add_subcommand("capacity", "network pairing capacity (Eq. 1)");
    capacity->add_option("inventory", inventory_path, "qnet.inventory/1 file")->required();
    capacity->add_flag("--strict-ports", strict_ports, "error at the port limit");
    capacity->add_option("-o,--out", cap_out, "also write the JSON output here");

    // plan
    std::string plan_inventory, requests_path, plan_out;
    std::vector<int> plan_users;
    bool plan_strict = false;
    CLI::App* plan = app.add_subcommand("plan", "schedule pairing requests onto MUs");
    plan->add_option("inventory", plan_inventory, "qnet.inventory/1 file")->required();
    plan->add_option("requests", requests_path, "qnet.requests/1 file")->required();
    plan->add_option("--users", plan_users, "active users (default: request file)")
        ->delimiter(',');
    plan->add_flag("--strict-ports", plan_strict, "error at the port limit");
    plan->add_option("-o,--out", plan_out, "also write the JSON output here");

    // network
    std::string net_inventory, net_params;
    double distance_km = 100.0, net_N = 1e11;
    int active_users = -1;
    bool net_strict = false;
    CommonFlags nf;
    CLI::App* network = app.add_subcommand("network", "total network rate table");
    network->add_option("inventory", net_inventory, "qnet.inventory/1 file")->required();
    network->add_option("--distance-km", distance_km, "user-to-user distance")->required();
    network->add_option("-N,--pulses", net_N, "pulse pairs per user pair");
    network->add_option("--active-users", active_users, "active users (default: all seats)");
    network->add_option("--params", net_params, "fixed operating point (default: optimize)");
    network->add_flag("--strict-ports", net_strict, "error at the port limit");
    add_common(network, nf);

    try {
        app.parse(argc, argv);

        if (keyrate->parsed())
            return cmd_keyrate(tally_path, params_path, sec_path, window_map, kf);
        if (simulate->parsed())
            return cmd_simulate(channel_path, params_path, sec_path, N, mode, out_tally, sf);
        if (sweep->parsed())
            return cmd_sweep(sweep_channel, sweep_params, optimize, from, to, step, unit,
                             sweep_N, sweep_mode, wf);
        if (capacity->parsed()) return cmd_capacity(inventory_path, strict_ports, cap_out);
        if (plan->parsed())
            return cmd_plan(plan_inventory, requests_path, plan_users, plan_strict, plan_out);
        if (network->parsed())
            return cmd_network(net_inventory, distance_km, net_N, active_users, net_params,
                               net_strict, nf);
        return 2;
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    } catch (const net::ConstraintViolation& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const qio::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
