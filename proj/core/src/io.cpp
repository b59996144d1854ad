#include "qnet/io.hpp"

#include <cstdio>
#include <fstream>

namespace qnet::io {

using nlohmann::json;

namespace {

void expect_object(const json& j, const std::string& path) {
    if (!j.is_object()) throw ParseError(path, "expected an object");
}

void reject_unknown(const json& j, const std::string& path,
                    std::initializer_list<const char*> allowed) {
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (item.key() == a) {
                ok = true;
                break;
            }
        if (!ok) throw ParseError(path + "/" + item.key(), "unknown key");
    }
}

void expect_schema(const json& j, const std::string& path, const std::string& want) {
    if (!j.contains("schema") || !j["schema"].is_string())
        throw ParseError(path + "/schema", "missing schema tag (expected " + want + ")");
    if (j["schema"].get<std::string>() != want)
        throw ParseError(path + "/schema",
                         "wrong schema '" + j["schema"].get<std::string>() +
                             "', expected " + want);
}

double get_num(const json& j, const std::string& path, const char* key) {
    if (!j.contains(key)) throw ParseError(path + "/" + key, "missing required number");
    if (!j[key].is_number()) throw ParseError(path + "/" + key, "expected a number");
    return j[key].get<double>();
}

double get_num_or(const json& j, const std::string& path, const char* key, double dflt) {
    if (!j.contains(key)) return dflt;
    if (!j[key].is_number()) throw ParseError(path + "/" + key, "expected a number");
    return j[key].get<double>();
}

int get_int(const json& j, const std::string& path, const char* key) {
    if (!j.contains(key)) throw ParseError(path + "/" + key, "missing required integer");
    if (!j[key].is_number_integer()) throw ParseError(path + "/" + key, "expected an integer");
    return j[key].get<int>();
}

const char* kDetectedKeys[16] = {"ZZyy", "ZZoy", "ZZyo", "ZZoo", "ZXyx", "ZXox",
                                 "ZXyo", "ZXoo", "XZxy", "XZoy", "XZxo", "XZoo",
                                 "XXxx", "XXox", "XXxo", "XXoo"};

const char* kCellKeys[3][3] = {{"oo", "ox", "oy"}, {"xo", "xx", "xy"}, {"yo", "yx", "yy"}};

}  // namespace

TallyFile parse_tally(const json& j) {
    const std::string path = "tally";
    expect_object(j, path);
    expect_schema(j, path, "qnet.tally/1");
    reject_unknown(j, path,
                   {"schema", "total_pulses", "pair", "loss_db", "window_map", "detected",
                    "aggregates", "xx_accepted", "xx_correct", "xx_sent_accepted",
                    "qber_zz_pre", "qber_zz_post"});

    TallyFile f;
    f.total_pulses = get_num(j, path, "total_pulses");
    if (j.contains("pair")) {
        if (!j["pair"].is_string()) throw ParseError(path + "/pair", "expected a string");
        f.pair_label = j["pair"].get<std::string>();
    }
    if (j.contains("loss_db")) f.loss_db = get_num(j, path, "loss_db");
    if (j.contains("window_map")) {
        const std::string m = j["window_map"].get<std::string>();
        if (m == "merged_test_windows")
            f.window_map = WindowMap::MergedTestWindows;
        else if (m == "test_only")
            f.window_map = WindowMap::TestOnly;
        else
            throw ParseError(path + "/window_map", "expected merged_test_windows|test_only");
    }

    const bool has_detected = j.contains("detected");
    const bool has_agg = j.contains("aggregates");
    if (has_detected == has_agg)
        throw ParseError(path, "need exactly one of 'detected' or 'aggregates'");

    if (has_detected) {
        const json& d = j["detected"];
        const std::string dpath = path + "/detected";
        expect_object(d, dpath);
        reject_unknown(d, dpath,
                       {"ZZyy", "ZZoy", "ZZyo", "ZZoo", "ZXyx", "ZXox", "ZXyo", "ZXoo",
                        "XZxy", "XZoy", "XZxo", "XZoo", "XXxx", "XXox", "XXxo", "XXoo"});
        for (const char* key : kDetectedKeys) f.detected[key] = get_num(d, dpath, key);
    } else {
        const json& a = j["aggregates"];
        const std::string apath = path + "/aggregates";
        expect_object(a, apath);
        reject_unknown(a, apath, {"counts", "sent_pairs", "zz"});
        sns::DetectionTally t;
        t.total_pulses = f.total_pulses;
        for (int l = 0; l < 3; ++l)
            for (int r = 0; r < 3; ++r) {
                t.counts[l][r] = get_num(a.at("counts"), apath + "/counts", kCellKeys[l][r]);
                t.sent_pairs.n[l][r] =
                    get_num(a.at("sent_pairs"), apath + "/sent_pairs", kCellKeys[l][r]);
            }
        t.sent_pairs.zz_oy = get_num(a.at("sent_pairs"), apath + "/sent_pairs", "zz_oy");
        t.sent_pairs.zz_yo = get_num(a.at("sent_pairs"), apath + "/sent_pairs", "zz_yo");
        t.sent_pairs.zz_oo = get_num(a.at("sent_pairs"), apath + "/sent_pairs", "zz_oo");
        reject_unknown(a.at("sent_pairs"), apath + "/sent_pairs",
                       {"oo", "ox", "oy", "xo", "xx", "xy", "yo", "yx", "yy", "zz_oy",
                        "zz_yo", "zz_oo"});
        reject_unknown(a.at("counts"), apath + "/counts",
                       {"oo", "ox", "oy", "xo", "xx", "xy", "yo", "yx", "yy"});
        const json& z = a.at("zz");
        reject_unknown(z, apath + "/zz", {"yy", "oy", "yo", "oo"});
        t.zz.yy = get_num(z, apath + "/zz", "yy");
        t.zz.oy = get_num(z, apath + "/zz", "oy");
        t.zz.yo = get_num(z, apath + "/zz", "yo");
        t.zz.oo = get_num(z, apath + "/zz", "oo");
        f.aggregates = t;
    }

    f.xx_accepted = get_num(j, path, "xx_accepted");
    f.xx_correct = get_num(j, path, "xx_correct");
    if (j.contains("xx_sent_accepted")) f.xx_sent_accepted = get_num(j, path, "xx_sent_accepted");
    if (j.contains("qber_zz_pre")) f.qber_zz_pre = get_num(j, path, "qber_zz_pre");
    if (j.contains("qber_zz_post")) f.qber_zz_post = get_num(j, path, "qber_zz_post");
    return f;
}

json tally_to_json(const sns::DetectionTally& t, const std::string& pair_label,
                   std::optional<double> loss_db) {
    json counts, sent, zz;
    for (int l = 0; l < 3; ++l)
        for (int r = 0; r < 3; ++r) {
            counts[kCellKeys[l][r]] = t.counts[l][r];
            sent[kCellKeys[l][r]] = t.sent_pairs.n[l][r];
        }
    sent["zz_oy"] = t.sent_pairs.zz_oy;
    sent["zz_yo"] = t.sent_pairs.zz_yo;
    sent["zz_oo"] = t.sent_pairs.zz_oo;
    zz["yy"] = t.zz.yy;
    zz["oy"] = t.zz.oy;
    zz["yo"] = t.zz.yo;
    zz["oo"] = t.zz.oo;

    json out;
    out["schema"] = "qnet.tally/1";
    if (!pair_label.empty()) out["pair"] = pair_label;
    if (loss_db) out["loss_db"] = *loss_db;
    out["total_pulses"] = t.total_pulses;
    out["aggregates"] = {{"counts", counts}, {"sent_pairs", sent}, {"zz", zz}};
    out["xx_accepted"] = t.xx_accepted;
    out["xx_correct"] = t.xx_correct;
    out["xx_sent_accepted"] = t.xx_sent_accepted;
    return out;
}

sns::DetectionTally ingest_tally(const TallyFile& f, const sns::ProtocolParams& params,
                                 const sim::PhaseFilter& filter) {
    if (f.aggregates) {
        sns::DetectionTally t = *f.aggregates;
        t.total_pulses = f.total_pulses;
        t.xx_accepted = f.xx_accepted;
        t.xx_correct = f.xx_correct;
        t.xx_sent_accepted = f.xx_sent_accepted
                                 ? *f.xx_sent_accepted
                                 : t.sent_pairs.n[1][1] * filter.pass_fraction();
        t.validate();
        return t;
    }

    auto d = [&](const char* key) { return f.detected.at(key); };
    sns::DetectionTally t;
    t.total_pulses = f.total_pulses;

    const double N = f.total_pulses;
    if (f.window_map == WindowMap::MergedTestWindows) {
        // Eq. A1 composition: signal-window not-send events merge into the
        // test-window vacuum statistics.
        t.sent_pairs = sns::expected_pair_counts(params, N);
        t.at(sns::Intensity::O, sns::Intensity::O) = d("XXoo") + d("ZXoo") + d("XZoo");
        t.at(sns::Intensity::O, sns::Intensity::X) = d("XXox") + d("ZXox");
        t.at(sns::Intensity::X, sns::Intensity::O) = d("XXxo") + d("XZxo");
    } else {
        // Pure test-window reading: the alternative attribution.
        const double a = params.p_o, b = params.p_x, c = params.p_y * params.eps_send;
        const double dd = params.p_y * (1.0 - params.eps_send);
        auto& n = t.sent_pairs.n;
        n[0][0] = a * a * N;
        n[0][1] = n[1][0] = a * b * N;
        n[0][2] = n[2][0] = a * c * N;
        n[1][1] = b * b * N;
        n[1][2] = n[2][1] = b * c * N;
        n[2][2] = c * c * N;
        t.sent_pairs.zz_oy = dd * c * N;
        t.sent_pairs.zz_yo = c * dd * N;
        t.sent_pairs.zz_oo = dd * dd * N;
        t.at(sns::Intensity::O, sns::Intensity::O) = d("XXoo");
        t.at(sns::Intensity::O, sns::Intensity::X) = d("XXox");
        t.at(sns::Intensity::X, sns::Intensity::O) = d("XXxo");
    }
    t.at(sns::Intensity::O, sns::Intensity::Y) = d("XZoy");
    t.at(sns::Intensity::Y, sns::Intensity::O) = d("ZXyo");
    t.at(sns::Intensity::X, sns::Intensity::X) = d("XXxx");
    t.at(sns::Intensity::X, sns::Intensity::Y) = d("XZxy");
    t.at(sns::Intensity::Y, sns::Intensity::X) = d("ZXyx");
    t.at(sns::Intensity::Y, sns::Intensity::Y) = d("ZZyy");
    t.zz.yy = d("ZZyy");
    t.zz.oy = d("ZZoy");
    t.zz.yo = d("ZZyo");
    t.zz.oo = d("ZZoo");
    t.xx_accepted = f.xx_accepted;
    t.xx_correct = f.xx_correct;
    t.xx_sent_accepted = f.xx_sent_accepted
                             ? *f.xx_sent_accepted
                             : t.sent_pairs.n[1][1] * filter.pass_fraction();
    t.validate();
    return t;
}

sns::ProtocolParams parse_params(const json& j) {
    const std::string path = "params";
    expect_object(j, path);
    expect_schema(j, path, "qnet.params/1");
    reject_unknown(j, path,
                   {"schema", "mu_o", "mu_x", "mu_y", "p_o", "p_x", "p_y", "eps_send",
                    "mu_ref"});
    sns::ProtocolParams p;
    p.mu_o = get_num_or(j, path, "mu_o", 0.0);
    p.mu_x = get_num(j, path, "mu_x");
    p.mu_y = get_num(j, path, "mu_y");
    p.p_x = get_num(j, path, "p_x");
    p.p_y = get_num(j, path, "p_y");
    p.p_o = get_num_or(j, path, "p_o", 1.0 - p.p_x - p.p_y);
    p.eps_send = get_num(j, path, "eps_send");
    p.mu_ref = get_num_or(j, path, "mu_ref", 0.0);
    try {
        p.validate();
    } catch (const std::invalid_argument& e) {
        throw ParseError(path, e.what());
    }
    return p;
}

json params_to_json(const sns::ProtocolParams& p) {
    return {{"schema", "qnet.params/1"}, {"mu_o", p.mu_o},       {"mu_x", p.mu_x},
            {"mu_y", p.mu_y},            {"p_o", p.p_o},         {"p_x", p.p_x},
            {"p_y", p.p_y},              {"eps_send", p.eps_send}, {"mu_ref", p.mu_ref}};
}

sns::SecurityParams parse_security(const json& j) {
    const std::string path = "security";
    expect_object(j, path);
    expect_schema(j, path, "qnet.security/1");
    reject_unknown(j, path,
                   {"schema", "eps_cor", "eps_pa", "eps_hat", "eps_chernoff", "f_ec"});
    sns::SecurityParams s;
    s.eps_cor = get_num_or(j, path, "eps_cor", 1e-10);
    s.eps_pa = get_num_or(j, path, "eps_pa", 1e-10);
    s.eps_hat = get_num_or(j, path, "eps_hat", 1e-10);
    s.eps_chernoff = get_num_or(j, path, "eps_chernoff", 1e-10);
    s.f_ec = get_num_or(j, path, "f_ec", 1.1);
    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        throw ParseError(path, e.what());
    }
    return s;
}

json security_to_json(const sns::SecurityParams& s) {
    return {{"schema", "qnet.security/1"}, {"eps_cor", s.eps_cor},
            {"eps_pa", s.eps_pa},          {"eps_hat", s.eps_hat},
            {"eps_chernoff", s.eps_chernoff}, {"f_ec", s.f_ec}};
}

sim::ChannelSpec parse_channel(const json& j) {
    const std::string path = "channel";
    expect_object(j, path);
    expect_schema(j, path, "qnet.channel/1");
    reject_unknown(j, path,
                   {"schema", "loss_i_db", "loss_j_db", "total_loss_db",
                    "detector_efficiency", "dark_count", "visibility",
                    "mu_excess_loss_db", "phase_noise_sigma"});
    sim::ChannelSpec ch;
    const bool has_total = j.contains("total_loss_db");
    const bool has_arms = j.contains("loss_i_db") || j.contains("loss_j_db");
    if (has_total == has_arms)
        throw ParseError(path, "need either total_loss_db or loss_i_db/loss_j_db");
    if (has_total) {
        const double total = get_num(j, path, "total_loss_db");
        ch.loss_i_db = total / 2.0;
        ch.loss_j_db = total / 2.0;
    } else {
        ch.loss_i_db = get_num(j, path, "loss_i_db");
        ch.loss_j_db = get_num(j, path, "loss_j_db");
    }
    ch.detector_efficiency = get_num_or(j, path, "detector_efficiency", 0.45);
    ch.dark_count = get_num_or(j, path, "dark_count", 8e-8);
    ch.visibility = get_num_or(j, path, "visibility", 0.9672);
    ch.mu_excess_loss_db = get_num_or(j, path, "mu_excess_loss_db", 0.0);
    ch.phase_noise_sigma = get_num_or(j, path, "phase_noise_sigma", 0.574);
    try {
        ch.validate();
    } catch (const std::invalid_argument& e) {
        throw ParseError(path, e.what());
    }
    return ch;
}

json channel_to_json(const sim::ChannelSpec& ch) {
    return {{"schema", "qnet.channel/1"},
            {"loss_i_db", ch.loss_i_db},
            {"loss_j_db", ch.loss_j_db},
            {"detector_efficiency", ch.detector_efficiency},
            {"dark_count", ch.dark_count},
            {"visibility", ch.visibility},
            {"mu_excess_loss_db", ch.mu_excess_loss_db},
            {"phase_noise_sigma", ch.phase_noise_sigma}};
}

net::MuInventory parse_inventory(const json& j) {
    const std::string path = "inventory";
    expect_object(j, path);
    expect_schema(j, path, "qnet.inventory/1");
    reject_unknown(j, path, {"schema", "switch_ports", "m2", "multi"});
    net::MuInventory inv;
    inv.switch_ports = get_int(j, path, "switch_ports");
    inv.m2 = j.contains("m2") ? get_int(j, path, "m2") : 0;
    if (j.contains("multi")) {
        if (!j["multi"].is_array()) throw ParseError(path + "/multi", "expected an array");
        int idx = 0;
        for (const json& m : j["multi"]) {
            const std::string mpath = path + "/multi[" + std::to_string(idx++) + "]";
            expect_object(m, mpath);
            reject_unknown(m, mpath, {"n", "i", "count"});
            const int n = get_int(m, mpath, "n");
            const int i = get_int(m, mpath, "i");
            const int count = m.contains("count") ? get_int(m, mpath, "count") : 1;
            if (count < 0) throw ParseError(mpath + "/count", "negative count");
            inv.multi[{n, i}] += count;
        }
    }
    return inv;
}

json inventory_to_json(const net::MuInventory& inv) {
    json multi = json::array();
    for (const auto& [key, count] : inv.multi)
        multi.push_back({{"n", key.first}, {"i", key.second}, {"count", count}});
    return {{"schema", "qnet.inventory/1"},
            {"switch_ports", inv.switch_ports},
            {"m2", inv.m2},
            {"multi", multi}};
}

RequestsFile parse_requests(const json& j) {
    const std::string path = "requests";
    expect_object(j, path);
    expect_schema(j, path, "qnet.requests/1");
    reject_unknown(j, path, {"schema", "users", "pairs"});
    RequestsFile f;
    if (!j.contains("users") || !j["users"].is_array())
        throw ParseError(path + "/users", "expected an array of user ids");
    for (const json& u : j["users"]) {
        if (!u.is_number_integer()) throw ParseError(path + "/users", "expected integers");
        f.users.push_back(u.get<int>());
    }
    if (!j.contains("pairs") || !j["pairs"].is_array())
        throw ParseError(path + "/pairs", "expected an array of [a,b] pairs");
    int idx = 0;
    for (const json& p : j["pairs"]) {
        const std::string ppath = path + "/pairs[" + std::to_string(idx++) + "]";
        if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() ||
            !p[1].is_number_integer())
            throw ParseError(ppath, "expected [a, b] with integer ids");
        f.pairs.push_back({p[0].get<int>(), p[1].get<int>()});
    }
    return f;
}

PipelineResult keyrate_pipeline(const sns::DetectionTally& tally,
                                const sns::ProtocolParams& params,
                                const sns::SecurityParams& sec, std::uint64_t seed,
                                const sns::DecoyOptions& opt, double clock_hz, double duty) {
    PipelineResult out;
    if (tally.zz.total() >= 2.0) {
        const sim::RawKeyPair raw = sim::synthesize_raw_key(tally.zz, seed);
        out.aopp_bits = sim::aopp_bitlevel(raw, seed ^ 0x9e3779b97f4a7c15ull);
    }
    out.report = sns::key_rate_from_tally(tally, params, sec, out.aopp_bits.measured(), opt,
                                          clock_hz, duty);
    return out;
}

json decision_ledger() {
    return {
        {"D1", "Eq. A1 completed with product-form sent counts for xx/xy/yx/yy"},
        {"D2", "Chernoff: phiU=x+b/2+sqrt(2bx+b^2/4), phiL=x-sqrt(2bx), "
               "EU=k+b+sqrt(2bk+b^2), EL=k-sqrt(2bk), b=ln(1/eps)"},
        {"D3", "bound directions: added yields lower, subtracted yields upper; strict mode "
               "also bounds T_x (upper) and A7's S_oo (lower); paper mode keeps those two "
               "as point estimates"},
        {"D4", "N_x = N px^2 * filter pass fraction in expected mode; counted directly in "
               "Monte-Carlo"},
        {"D5", "no closed-form AOPP survival model; bit-level AOPP or measured data only"},
        {"D6", "yields clamped to [0,1], counts to >=0; clamps recorded"},
        {"D7", "bit/s = R * clock * duty; defaults 1e8 Hz, 400/1024"},
        {"D8", "clicks: p_d = 1-(1-dark)exp(-(nu_i+nu_j+-2V sqrt(nu_i nu_j)cos d)/2); "
               "accepted outcome = exactly one detector"},
        {"D9", "phi_ij compensated to 0; residual tracking noise via phase_noise_sigma"},
        {"D10", "AOPP: random grouping for n_odd; active 1-0 pairing, survivors need odd "
                "parity on user-i's side"},
        {"D11", "expected-mode AOPP from a proportional sub-sampled raw key (>=1e6 bits or "
                "n_t), scaled back"},
        {"D12", "MU excess loss per arm = 10log10(ports) + 1 dB splitter excess + 1 dB "
                "routing"},
        {"D13", "Detected-ijab labels aggregate per Eq. A1's composition (window map "
                "configurable: merged_test_windows|test_only)"},
        {"D14", "port constraint inclusive (<= N) with a warning at equality; strict mode "
                "optional"},
        {"D15", "per-MU pairs capped at C(n,2) distinct pairs"},
        {"D16", "scheduling exact (subset DP) for <=12 users, greedy largest-MU-first "
                "beyond; lexicographic tie-breaks"},
        {"D17", "optimizer: coarse grid + cyclic coordinate descent, halving steps, "
                "rel tol 1e-3, Table 1 warm starts"},
        {"D18", "JSON formats with schema tags; CSV for sweeps"},
        {"D19", "reports embed this decision set"},
    };
}

json report_to_json(const sns::KeyRateReport& rep) {
    const auto& d = rep.decoy;
    const auto& a = rep.aopp;
    json out;
    out["schema"] = "qnet.report/1";
    out["rate_per_pulse"] = rep.rate_per_pulse;
    out["rate_bps"] = rep.rate_bps;
    out["feasible"] = rep.feasible;
    out["clock_hz"] = rep.clock_hz;
    out["duty"] = rep.duty;
    out["decoy"] = {
        {"s01_lower", d.s01_lower},
        {"s10_lower", d.s10_lower},
        {"s1_lower", d.s1_lower},
        {"n10_lower", d.n10_lower},
        {"n01_lower", d.n01_lower},
        {"t_x", d.t_x},
        {"e1ph_upper", d.e1ph_upper},
        {"e1ph_upper_alt_norm", d.e1ph_upper_alt_norm},
        {"status", d.status == sns::BoundStatus::Ok
                       ? "ok"
                       : d.status == sns::BoundStatus::InfeasibleBounds
                             ? "infeasible_bounds"
                             : "degenerate_denominator"},
        {"clamped", d.clamped},
        {"estimation", d.estimation == sns::Estimation::Strict ? "strict" : "paper"},
        {"tx_normalization",
         d.tx_norm == sns::TxNormalization::SentFiltered ? "sent_filtered"
                                                         : "detected_filtered"},
    };
    out["aopp"] = {
        {"u", a.u},           {"n_g", a.n_g},
        {"n_odd", a.n_odd},   {"n_t", a.n_t},
        {"n_t_prime", a.n_t_prime}, {"e_prime", a.e_prime},
        {"n1", a.n1},         {"n10", a.n10},
        {"n01", a.n01},       {"n1r", a.n1r},
        {"n10_prime", a.n10_prime}, {"n01_prime", a.n01_prime},
        {"n_min", a.n_min},   {"n1_prime", a.n1_prime},
        {"r", a.r},           {"e_tau", a.e_tau},
        {"m_s_upper", a.m_s_upper}, {"e1ph_prime", a.e1ph_prime},
        {"feasible", a.feasible},   {"guard", a.guard},
    };
    out["decisions"] = decision_ledger();
    return out;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "loss_db,km,R_per_pulse,R_bps,e1ph,n1_prime,feasible\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.6g,%.6g,%.9g,%.9g,%.9g,%.9g,%d\n", r.loss_db,
                      r.km, r.rate_per_pulse, r.rate_bps, r.e1ph, r.n1_prime,
                      r.feasible ? 1 : 0);
        out += buf;
    }
    return out;
}

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, "cannot open file");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path + ":" + std::to_string(e.byte), e.what());
    }
}

void save_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw ParseError(path, "cannot open file for writing");
    out << j.dump(2) << "\n";
}

}  // namespace qnet::io
