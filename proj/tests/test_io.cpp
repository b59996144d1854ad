#include <doctest.h>

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <qnet/io.hpp>
#include <qnet/net.hpp>
#include <qnet/sim.hpp>
#include <qnet/sns.hpp>

using namespace qnet;
using doctest::Approx;
using nlohmann::json;

namespace {

std::string data_path(const std::string& name) {
    return std::string(QNET_DATA_DIR) + "/" + name;
}

json toy_detected_tally(const std::string& window_map) {
    return json{
        {"schema", "qnet.tally/1"},
        {"total_pulses", 1e6},
        {"pair", "toy"},
        {"window_map", window_map},
        {"detected",
         {{"ZZyy", 3.0},  {"ZZoy", 40.0}, {"ZZyo", 50.0}, {"ZZoo", 2.0},
          {"ZXyx", 7.0},  {"ZXox", 11.0}, {"ZXyo", 13.0}, {"ZXoo", 5.0},
          {"XZxy", 8.0},  {"XZoy", 12.0}, {"XZxo", 9.0},  {"XZoo", 6.0},
          {"XXxx", 20.0}, {"XXox", 15.0}, {"XXxo", 14.0}, {"XXoo", 4.0}}},
        {"xx_accepted", 2.0},
        {"xx_correct", 1.0},
    };
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("params round trip") {
    const sns::ProtocolParams p = sns::table1_20db();
    const sns::ProtocolParams q = io::parse_params(io::params_to_json(p));
    CHECK(q.mu_o == p.mu_o);
    CHECK(q.mu_x == p.mu_x);
    CHECK(q.mu_y == p.mu_y);
    CHECK(q.p_o == p.p_o);
    CHECK(q.p_x == p.p_x);
    CHECK(q.p_y == p.p_y);
    CHECK(q.eps_send == p.eps_send);
    CHECK(q.mu_ref == p.mu_ref);

    // The shipped operating points match Table 1.
    const sns::ProtocolParams d20 = io::parse_params(io::load_json(data_path("params_20db.json")));
    CHECK(d20.mu_y == 0.44);
    CHECK(d20.p_x == 0.23);
    const sns::ProtocolParams d30 = io::parse_params(io::load_json(data_path("params_30db.json")));
    CHECK(d30.mu_y == 0.43);
    CHECK(d30.p_x == 0.36);
}

TEST_CASE("security and channel round trips") {
    sns::SecurityParams s;
    s.eps_pa = 2e-10;
    s.f_ec = 1.16;
    const sns::SecurityParams t = io::parse_security(io::security_to_json(s));
    CHECK(t.eps_cor == s.eps_cor);
    CHECK(t.eps_pa == s.eps_pa);
    CHECK(t.eps_hat == s.eps_hat);
    CHECK(t.eps_chernoff == s.eps_chernoff);
    CHECK(t.f_ec == s.f_ec);

    const sim::ChannelSpec ch = sim::calibrated_channel(20.0, sim::mu_excess_loss_db(2));
    const sim::ChannelSpec rt = io::parse_channel(io::channel_to_json(ch));
    CHECK(rt.loss_i_db == ch.loss_i_db);
    CHECK(rt.loss_j_db == ch.loss_j_db);
    CHECK(rt.detector_efficiency == ch.detector_efficiency);
    CHECK(rt.dark_count == ch.dark_count);
    CHECK(rt.visibility == ch.visibility);
    CHECK(rt.mu_excess_loss_db == ch.mu_excess_loss_db);
    CHECK(rt.phase_noise_sigma == ch.phase_noise_sigma);

    // total_loss_db with calibrated defaults splits evenly across the arms.
    const sim::ChannelSpec half =
        io::parse_channel(json{{"schema", "qnet.channel/1"}, {"total_loss_db", 20.0}});
    CHECK(half.loss_i_db == 10.0);
    CHECK(half.loss_j_db == 10.0);
    CHECK(half.detector_efficiency == 0.45);
    CHECK(half.dark_count == 8e-8);
    CHECK(half.visibility == 0.9672);
    CHECK(half.phase_noise_sigma == 0.574);

    // Specifying both forms is ambiguous.
    CHECK_THROWS_AS(io::parse_channel(json{{"schema", "qnet.channel/1"},
                                           {"total_loss_db", 20.0},
                                           {"loss_i_db", 10.0}}),
                    io::ParseError);
}

TEST_CASE("inventory round trip and requests file") {
    const net::MuInventory inv = net::MuInventory::figure4b();
    const net::MuInventory rt = io::parse_inventory(io::inventory_to_json(inv));
    CHECK(rt.m2 == inv.m2);
    CHECK(rt.switch_ports == inv.switch_ports);
    CHECK(rt.multi == inv.multi);

    const io::RequestsFile req = io::parse_requests(io::load_json(data_path("requests_demo.json")));
    CHECK(req.users == std::vector<int>{1, 2, 3, 4, 5, 6});
    REQUIRE(req.pairs.size() == 4);
    CHECK(req.pairs[0].a == 1);
    CHECK(req.pairs[0].b == 2);
    CHECK(req.pairs[3].a == 1);
    CHECK(req.pairs[3].b == 3);
}

TEST_CASE("simulator tally emission re-ingests identically") {
    const sns::ProtocolParams params = sns::table1_20db();
    const sim::ChannelSpec ch = sim::calibrated_channel(20.0);
    const sim::PhaseFilter filter;
    const sns::DetectionTally t = sim::expected_tally(params, ch, filter, 1e8);

    const json j = io::tally_to_json(t, "1-2", 20.0);
    const io::TallyFile f = io::parse_tally(j);
    CHECK(f.pair_label == "1-2");
    CHECK(f.loss_db == 20.0);
    REQUIRE(f.aggregates.has_value());

    const sns::DetectionTally rt = io::ingest_tally(f, params, filter);
    CHECK(rt.total_pulses == t.total_pulses);
    for (int l = 0; l < 3; ++l)
        for (int r = 0; r < 3; ++r) {
            CHECK(rt.counts[l][r] == t.counts[l][r]);
            CHECK(rt.sent_pairs.n[l][r] == t.sent_pairs.n[l][r]);
        }
    CHECK(rt.zz.yy == t.zz.yy);
    CHECK(rt.zz.oy == t.zz.oy);
    CHECK(rt.zz.yo == t.zz.yo);
    CHECK(rt.zz.oo == t.zz.oo);
    CHECK(rt.sent_pairs.zz_oy == t.sent_pairs.zz_oy);
    CHECK(rt.xx_accepted == t.xx_accepted);
    CHECK(rt.xx_correct == t.xx_correct);
    CHECK(rt.xx_sent_accepted == t.xx_sent_accepted);
}

TEST_CASE("window maps aggregate the detected categories differently") {
    const sns::ProtocolParams params = sns::table1_20db();
    const sim::PhaseFilter filter;

    const io::TallyFile merged = io::parse_tally(toy_detected_tally("merged_test_windows"));
    CHECK(merged.window_map == io::WindowMap::MergedTestWindows);
    const sns::DetectionTally tm = io::ingest_tally(merged, params, filter);
    CHECK(tm.counts[0][0] == 4.0 + 5.0 + 6.0);   // XXoo + ZXoo + XZoo
    CHECK(tm.counts[0][1] == 15.0 + 11.0);       // XXox + ZXox
    CHECK(tm.counts[1][0] == 14.0 + 9.0);        // XXxo + XZxo
    CHECK(tm.counts[0][2] == 12.0);              // XZoy
    CHECK(tm.counts[2][0] == 13.0);              // ZXyo
    CHECK(tm.counts[1][1] == 20.0);
    CHECK(tm.counts[1][2] == 8.0);
    CHECK(tm.counts[2][1] == 7.0);
    CHECK(tm.counts[2][2] == 3.0);
    CHECK(tm.zz.oy == 40.0);
    CHECK(tm.zz.oo == 2.0);
    // Merged denominators follow the full Eq. A1 composition.
    const sns::SentPairCounts ref = sns::expected_pair_counts(params, 1e6);
    CHECK(tm.sent_pairs.n[0][0] == Approx(ref.n[0][0]).epsilon(1e-12));
    // N_x falls back to the D4 filter fraction.
    CHECK(tm.xx_sent_accepted == Approx(ref.n[1][1] * filter.pass_fraction()).epsilon(1e-12));

    const io::TallyFile pure = io::parse_tally(toy_detected_tally("test_only"));
    const sns::DetectionTally tp = io::ingest_tally(pure, params, filter);
    CHECK(tp.counts[0][0] == 4.0);   // XXoo only
    CHECK(tp.counts[0][1] == 15.0);
    CHECK(tp.counts[1][0] == 14.0);
    // Pure product-form denominators: a^2 N, ab N, ...
    const double a = params.p_o, b = params.p_x, c = params.p_y * params.eps_send;
    const double d = params.p_y * (1.0 - params.eps_send);
    CHECK(tp.sent_pairs.n[0][0] == Approx(a * a * 1e6).epsilon(1e-12));
    CHECK(tp.sent_pairs.n[0][1] == Approx(a * b * 1e6).epsilon(1e-12));
    CHECK(tp.sent_pairs.n[0][2] == Approx(a * c * 1e6).epsilon(1e-12));
    CHECK(tp.sent_pairs.zz_oo == Approx(d * d * 1e6).epsilon(1e-12));
}

TEST_CASE("parse errors carry the offending path") {
    json p = io::params_to_json(sns::table1_20db());
    p["bogus"] = 1.0;
    try {
        io::parse_params(p);
        FAIL("expected ParseError");
    } catch (const io::ParseError& e) {
        CHECK(e.path == "params/bogus");
        CHECK(std::string(e.what()).find("unknown") != std::string::npos);
    }

    json wrong_schema = io::params_to_json(sns::table1_20db());
    wrong_schema["schema"] = "qnet.params/9";
    CHECK_THROWS_AS(io::parse_params(wrong_schema), io::ParseError);

    json no_schema = io::params_to_json(sns::table1_20db());
    no_schema.erase("schema");
    CHECK_THROWS_AS(io::parse_params(no_schema), io::ParseError);

    // A tally must use exactly one representation.
    json both = toy_detected_tally("merged_test_windows");
    both["aggregates"] = json::object();
    CHECK_THROWS_AS(io::parse_tally(both), io::ParseError);
    json neither = toy_detected_tally("merged_test_windows");
    neither.erase("detected");
    CHECK_THROWS_AS(io::parse_tally(neither), io::ParseError);
    json bad_map = toy_detected_tally("sideways");
    CHECK_THROWS_AS(io::parse_tally(bad_map), io::ParseError);
}

TEST_CASE("keyrate pipeline reproduces the published 20 dB rate") {
    const json tj = io::load_json(data_path("tally_1-2_20db.json"));
    const sns::ProtocolParams params =
        io::parse_params(io::load_json(data_path("params_20db.json")));
    const sns::SecurityParams sec =
        io::parse_security(io::load_json(data_path("security_default.json")));

    const sns::DetectionTally tally =
        io::ingest_tally(io::parse_tally(tj), params, sim::PhaseFilter{});

    sns::DecoyOptions paper;
    paper.estimation = sns::Estimation::Paper;
    const io::PipelineResult res = io::keyrate_pipeline(tally, params, sec, 8, paper);
    CHECK(res.report.feasible);
    CHECK(res.aopp_bits.n_t == tally.zz.total());
    // Expectation-value chain gives 1.3431e-5; the bit-level AOPP realization
    // scatters by about a percent around it.
    CHECK(res.report.rate_per_pulse == Approx(1.343054e-5).epsilon(0.03));
}

TEST_CASE("report json embeds the decision ledger") {
    sns::KeyRateReport rep;
    rep.rate_per_pulse = 1e-5;
    rep.feasible = true;
    const json j = io::report_to_json(rep);
    CHECK(j["schema"] == "qnet.report/1");
    CHECK(j["rate_per_pulse"] == 1e-5);
    CHECK(j["decoy"]["estimation"] == "strict");
    CHECK(j["decoy"]["tx_normalization"] == "sent_filtered");
    CHECK(j["aopp"]["guard"] == "");
    REQUIRE(j["decisions"].is_object());
    CHECK(j["decisions"].size() == 19);
    CHECK(j["decisions"].contains("D1"));
    CHECK(j["decisions"].contains("D19"));
}

TEST_CASE("sweep csv format is stable") {
    std::vector<io::SweepRow> rows;
    rows.push_back({30.0, 150.0, 0.5, 2.0, 0.25, 1000.0, true});
    rows.push_back({40.0, 200.0, 0.0, 0.0, 1.0, 0.0, false});
    CHECK(io::sweep_csv(rows) ==
          "loss_db,km,R_per_pulse,R_bps,e1ph,n1_prime,feasible\n"
          "30,150,0.5,2,0.25,1000,1\n"
          "40,200,0,0,1,0,0\n");
}

TEST_CASE("load_json reports file problems as parse errors") {
    CHECK_THROWS_AS(io::load_json("/nonexistent/definitely_missing.json"), io::ParseError);

    const std::string bad = "/tmp/qnet_io_test_malformed.json";
    std::ofstream(bad) << "{ not json";
    CHECK_THROWS_AS(io::load_json(bad), io::ParseError);
}

TEST_CASE("all shipped data files parse cleanly") {
    for (const char* name : {"tally_1-2_20db.json", "tally_1-3_20db.json",
                             "tally_2-3_20db.json", "tally_1-2_30db.json",
                             "tally_1-3_30db.json", "tally_2-3_30db.json"}) {
        CAPTURE(name);
        CHECK_NOTHROW(io::parse_tally(io::load_json(data_path(name))));
    }
    CHECK_NOTHROW(io::parse_params(io::load_json(data_path("params_20db.json"))));
    CHECK_NOTHROW(io::parse_params(io::load_json(data_path("params_30db.json"))));
    CHECK_NOTHROW(io::parse_security(io::load_json(data_path("security_default.json"))));
    CHECK_NOTHROW(io::parse_channel(io::load_json(data_path("channel_20db.json"))));
    CHECK_NOTHROW(io::parse_channel(io::load_json(data_path("channel_30db.json"))));
    CHECK_NOTHROW(io::parse_inventory(io::load_json(data_path("inventory_fig4b.json"))));
    CHECK_NOTHROW(io::parse_requests(io::load_json(data_path("requests_demo.json"))));
}

}  // TEST_SUITE
