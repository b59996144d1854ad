#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qnet/net.hpp"
#include "qnet/sim.hpp"
#include "qnet/sns.hpp"

namespace qnet::io {

// Malformed input: carries a JSON-pointer-style path to the offending field.
struct ParseError : std::runtime_error {
    std::string path;
    ParseError(const std::string& where, const std::string& msg)
        : std::runtime_error(where + ": " + msg), path(where) {}
};

// Table-2-style window attribution for X-labeled windows holding vacuum
// intensity (photon-sim open question): merge them into the decoy-window
// estimators per Eq. A1's composition, or keep pure test-window pairs only.
enum class WindowMap { MergedTestWindows, TestOnly };

// qnet.tally/1. Either the 16 per-window detected categories (Table 2 rows)
// or the pre-aggregated view emitted by the simulator.
struct TallyFile {
    double total_pulses = 0.0;
    std::string pair_label;
    std::optional<double> loss_db;
    WindowMap window_map = WindowMap::MergedTestWindows;
    // Detected-ijab categories, keyed "ZZyy", "ZXox", ... (present iff the
    // file uses the Table-2 representation).
    std::map<std::string, double> detected;
    // Aggregate representation (simulator emission).
    std::optional<sns::DetectionTally> aggregates;
    double xx_accepted = 0.0;
    double xx_correct = 0.0;
    std::optional<double> xx_sent_accepted;  // computed via D4 when absent
    std::optional<double> qber_zz_pre;
    std::optional<double> qber_zz_post;
};

TallyFile parse_tally(const nlohmann::json& j);
nlohmann::json tally_to_json(const sns::DetectionTally& tally, const std::string& pair_label,
                             std::optional<double> loss_db);

// Builds the estimator-ready tally: aggregates the detected categories per
// the window map, fills sent-pair denominators from Eq. A1 (respecting the
// window map) and N_x from the D4 filter fraction when not recorded.
sns::DetectionTally ingest_tally(const TallyFile& file, const sns::ProtocolParams& params,
                                 const sim::PhaseFilter& filter);

sns::ProtocolParams parse_params(const nlohmann::json& j);
nlohmann::json params_to_json(const sns::ProtocolParams& p);

sns::SecurityParams parse_security(const nlohmann::json& j);
nlohmann::json security_to_json(const sns::SecurityParams& s);

sim::ChannelSpec parse_channel(const nlohmann::json& j);
nlohmann::json channel_to_json(const sim::ChannelSpec& ch);

net::MuInventory parse_inventory(const nlohmann::json& j);
nlohmann::json inventory_to_json(const net::MuInventory& inv);

struct RequestsFile {
    std::vector<int> users;
    std::vector<net::PairRequest> pairs;
};
RequestsFile parse_requests(const nlohmann::json& j);

// Full tally -> key pipeline as the CLI and golden tests run it: synthesize
// a raw key from the signal-signal counts, run bit-level AOPP, then the
// Appendix-A chain.
struct PipelineResult {
    sns::KeyRateReport report;
    sim::AoppBitResult aopp_bits;
};
PipelineResult keyrate_pipeline(const sns::DetectionTally& tally,
                                const sns::ProtocolParams& params,
                                const sns::SecurityParams& sec, std::uint64_t seed,
                                const sns::DecoyOptions& opt = {}, double clock_hz = 1e8,
                                double duty = 400.0 / 1024.0);

// D19: every emitted report embeds the ledger-decision set in effect.
nlohmann::json decision_ledger();

nlohmann::json report_to_json(const sns::KeyRateReport& rep);

struct SweepRow {
    double loss_db = 0.0;
    double km = 0.0;
    double rate_per_pulse = 0.0;
    double rate_bps = 0.0;
    double e1ph = 1.0;  // post-AOPP phase error
    double n1_prime = 0.0;
    bool feasible = false;
};
std::string sweep_csv(const std::vector<SweepRow>& rows);

// File helpers (throw ParseError with the file path on I/O or JSON errors).
nlohmann::json load_json(const std::string& path);
void save_json(const std::string& path, const nlohmann::json& j);

}  // namespace qnet::io
