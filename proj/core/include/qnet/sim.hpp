#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "qnet/sns.hpp"

namespace qnet::sim {

// Physical channel between one user pair and the measurement unit.
struct ChannelSpec {
    double loss_i_db = 0.0;  // fiber loss, user i's arm
    double loss_j_db = 0.0;
    double detector_efficiency = 1.0;
    double dark_count = 0.0;          // per pulse per detector
    double visibility = 1.0;          // first-order interference visibility
    double mu_excess_loss_db = 0.0;   // splitter excess + routing, per arm (D12)
    double phase_noise_sigma = 0.0;   // residual phase-tracking noise, rad (D9)

    double arm_transmittance_i() const;
    double arm_transmittance_j() const;
    void validate() const;
};

// Channel with the detector/interference defaults calibrated against the
// published per-category detection statistics: 45% efficiency, 8e-8 dark
// rate, V = 0.9672 with 0.574 rad residual phase noise.
ChannelSpec calibrated_channel(double total_loss_db, double excess_per_arm_db = 0.0);

// Per-arm excess loss of an n-port measurement unit: 1xN splitter plus fixed
// splitter-excess and routing allowances of 1 dB each (D12).
double mu_excess_loss_db(int ports_per_user);

// Eq. 2's post-selection on announced decoy phases, on a discrete modulation
// grid: pass iff 1 - |cos(theta_i - theta_j - phi)| <= lambda.
struct PhaseFilter {
    int slices = 16;

    double lambda() const;     // 1 - cos(pi/slices), Eq. A3's small threshold
    double threshold() const;  // cos(pi/slices)
    bool passes(double theta_i, double theta_j, double phi_ij) const;
    bool passes_slices(int slice_i, int slice_j) const;  // phi_ij = 0
    double pass_fraction() const;  // exact enumeration of the slices^2 grid
    void validate() const;
};

struct FrameSpec {
    int signal = 400;
    int reference = 600;
    int vacuum = 24;
    double clock_hz = 1e8;

    int frame_length() const { return signal + reference + vacuum; }
    double duty() const { return double(signal) / frame_length(); }
    void validate() const;
};

// Raw key accumulated over detected signal-signal events. i encodes
// send->1 / not-send->0, j encodes send->0 / not-send->1, so a correct
// event has equal bits.
struct RawKeyPair {
    std::vector<uint8_t> bits_i;
    std::vector<uint8_t> bits_j;

    std::size_t n_t() const { return bits_i.size(); }
    std::size_t error_count() const;
};

// Marginal detector click probabilities for coherent pulses with mean photon
// numbers mu_i/mu_j entering the interference BS with phase difference delta
// (D8). The two output-port photocounts are independent, so joint outcomes
// factorize.
std::pair<double, double> click_probabilities(double mu_i, double mu_j, double delta,
                                              const ChannelSpec& ch);

// P(exactly one detector clicks), the protocol's accepted outcome.
double single_click_probability(double mu_i, double mu_j, double delta,
                                const ChannelSpec& ch);

sns::DetectionTally expected_tally(const sns::ProtocolParams& params, const ChannelSpec& ch,
                                   const PhaseFilter& filter, double N);

struct SessionResult {
    RawKeyPair raw;
    sns::DetectionTally tally;
};

// Per-pulse-pair Monte-Carlo realization of the protocol. Deterministic for
// a given seed. Memory is O(detected raw key), not O(N).
SessionResult monte_carlo_session(const sns::ProtocolParams& params, const ChannelSpec& ch,
                                  const PhaseFilter& filter, double N, std::uint64_t seed);

struct AoppBitResult {
    double n_t = 0.0;
    double n_g = 0.0;
    double n_odd = 0.0;
    double n_t_prime = 0.0;
    double e_prime = 0.0;

    sns::AoppMeasured measured() const { return {n_t, n_g, n_odd, n_t_prime, e_prime}; }
};

// Actively-odd-parity pairing at the bit level (D10): random grouping on
// user-j's string yields n_odd; active 1-with-0 pairing forms n_g pairs of
// which those with odd parity on user-i's side survive.
AoppBitResult aopp_bitlevel(const RawKeyPair& raw, std::uint64_t seed);

// Builds a shuffled raw key realizing the given signal-signal category
// counts (used to reconstruct post-AOPP statistics from tabulated data).
RawKeyPair synthesize_raw_key(const sns::ZZCounts& zz, std::uint64_t seed);

enum class SimMode { Expected, MonteCarlo };

struct SimulateOptions {
    SimMode mode = SimMode::Expected;
    std::uint64_t seed = 1;
    sns::DecoyOptions decoy;
    double clock_hz = 1e8;
    double duty = 400.0 / 1024.0;
    // D11: expected mode reconstructs AOPP survival from a proportional
    // sub-sampled raw key of at least this many bits (or n_t if smaller).
    double aopp_sample_bits = 1e6;
};

struct SimulateResult {
    sns::KeyRateReport report;
    sns::DetectionTally tally;
    AoppBitResult aopp_bits;  // post-scaling in expected mode
};

SimulateResult simulate_keyrate(const sns::ProtocolParams& params, const ChannelSpec& ch,
                                const PhaseFilter& filter, double N,
                                const sns::SecurityParams& sec,
                                const SimulateOptions& opt = {});

// --- Photon-number-resolved model -----------------------------------------
//
// Ground truth for decoy-bound soundness checks: the same channel model,
// decomposed by source photon number. One-sided single-photon yields are
// interference-free; the xx single-photon component is the coherent
// |01>+|10> superposition whose wrong-detector rate defines the phase-error
// proxy. Valid for symmetric arms (the soundness criterion's setting).
struct PhotonTruth {
    double y01 = 0.0;       // yield of the (0,1) source Fock class
    double y10 = 0.0;
    double s1 = 0.0;        // (y01 + y10) / 2
    double e1ph = 0.0;      // accepted-xx wrong-detector rate, n_tot = 1
};

PhotonTruth photon_resolved_truth(const ChannelSpec& ch);

// Samples a detection tally by binomial draws per (category, photon-number
// class), consistent in expectation with expected_tally.
sns::DetectionTally photon_resolved_tally(const sns::ProtocolParams& params,
                                          const ChannelSpec& ch, const PhaseFilter& filter,
                                          double N, std::uint64_t seed);

}  // namespace qnet::sim
