#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

namespace qnet::sns {

// Source intensity index used throughout: o = vacuum, x = decoy, y = signal.
enum class Intensity : int { O = 0, X = 1, Y = 2 };

inline constexpr int kNumIntensities = 3;

// Three-intensity SNS protocol parameters (Table 1 symbols).
struct ProtocolParams {
    double mu_o = 0.0;      // vacuum-source mean photon number (imperfect extinction)
    double mu_x = 0.1;      // decoy intensity
    double mu_y = 0.5;      // signal intensity
    double p_o = 0.0;       // vacuum-window probability
    double p_x = 0.0;       // decoy-window probability
    double p_y = 0.0;       // signal-window probability
    double eps_send = 0.5;  // P(send mu_y | signal window)
    double mu_ref = 0.0;    // reference-pulse intensity, carried for simulation only

    // Throws std::invalid_argument describing the first violated invariant.
    void validate() const;
};

// Table 1 operating points, used by tests and as optimizer warm starts.
ProtocolParams table1_20db();
ProtocolParams table1_30db();

struct SecurityParams {
    double eps_cor = 1e-10;
    double eps_pa = 1e-10;
    double eps_hat = 1e-10;
    double eps_chernoff = 1e-10;
    double f_ec = 1.1;

    void validate() const;
};

// Where finite-size estimation is applied in the A4/A7 chain.
//
// Paper:  Chernoff expectation bounds exactly where Appendix A typesets a
//         bound mark (A4's S_ox/S_xo lower, S_oy/S_yo/S_oo upper); T_x and
//         the S_oo term of A7 stay point estimates. Reproduces Table 2.
// Strict: additionally T_x -> upper bound and A7's S_oo -> lower bound
//         (worst case everywhere, ledger D3). Default.
enum class Estimation { Strict, Paper };

// T_x denominator convention (sns-core open question / D4): the number of
// xx pairings passing the phase filter counted over sent pairs (default) or
// over detected events.
enum class TxNormalization { SentFiltered, DetectedFiltered };

// Eq. A1 sent-pairing counts plus the D1 product-form completion.
// n[l][r] are the announced categories (both users outside a shared signal
// window); the three zz_* fields are the signal-signal pairings that form
// the raw key and are never announced (zz_yy lives in n[Y][Y]).
struct SentPairCounts {
    double n[kNumIntensities][kNumIntensities] = {};
    double zz_oy = 0.0;  // i not-send, j send
    double zz_yo = 0.0;
    double zz_oo = 0.0;  // both not-send

    double at(Intensity l, Intensity r) const { return n[int(l)][int(r)]; }
};

SentPairCounts expected_pair_counts(const ProtocolParams& params, double N);

// Signal-signal detection split: the raw-key events.
struct ZZCounts {
    double yy = 0.0;  // both sent: bit error
    double oy = 0.0;  // i vacuum, j sent: correct
    double yo = 0.0;
    double oo = 0.0;  // neither sent: bit error
    double total() const { return yy + oy + yo + oo; }
};

// Detection statistics in the aggregated (intensity_i, intensity_j) view the
// Appendix-A estimators consume. Counts are real-valued so expected-value
// tallies can be represented exactly; Monte-Carlo fills integers.
struct DetectionTally {
    double total_pulses = 0.0;  // N
    double counts[kNumIntensities][kNumIntensities] = {};  // announced n_lr
    SentPairCounts sent_pairs;                             // N_lr
    ZZCounts zz;                                           // raw-key split
    double xx_accepted = 0.0;     // decoy xx detections passing the filter
    double xx_correct = 0.0;      // accepted xx that hit the expected detector
    double xx_sent_accepted = 0;  // N_x: sent xx pairings passing the filter

    double at(Intensity l, Intensity r) const { return counts[int(l)][int(r)]; }
    double& at(Intensity l, Intensity r) { return counts[int(l)][int(r)]; }

    void validate() const;  // throws std::invalid_argument
};

// Outcome of decoy_bounds. `status` distinguishes a legitimate zero-key
// signal (InfeasibleBounds) from a degenerate input; it is not an exception
// because infeasibility is an expected result of finite statistics.
enum class BoundStatus { Ok, InfeasibleBounds, DegenerateDenominator };

struct DecoyBounds {
    double s01_lower = 0.0;
    double s10_lower = 0.0;
    double s1_lower = 0.0;
    double n10_lower = 0.0;   // expected untagged-bit counts (Eq. A6)
    double n01_lower = 0.0;
    double e1ph_upper = 1.0;  // clamped to [0,1]; >=0.5 is flagged infeasible
    double t_x = 0.0;         // m_x / N_x under the chosen normalization
    BoundStatus status = BoundStatus::Ok;
    bool clamped = false;     // any intermediate pushed back into range (D6)
    Estimation estimation = Estimation::Strict;
    TxNormalization tx_norm = TxNormalization::SentFiltered;
    // The alternative-normalization phase error, reported per the open
    // question on Eq. A7 (both modes always visible).
    double e1ph_upper_alt_norm = 1.0;

    bool feasible() const { return status == BoundStatus::Ok; }
};

struct DecoyOptions {
    Estimation estimation = Estimation::Strict;
    TxNormalization tx_norm = TxNormalization::SentFiltered;
};

DecoyBounds decoy_bounds(const DetectionTally& tally, const ProtocolParams& params,
                         const SecurityParams& sec, const DecoyOptions& opt = {});

// Measured post-selection statistics fed into Eq. A8: from bit-level AOPP on
// a simulated/synthesized raw key, or ingested from an experiment record.
struct AoppMeasured {
    double n_t = 0.0;      // raw key length before AOPP
    double n_g = 0.0;      // surviving pairs after active pairing
    double n_odd = 0.0;    // odd-parity pairs under random grouping
    double n_t_prime = 0;  // key length after AOPP
    double e_prime = 0.0;  // bit error rate after AOPP
};

struct AoppEstimate {
    double u = 0.0;
    double n_g = 0.0;
    double n_odd = 0.0;
    double n_t = 0.0;
    double n_t_prime = 0.0;
    double e_prime = 0.0;
    double n1 = 0.0;          // n10 + n01 (realized)
    double n10 = 0.0;
    double n01 = 0.0;
    double n1r = 0.0;
    double n10_prime = 0.0;
    double n01_prime = 0.0;
    double n_min = 0.0;
    double n1_prime = 0.0;
    double r = 0.0;
    double e_tau = 0.0;
    double m_s_upper = 0.0;
    double e1ph_prime = 1.0;
    bool feasible = false;
    // Violated A8/A9 guard when infeasible, e.g. "n1r<=0", "2n1r<=r".
    std::string guard;
};

AoppEstimate aopp_estimate(const DecoyBounds& decoy, const AoppMeasured& measured,
                           const SecurityParams& sec);

struct KeyRateReport {
    double rate_per_pulse = 0.0;
    double rate_bps = 0.0;
    DecoyBounds decoy;
    AoppEstimate aopp;
    bool feasible = false;
    double clock_hz = 1e8;
    double duty = 400.0 / 1024.0;
};

// Eq. 3 / A10. Negative rates are clamped to 0 with feasible=false.
KeyRateReport key_rate(const AoppEstimate& aopp, double N, const SecurityParams& sec,
                       double clock_hz = 1e8, double duty = 400.0 / 1024.0);

// Convenience composition: decoy_bounds + aopp_estimate + key_rate.
KeyRateReport key_rate_from_tally(const DetectionTally& tally, const ProtocolParams& params,
                                  const SecurityParams& sec, const AoppMeasured& measured,
                                  const DecoyOptions& opt = {}, double clock_hz = 1e8,
                                  double duty = 400.0 / 1024.0);

double shannon_entropy(double x);  // h(x), domain error outside [0,1]

double bits_per_second(double rate_per_pulse, double clock_hz, double signal_duty);

}  // namespace qnet::sns
