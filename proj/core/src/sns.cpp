#include "qnet/sns.hpp"

#include <cmath>
#include <stdexcept>

#include "qnet/chernoff.hpp"

namespace qnet::sns {

namespace {

constexpr double kProbSumTol = 1e-12;

void check(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

// Yield estimate from a (count, sent-pairs) cell. Cells with no sent pairs
// carry no information: 0 for a lower bound, 1 for an upper bound.
double yield_lower(double n, double sent, double eps) {
    if (sent <= 0.0) return 0.0;
    return chernoff_expected_lower(n, eps) / sent;
}

double yield_upper(double n, double sent, double eps) {
    if (sent <= 0.0) return 1.0;
    return chernoff_expected_upper(n, eps) / sent;
}

double clamp01(double v, bool& clamped) {
    if (v < 0.0) { clamped = true; return 0.0; }
    if (v > 1.0) { clamped = true; return 1.0; }
    return v;
}

}  // namespace

void ProtocolParams::validate() const {
    check(mu_o >= 0.0 && mu_o < mu_x && mu_x < mu_y,
          "ProtocolParams: need 0 <= mu_o < mu_x < mu_y");
    check(p_o >= 0.0 && p_o <= 1.0 && p_x >= 0.0 && p_x <= 1.0 && p_y >= 0.0 && p_y <= 1.0,
          "ProtocolParams: window probabilities must be in [0,1]");
    check(std::abs(p_o + p_x + p_y - 1.0) <= kProbSumTol,
          "ProtocolParams: p_o + p_x + p_y must equal 1");
    check(eps_send > 0.0 && eps_send < 1.0, "ProtocolParams: eps_send must be in (0,1)");
    check(mu_ref >= 0.0, "ProtocolParams: mu_ref must be >= 0");
}

ProtocolParams table1_20db() {
    ProtocolParams p;
    p.mu_o = 0.0016;
    p.mu_x = 0.01;
    p.mu_y = 0.44;
    p.p_x = 0.23;
    p.p_y = 0.72;
    p.p_o = 1.0 - p.p_x - p.p_y;
    p.eps_send = 0.25;
    p.mu_ref = 1.5;
    return p;
}

ProtocolParams table1_30db() {
    ProtocolParams p;
    p.mu_o = 0.0016;
    p.mu_x = 0.01;
    p.mu_y = 0.43;
    p.p_x = 0.36;
    p.p_y = 0.53;
    p.p_o = 1.0 - p.p_x - p.p_y;
    p.eps_send = 0.25;
    p.mu_ref = 1.5;
    return p;
}

void SecurityParams::validate() const {
    for (double e : {eps_cor, eps_pa, eps_hat, eps_chernoff})
        check(e > 0.0 && e < 1.0, "SecurityParams: failure probabilities must be in (0,1)");
    check(f_ec >= 1.0, "SecurityParams: f_ec must be >= 1");
}

double shannon_entropy(double x) {
    if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error("shannon_entropy: x outside [0,1]");
    if (x <= 0.0 || x >= 1.0) return 0.0;
    return -x * std::log2(x) - (1.0 - x) * std::log2(1.0 - x);
}

double bits_per_second(double rate_per_pulse, double clock_hz, double signal_duty) {
    if (!(signal_duty > 0.0 && signal_duty <= 1.0))
        throw std::domain_error("bits_per_second: duty must be in (0,1]");
    return rate_per_pulse * clock_hz * signal_duty;
}

SentPairCounts expected_pair_counts(const ProtocolParams& params, double N) {
    params.validate();
    check(N > 0.0, "expected_pair_counts: N must be positive");
    const double a = params.p_o;
    const double b = params.p_x;
    const double c = params.p_y * params.eps_send;        // signal window, sent
    const double d = params.p_y * (1.0 - params.eps_send);  // signal window, not sent

    SentPairCounts s;
    auto& n = s.n;
    // Eq. A1: announced categories. A not-send inside a signal window counts
    // as vacuum only when the partner's window is announced; the three
    // both-signal combinations below stay out of these cells.
    n[0][0] = (a * a + 2.0 * a * d) * N;
    n[0][1] = (a + d) * b * N;
    n[1][0] = n[0][1];
    n[0][2] = a * c * N;
    n[2][0] = n[0][2];
    // D1 product-form completion.
    n[1][1] = b * b * N;
    n[1][2] = b * c * N;
    n[2][1] = n[1][2];
    n[2][2] = c * c * N;  // = sent ZZyy
    // Signal-signal raw-key pairings outside Eq. A1.
    s.zz_oy = d * c * N;
    s.zz_yo = c * d * N;
    s.zz_oo = d * d * N;
    return s;
}

void DetectionTally::validate() const {
    check(total_pulses > 0.0, "DetectionTally: total_pulses must be positive");
    double sent_sum = 0.0;
    for (int l = 0; l < kNumIntensities; ++l) {
        for (int r = 0; r < kNumIntensities; ++r) {
            check(counts[l][r] >= 0.0, "DetectionTally: negative count");
            check(sent_pairs.n[l][r] >= 0.0, "DetectionTally: negative sent-pair count");
            // Real-valued expected tallies can graze the bound; allow slack.
            check(counts[l][r] <= sent_pairs.n[l][r] * (1.0 + 1e-9) + 1e-9,
                  "DetectionTally: n_lr exceeds N_lr");
            sent_sum += sent_pairs.n[l][r];
        }
    }
    sent_sum += sent_pairs.zz_oy + sent_pairs.zz_yo + sent_pairs.zz_oo;
    check(sent_sum <= total_pulses * (1.0 + 1e-9), "DetectionTally: sent pairs exceed N");
    check(zz.yy >= 0 && zz.oy >= 0 && zz.yo >= 0 && zz.oo >= 0,
          "DetectionTally: negative zz count");
    check(xx_correct >= 0 && xx_accepted >= xx_correct,
          "DetectionTally: xx_correct exceeds xx_accepted");
    check(xx_accepted <= counts[1][1] * (1.0 + 1e-9) + 1e-9,
          "DetectionTally: xx_accepted exceeds n_xx");
    check(xx_sent_accepted >= 0.0, "DetectionTally: negative N_x");
}

DecoyBounds decoy_bounds(const DetectionTally& tally, const ProtocolParams& params,
                         const SecurityParams& sec, const DecoyOptions& opt) {
    tally.validate();
    sec.validate();

    DecoyBounds out;
    out.estimation = opt.estimation;
    out.tx_norm = opt.tx_norm;

    const double mu_y = params.mu_y;
    const double mu_x = params.mu_x;
    const double den = mu_y * mu_x * (mu_y - mu_x);
    // A collapsed intensity ladder (mu_x = mu_y, or a zero intensity) makes
    // the A4 determinant vanish. Reported as a status rather than thrown:
    // sweeps and optimizers legitimately probe such corners.
    if (!(den > 0.0)) {
        out.status = BoundStatus::DegenerateDenominator;
        return out;
    }
    params.validate();

    const double eps = sec.eps_chernoff;
    const auto& sp = tally.sent_pairs;
    using I = Intensity;
    // Bound directions per the printed A4 marks (identical under D3): the
    // added one-sided yields from below, everything subtracted from above.
    const double S_ox = yield_lower(tally.at(I::O, I::X), sp.at(I::O, I::X), eps);
    const double S_xo = yield_lower(tally.at(I::X, I::O), sp.at(I::X, I::O), eps);
    const double S_oy = yield_upper(tally.at(I::O, I::Y), sp.at(I::O, I::Y), eps);
    const double S_yo = yield_upper(tally.at(I::Y, I::O), sp.at(I::Y, I::O), eps);
    const double S_oo_up = yield_upper(tally.at(I::O, I::O), sp.at(I::O, I::O), eps);

    const double e_mux = std::exp(mu_x);
    const double e_muy = std::exp(mu_y);
    const double my2 = mu_y * mu_y;
    const double mx2 = mu_x * mu_x;

    double s01 = (my2 * e_mux * S_ox - mx2 * e_muy * S_oy - (my2 - mx2) * S_oo_up) / den;
    double s10 = (my2 * e_mux * S_xo - mx2 * e_muy * S_yo - (my2 - mx2) * S_oo_up) / den;
    out.s01_lower = clamp01(s01, out.clamped);
    out.s10_lower = clamp01(s10, out.clamped);
    out.s1_lower = 0.5 * (out.s01_lower + out.s10_lower);

    // Eq. A6 expected untagged-bit counts.
    const double pref = tally.total_pulses * params.p_y * params.p_y * params.eps_send *
                        (1.0 - params.eps_send) * mu_y * std::exp(-mu_y);
    out.n10_lower = pref * out.s10_lower;
    out.n01_lower = pref * out.s01_lower;

    // Eq. A7 phase error. m_x errors among the phase-filtered xx events.
    const double m_x = tally.xx_accepted - tally.xx_correct;
    const double tx_of = [&](double norm) {
        if (norm <= 0.0) return 1.0;
        const double num =
            opt.estimation == Estimation::Strict ? chernoff_expected_upper(m_x, eps) : m_x;
        return num / norm;
    }(opt.tx_norm == TxNormalization::SentFiltered ? tally.xx_sent_accepted
                                                   : tally.xx_accepted);
    out.t_x = tx_of;
    const double S_oo_a7 = opt.estimation == Estimation::Strict
                               ? yield_lower(tally.at(I::O, I::O), sp.at(I::O, I::O), eps)
                               : (sp.at(I::O, I::O) > 0.0
                                      ? tally.at(I::O, I::O) / sp.at(I::O, I::O)
                                      : 0.0);
    const double e2mux = std::exp(-2.0 * mu_x);
    const double e1_den = 2.0 * mu_x * e2mux * out.s1_lower;
    auto e1_of = [&](double tx) {
        if (e1_den <= 0.0) return 1.0;
        return (tx - e2mux * S_oo_a7 / 2.0) / e1_den;
    };
    out.e1ph_upper = clamp01(e1_of(tx_of), out.clamped);

    const double alt_norm = opt.tx_norm == TxNormalization::SentFiltered
                                ? tally.xx_accepted
                                : tally.xx_sent_accepted;
    const double tx_alt = alt_norm > 0.0
                              ? (opt.estimation == Estimation::Strict
                                     ? chernoff_expected_upper(m_x, eps)
                                     : m_x) /
                                    alt_norm
                              : 1.0;
    bool alt_clamped = false;
    out.e1ph_upper_alt_norm = clamp01(e1_of(tx_alt), alt_clamped);

    if (!(out.s1_lower > 0.0) || out.e1ph_upper >= 0.5)
        out.status = BoundStatus::InfeasibleBounds;
    return out;
}

AoppEstimate aopp_estimate(const DecoyBounds& decoy, const AoppMeasured& measured,
                           const SecurityParams& sec) {
    sec.validate();
    AoppEstimate est;
    est.n_t = measured.n_t;
    est.n_g = measured.n_g;
    est.n_odd = measured.n_odd;
    est.n_t_prime = measured.n_t_prime;
    est.e_prime = measured.e_prime;

    auto fail = [&](const char* guard) {
        est.feasible = false;
        est.guard = guard;
        est.n1_prime = 0.0;
        est.e1ph_prime = 1.0;
        return est;
    };

    if (!decoy.feasible()) return fail("decoy_infeasible");
    if (!(measured.n_t > 0.0)) return fail("n_t<=0");
    if (!(measured.n_g > 0.0)) return fail("n_g=0");
    if (!(measured.n_odd > 0.0)) return fail("n_odd=0");

    const double eps = sec.eps_chernoff;
    const double beta = chernoff_beta(eps);

    // Eq. A8 exactly as printed: realized untagged counts, survival ratio u,
    // pessimistic re-pairing, then the phi^L of the surviving population.
    est.n10 = chernoff_real_lower(decoy.n10_lower, eps);
    est.n01 = chernoff_real_lower(decoy.n01_lower, eps);
    est.n1 = est.n10 + est.n01;
    if (!(est.n1 > 0.0)) return fail("n1<=0");

    est.u = measured.n_g / (2.0 * measured.n_odd);
    est.n1r = chernoff_real_lower(est.u * est.n1 * est.n1 / (2.0 * measured.n_t), eps);
    if (!(est.n1r > 0.0)) return fail("n1r<=0");

    const double corr = std::sqrt(beta / (2.0 * est.n1r));  // sqrt(-ln eps / 2 n1r)
    est.n10_prime = 2.0 * est.n1r * (est.n10 / est.n1 - corr);
    est.n01_prime = 2.0 * est.n1r * (est.n01 / est.n1 - corr);
    est.n_min = std::min(est.n10_prime, est.n01_prime);
    if (!(est.n_min > 0.0)) return fail("n_min<=0");

    const double surv = est.n_min * (1.0 - est.n_min / (2.0 * est.n1r));
    if (!(surv > 0.0)) return fail("n_min>=2n1r");
    est.n1_prime = 2.0 * chernoff_real_lower(surv, eps);
    if (!(est.n1_prime > 0.0)) return fail("n1'<=0");

    // Eq. A9.
    if (!(est.n1 > 2.0 * est.n1r)) return fail("n1<=2n1r");
    est.r = est.n1 / (est.n1 - 2.0 * est.n1r) *
            std::log(3.0 * (est.n1 - 2.0 * est.n1r) * (est.n1 - 2.0 * est.n1r) / eps);
    if (!(2.0 * est.n1r > est.r)) return fail("2n1r<=r");
    if (!(est.n1r > est.r)) return fail("n1r<=r");

    est.e_tau = chernoff_real_upper(2.0 * est.n1r * decoy.e1ph_upper, eps) /
                (2.0 * est.n1r - est.r);
    est.e_tau = std::min(est.e_tau, 1.0);
    est.m_s_upper =
        chernoff_real_upper((est.n1r - est.r) * est.e_tau * (1.0 - est.e_tau), eps) + est.r;
    est.e1ph_prime = std::min(1.0, 2.0 * est.m_s_upper / est.n1_prime);
    est.feasible = true;
    return est;
}

KeyRateReport key_rate(const AoppEstimate& aopp, double N, const SecurityParams& sec,
                       double clock_hz, double duty) {
    sec.validate();
    check(N > 0.0, "key_rate: N must be positive");
    KeyRateReport rep;
    rep.aopp = aopp;
    rep.clock_hz = clock_hz;
    rep.duty = duty;

    const double log_terms =
        2.0 * std::log2(2.0 / sec.eps_cor) +
        4.0 * std::log2(1.0 / (std::sqrt(2.0) * sec.eps_pa * sec.eps_hat));
    const double secure_bits = aopp.n1_prime * (1.0 - shannon_entropy(aopp.e1ph_prime)) -
                               sec.f_ec * aopp.n_t_prime * shannon_entropy(aopp.e_prime) -
                               log_terms;
    rep.rate_per_pulse = std::max(0.0, secure_bits / N);
    rep.feasible = aopp.feasible && secure_bits > 0.0;
    if (!rep.feasible) rep.rate_per_pulse = 0.0;
    rep.rate_bps = bits_per_second(rep.rate_per_pulse, clock_hz, duty);
    return rep;
}

KeyRateReport key_rate_from_tally(const DetectionTally& tally, const ProtocolParams& params,
                                  const SecurityParams& sec, const AoppMeasured& measured,
                                  const DecoyOptions& opt, double clock_hz, double duty) {
    DecoyBounds decoy = decoy_bounds(tally, params, sec, opt);
    AoppEstimate aopp = aopp_estimate(decoy, measured, sec);
    KeyRateReport rep = key_rate(aopp, tally.total_pulses, sec, clock_hz, duty);
    rep.decoy = decoy;
    return rep;
}

}  // namespace qnet::sns
