#include "qnet/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

namespace qnet::sim {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Quadrature rules are pinned so results are bit-stable across releases:
// a 64-point midpoint rule for the uniform pulse phase (spectrally accurate
// for the periodic integrand) and a 33-node trapezoid over +-4 sigma with
// renormalized normal weights for the residual phase noise.
constexpr int kPhaseGrid = 64;
constexpr int kNoiseNodes = 33;
constexpr double kNoiseSpan = 4.0;

void check(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

struct NoiseQuad {
    std::array<double, kNoiseNodes> xi;
    std::array<double, kNoiseNodes> w;
    int n = 0;
};

NoiseQuad noise_quadrature(double sigma) {
    NoiseQuad q;
    if (sigma <= 0.0) {
        q.xi[0] = 0.0;
        q.w[0] = 1.0;
        q.n = 1;
        return q;
    }
    q.n = kNoiseNodes;
    double sum = 0.0;
    for (int k = 0; k < kNoiseNodes; ++k) {
        const double t = -kNoiseSpan + 2.0 * kNoiseSpan * k / (kNoiseNodes - 1);
        q.xi[k] = t * sigma;
        double w = std::exp(-0.5 * t * t);
        if (k == 0 || k == kNoiseNodes - 1) w *= 0.5;  // trapezoid ends
        q.w[k] = w;
        sum += w;
    }
    for (int k = 0; k < kNoiseNodes; ++k) q.w[k] /= sum;
    return q;
}

double db_to_transmittance(double db) { return std::pow(10.0, -db / 10.0); }

}  // namespace

double ChannelSpec::arm_transmittance_i() const {
    return detector_efficiency * db_to_transmittance(loss_i_db + mu_excess_loss_db);
}

double ChannelSpec::arm_transmittance_j() const {
    return detector_efficiency * db_to_transmittance(loss_j_db + mu_excess_loss_db);
}

void ChannelSpec::validate() const {
    check(loss_i_db >= 0.0 && loss_j_db >= 0.0 && mu_excess_loss_db >= 0.0,
          "ChannelSpec: losses must be >= 0");
    check(detector_efficiency >= 0.0 && detector_efficiency <= 1.0,
          "ChannelSpec: detector_efficiency in [0,1]");
    check(dark_count >= 0.0 && dark_count < 1.0, "ChannelSpec: dark_count in [0,1)");
    check(visibility >= 0.0 && visibility <= 1.0, "ChannelSpec: visibility in [0,1]");
    check(phase_noise_sigma >= 0.0, "ChannelSpec: phase_noise_sigma must be >= 0");
}

ChannelSpec calibrated_channel(double total_loss_db, double excess_per_arm_db) {
    ChannelSpec ch;
    ch.loss_i_db = total_loss_db / 2.0;
    ch.loss_j_db = total_loss_db / 2.0;
    ch.detector_efficiency = 0.45;
    ch.dark_count = 8e-8;
    ch.visibility = 0.9672;
    ch.phase_noise_sigma = 0.574;
    ch.mu_excess_loss_db = excess_per_arm_db;
    return ch;
}

double mu_excess_loss_db(int ports_per_user) {
    check(ports_per_user >= 1, "mu_excess_loss_db: ports must be >= 1");
    return 10.0 * std::log10(double(ports_per_user)) + 1.0 + 1.0;
}

double PhaseFilter::threshold() const { return std::cos(std::numbers::pi / slices); }

double PhaseFilter::lambda() const { return 1.0 - threshold(); }

void PhaseFilter::validate() const {
    check(slices >= 2 && slices % 2 == 0, "PhaseFilter: slices must be even and >= 2");
}

bool PhaseFilter::passes(double theta_i, double theta_j, double phi_ij) const {
    return 1.0 - std::abs(std::cos(theta_i - theta_j - phi_ij)) <= lambda() + 1e-15;
}

bool PhaseFilter::passes_slices(int slice_i, int slice_j) const {
    const int m = ((slice_j - slice_i) % slices + slices) % slices;
    return m == 0 || m == slices / 2;
}

double PhaseFilter::pass_fraction() const {
    validate();
    int pass = 0;
    for (int a = 0; a < slices; ++a)
        for (int b = 0; b < slices; ++b)
            if (passes_slices(a, b)) ++pass;
    return double(pass) / double(slices * slices);
}

void FrameSpec::validate() const {
    check(signal > 0 && reference >= 0 && vacuum >= 0, "FrameSpec: bad pulse counts");
    check(clock_hz > 0.0, "FrameSpec: clock must be positive");
    check(frame_length() == signal + reference + vacuum, "FrameSpec: inconsistent frame");
}

std::size_t RawKeyPair::error_count() const {
    std::size_t e = 0;
    for (std::size_t k = 0; k < bits_i.size(); ++k) e += bits_i[k] != bits_j[k];
    return e;
}

std::pair<double, double> click_probabilities(double mu_i, double mu_j, double delta,
                                              const ChannelSpec& ch) {
    check(mu_i >= 0.0 && mu_j >= 0.0, "click_probabilities: negative intensity");
    const double nu_i = mu_i * ch.arm_transmittance_i();
    const double nu_j = mu_j * ch.arm_transmittance_j();
    const double cross = 2.0 * ch.visibility * std::sqrt(nu_i * nu_j) * std::cos(delta);
    const double keep = 1.0 - ch.dark_count;
    const double p0 = 1.0 - keep * std::exp(-(nu_i + nu_j + cross) / 2.0);
    const double p1 = 1.0 - keep * std::exp(-(nu_i + nu_j - cross) / 2.0);
    return {p0, p1};
}

double single_click_probability(double mu_i, double mu_j, double delta,
                                const ChannelSpec& ch) {
    const auto [p0, p1] = click_probabilities(mu_i, mu_j, delta, ch);
    return p0 * (1.0 - p1) + p1 * (1.0 - p0);
}

namespace {

double mu_of(const sns::ProtocolParams& p, int idx) {
    switch (idx) {
        case 0: return p.mu_o;
        case 1: return p.mu_x;
        default: return p.mu_y;
    }
}

// Single-detector response probability with the pulse-pair phase uniformly
// random (all categories except filtered xx).
double avg_single_click(double mu_i, double mu_j, const ChannelSpec& ch) {
    double acc = 0.0;
    for (int k = 0; k < kPhaseGrid; ++k) {
        const double delta = kTwoPi * (k + 0.5) / kPhaseGrid;
        acc += single_click_probability(mu_i, mu_j, delta, ch);
    }
    return acc / kPhaseGrid;
}

struct XxStats {
    double accept_click = 0.0;  // P(single click | announced slices aligned)
    double accept_error = 0.0;  // P(single click on the wrong detector | aligned)
    double detected_any = 0.0;  // P(single click), slices uniform
};

// Aligned means announced slice difference 0 (the pi class is its mirror);
// the physical phase still carries the residual tracking noise xi.
XxStats xx_stats(const sns::ProtocolParams& p, const ChannelSpec& ch,
                 const PhaseFilter& filter) {
    XxStats st;
    const NoiseQuad q = noise_quadrature(ch.phase_noise_sigma);
    for (int k = 0; k < q.n; ++k) {
        const auto [p0, p1] = click_probabilities(p.mu_x, p.mu_x, q.xi[k], ch);
        st.accept_click += q.w[k] * (p0 * (1.0 - p1) + p1 * (1.0 - p0));
        st.accept_error += q.w[k] * (p1 * (1.0 - p0));
    }
    for (int m = 0; m < filter.slices; ++m) {
        double cls = 0.0;
        for (int k = 0; k < q.n; ++k) {
            const double delta = kTwoPi * m / filter.slices + q.xi[k];
            cls += q.w[k] * single_click_probability(p.mu_x, p.mu_x, delta, ch);
        }
        st.detected_any += cls / filter.slices;
    }
    return st;
}

}  // namespace

sns::DetectionTally expected_tally(const sns::ProtocolParams& params, const ChannelSpec& ch,
                                   const PhaseFilter& filter, double N) {
    params.validate();
    ch.validate();
    filter.validate();
    check(N > 0.0, "expected_tally: N must be positive");

    sns::DetectionTally t;
    t.total_pulses = N;
    t.sent_pairs = sns::expected_pair_counts(params, N);

    for (int l = 0; l < sns::kNumIntensities; ++l) {
        for (int r = 0; r < sns::kNumIntensities; ++r) {
            if (l == 1 && r == 1) continue;  // xx handled with the filter below
            t.counts[l][r] = t.sent_pairs.n[l][r] * avg_single_click(mu_of(params, l),
                                                                     mu_of(params, r), ch);
        }
    }

    const XxStats xs = xx_stats(params, ch, filter);
    const double n_xx_sent = t.sent_pairs.n[1][1];
    t.counts[1][1] = n_xx_sent * xs.detected_any;
    t.xx_sent_accepted = n_xx_sent * filter.pass_fraction();
    t.xx_accepted = t.xx_sent_accepted * xs.accept_click;
    t.xx_correct = t.xx_sent_accepted * (xs.accept_click - xs.accept_error);

    t.zz.yy = t.counts[2][2];  // sent zz_yy lives in the [y][y] cell
    t.zz.oy = t.sent_pairs.zz_oy * avg_single_click(params.mu_o, params.mu_y, ch);
    t.zz.yo = t.sent_pairs.zz_yo * avg_single_click(params.mu_y, params.mu_o, ch);
    t.zz.oo = t.sent_pairs.zz_oo * avg_single_click(params.mu_o, params.mu_o, ch);
    return t;
}

SessionResult monte_carlo_session(const sns::ProtocolParams& params, const ChannelSpec& ch,
                                  const PhaseFilter& filter, double N, std::uint64_t seed) {
    params.validate();
    ch.validate();
    filter.validate();
    check(N > 0.0, "monte_carlo_session: N must be positive");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::uniform_int_distribution<int> slice_dist(0, filter.slices - 1);
    std::normal_distribution<double> noise(0.0, ch.phase_noise_sigma);

    SessionResult res;
    auto& t = res.tally;
    t.total_pulses = N;

    const double p_o = params.p_o, p_x = params.p_x;
    const double eps = params.eps_send;
    const std::uint64_t n_pulses = static_cast<std::uint64_t>(N);
    check(double(n_pulses) == N, "monte_carlo_session: N must be integral");

    for (std::uint64_t k = 0; k < n_pulses; ++k) {
        // Window and intensity per user: 0=o, 1=x, 2=y.
        int win_i, win_j, int_i, int_j;
        auto draw = [&](int& win, int& intst) {
            const double u = uni(rng);
            if (u < p_o) {
                win = 0;
                intst = 0;
            } else if (u < p_o + p_x) {
                win = 1;
                intst = 1;
            } else {
                win = 2;
                intst = uni(rng) < eps ? 2 : 0;
            }
        };
        draw(win_i, int_i);
        draw(win_j, int_j);

        const bool both_signal = win_i == 2 && win_j == 2;
        const bool both_decoy = win_i == 1 && win_j == 1;

        int slice_i = 0, slice_j = 0;
        double delta;
        if (both_decoy) {
            slice_i = slice_dist(rng);
            slice_j = slice_dist(rng);
            delta = kTwoPi * (slice_j - slice_i) / filter.slices;
            if (ch.phase_noise_sigma > 0.0) delta += noise(rng);
        } else {
            delta = kTwoPi * uni(rng);
        }

        const auto [p0, p1] =
            click_probabilities(mu_of(params, int_i), mu_of(params, int_j), delta, ch);
        const bool d0 = uni(rng) < p0;
        const bool d1 = uni(rng) < p1;
        const bool single = d0 != d1;

        if (both_signal) {
            if (int_i == 2 && int_j == 2)
                t.sent_pairs.n[2][2] += 1.0;
            else if (int_i == 0 && int_j == 2)
                t.sent_pairs.zz_oy += 1.0;
            else if (int_i == 2 && int_j == 0)
                t.sent_pairs.zz_yo += 1.0;
            else
                t.sent_pairs.zz_oo += 1.0;
            if (single) {
                if (int_i == 2 && int_j == 2)
                    t.zz.yy += 1.0;
                else if (int_i == 0 && int_j == 2)
                    t.zz.oy += 1.0;
                else if (int_i == 2 && int_j == 0)
                    t.zz.yo += 1.0;
                else
                    t.zz.oo += 1.0;
                res.raw.bits_i.push_back(int_i == 2 ? 1 : 0);
                res.raw.bits_j.push_back(int_j == 2 ? 0 : 1);
            }
            continue;
        }

        t.sent_pairs.n[int_i][int_j] += 1.0;
        if (single) t.counts[int_i][int_j] += 1.0;

        if (both_decoy && filter.passes_slices(slice_i, slice_j)) {
            t.xx_sent_accepted += 1.0;
            if (single) {
                t.xx_accepted += 1.0;
                const int m = ((slice_j - slice_i) % filter.slices + filter.slices) %
                              filter.slices;
                const bool expect_d0 = m == 0;
                if ((expect_d0 && d0) || (!expect_d0 && d1)) t.xx_correct += 1.0;
            }
        }
    }
    t.counts[2][2] = t.zz.yy;
    return res;
}

AoppBitResult aopp_bitlevel(const RawKeyPair& raw, std::uint64_t seed) {
    check(!raw.bits_i.empty(), "aopp_bitlevel: empty raw key");
    check(raw.bits_i.size() == raw.bits_j.size(), "aopp_bitlevel: length mismatch");
    const std::size_t nt = raw.n_t();
    std::mt19937_64 rng(seed);

    AoppBitResult out;
    out.n_t = double(nt);

    // Random two-by-two grouping on user-j's string: n_odd.
    std::vector<std::uint32_t> idx(nt);
    std::iota(idx.begin(), idx.end(), 0u);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::size_t n_odd = 0;
    for (std::size_t k = 0; k + 1 < nt; k += 2)
        n_odd += raw.bits_j[idx[k]] != raw.bits_j[idx[k + 1]];
    out.n_odd = double(n_odd);

    // Active pairing: each of user-j's 1-bits with one of his 0-bits.
    std::vector<std::uint32_t> ones, zeros;
    ones.reserve(nt);
    zeros.reserve(nt);
    for (std::size_t k = 0; k < nt; ++k)
        (raw.bits_j[k] ? ones : zeros).push_back(std::uint32_t(k));
    std::shuffle(ones.begin(), ones.end(), rng);
    std::shuffle(zeros.begin(), zeros.end(), rng);
    const std::size_t ng = std::min(ones.size(), zeros.size());
    out.n_g = double(ng);

    // A pair survives iff user-i's parity is odd too; survivors where both
    // constituent bits were wrong become post-AOPP errors.
    std::size_t survivors = 0, errors = 0;
    for (std::size_t k = 0; k < ng; ++k) {
        const std::uint32_t a = ones[k], b = zeros[k];
        if (raw.bits_i[a] == raw.bits_i[b]) continue;
        ++survivors;
        if (raw.bits_i[a] != raw.bits_j[a] && raw.bits_i[b] != raw.bits_j[b]) ++errors;
    }
    out.n_t_prime = double(survivors);
    out.e_prime = survivors ? double(errors) / double(survivors) : 0.0;
    return out;
}

RawKeyPair synthesize_raw_key(const sns::ZZCounts& zz, std::uint64_t seed) {
    const auto cnt = [](double v) {
        if (v < 0.0) throw std::invalid_argument("synthesize_raw_key: negative count");
        return static_cast<std::size_t>(std::llround(v));
    };
    const std::size_t n_yy = cnt(zz.yy), n_oy = cnt(zz.oy), n_yo = cnt(zz.yo),
                      n_oo = cnt(zz.oo);
    const std::size_t nt = n_yy + n_oy + n_yo + n_oo;

    RawKeyPair raw;
    raw.bits_i.reserve(nt);
    raw.bits_j.reserve(nt);
    // Bit conventions: i send->1/not->0, j send->0/not->1.
    auto put = [&](std::size_t n, uint8_t bi, uint8_t bj) {
        for (std::size_t k = 0; k < n; ++k) {
            raw.bits_i.push_back(bi);
            raw.bits_j.push_back(bj);
        }
    };
    put(n_yy, 1, 0);  // both sent: error
    put(n_oy, 0, 0);  // j sent alone: correct
    put(n_yo, 1, 1);  // i sent alone: correct
    put(n_oo, 0, 1);  // neither sent: error

    std::mt19937_64 rng(seed);
    std::vector<std::uint32_t> perm(nt);
    std::iota(perm.begin(), perm.end(), 0u);
    std::shuffle(perm.begin(), perm.end(), rng);
    RawKeyPair shuffled;
    shuffled.bits_i.resize(nt);
    shuffled.bits_j.resize(nt);
    for (std::size_t k = 0; k < nt; ++k) {
        shuffled.bits_i[k] = raw.bits_i[perm[k]];
        shuffled.bits_j[k] = raw.bits_j[perm[k]];
    }
    return shuffled;
}

namespace {

// D11: proportional sub-sampled raw key for expected mode. Samples category
// counts of the reduced key from the expected category mix, runs real
// bit-level AOPP, and scales the extensive outputs back up.
AoppBitResult subsampled_aopp(const sns::ZZCounts& zz, double sample_bits,
                              std::uint64_t seed) {
    const double nt = zz.total();
    AoppBitResult out;
    if (nt < 2.0) return out;  // nothing to pair

    const double target = std::min(sample_bits, nt);
    std::mt19937_64 rng(seed ^ 0x5eedaa99u);
    const std::size_t S = static_cast<std::size_t>(std::llround(target));

    double probs[4] = {zz.yy / nt, zz.oy / nt, zz.yo / nt, zz.oo / nt};
    std::size_t counts[4] = {0, 0, 0, 0};
    double rem_p = 1.0;
    std::size_t rem_n = S;
    for (int c = 0; c < 3; ++c) {
        const double p = rem_p > 0.0 ? std::clamp(probs[c] / rem_p, 0.0, 1.0) : 0.0;
        std::binomial_distribution<long long> bin(static_cast<long long>(rem_n), p);
        counts[c] = static_cast<std::size_t>(bin(rng));
        rem_n -= counts[c];
        rem_p -= probs[c];
    }
    counts[3] = rem_n;

    sns::ZZCounts sampled{double(counts[0]), double(counts[1]), double(counts[2]),
                          double(counts[3])};
    RawKeyPair raw = synthesize_raw_key(sampled, seed ^ 0xabcdef12u);
    if (raw.n_t() == 0) return out;
    AoppBitResult bits = aopp_bitlevel(raw, seed ^ 0x77aa88dd33ull);

    const double scale = nt / double(raw.n_t());
    out.n_t = nt;
    out.n_g = bits.n_g * scale;
    out.n_odd = bits.n_odd * scale;
    out.n_t_prime = bits.n_t_prime * scale;
    out.e_prime = bits.e_prime;
    return out;
}

}  // namespace

SimulateResult simulate_keyrate(const sns::ProtocolParams& params, const ChannelSpec& ch,
                                const PhaseFilter& filter, double N,
                                const sns::SecurityParams& sec, const SimulateOptions& opt) {
    SimulateResult res;
    if (opt.mode == SimMode::Expected) {
        res.tally = expected_tally(params, ch, filter, N);
        res.aopp_bits = subsampled_aopp(res.tally.zz, opt.aopp_sample_bits, opt.seed);
    } else {
        SessionResult session = monte_carlo_session(params, ch, filter, N, opt.seed);
        res.tally = session.tally;
        if (session.raw.n_t() > 0)
            res.aopp_bits = aopp_bitlevel(session.raw, opt.seed ^ 0x40ff9922ull);
        res.aopp_bits.n_t = double(session.raw.n_t());
    }
    res.report = sns::key_rate_from_tally(res.tally, params, sec, res.aopp_bits.measured(),
                                          opt.decoy, opt.clock_hz, opt.duty);
    return res;
}

PhotonTruth photon_resolved_truth(const ChannelSpec& ch) {
    ch.validate();
    const double eta_i = ch.arm_transmittance_i();
    const double eta_j = ch.arm_transmittance_j();
    const double dc = ch.dark_count;
    const double dark_pair_single = 2.0 * dc * (1.0 - dc);

    PhotonTruth tr;
    tr.y01 = eta_j * (1.0 - dc) + (1.0 - eta_j) * dark_pair_single;
    tr.y10 = eta_i * (1.0 - dc) + (1.0 - eta_i) * dark_pair_single;
    tr.s1 = 0.5 * (tr.y01 + tr.y10);

    // |01>+|10> component of an accepted xx pairing: detected on the correct
    // port with probability (1 + V_eff)/2, V_eff folding the residual phase
    // noise. Exact for symmetric arms (soundness-test setting).
    const double eta = std::sqrt(eta_i * eta_j);
    const double v_eff =
        ch.visibility * std::exp(-0.5 * ch.phase_noise_sigma * ch.phase_noise_sigma);
    const double q_correct = 0.5 * (1.0 + v_eff);
    const double single = eta * (1.0 - dc) + (1.0 - eta) * dark_pair_single;
    const double wrong = eta * (1.0 - q_correct) * (1.0 - dc) + (1.0 - eta) * dc * (1.0 - dc);
    tr.e1ph = single > 0.0 ? wrong / single : 0.5;
    return tr;
}

sns::DetectionTally photon_resolved_tally(const sns::ProtocolParams& params,
                                          const ChannelSpec& ch, const PhaseFilter& filter,
                                          double N, std::uint64_t seed) {
    params.validate();
    ch.validate();
    filter.validate();
    check(N > 0.0, "photon_resolved_tally: N must be positive");

    std::mt19937_64 rng(seed);
    auto binom = [&rng](double n, double p) {
        if (n <= 0.0 || p <= 0.0) return 0.0;
        p = std::min(p, 1.0);
        std::binomial_distribution<long long> bin(static_cast<long long>(std::llround(n)),
                                                  p);
        return double(bin(rng));
    };

    const PhotonTruth tr = photon_resolved_truth(ch);
    const double dc = ch.dark_count;
    const double y00 = 2.0 * dc * (1.0 - dc);

    sns::DetectionTally t;
    t.total_pulses = N;
    t.sent_pairs = sns::expected_pair_counts(params, N);

    // Announced categories: per-user Fock classes (0,0), (0,1), (1,0) with
    // interference-free yields; everything else absorbs the residual of the
    // phase-averaged coherent total so the decomposition stays consistent
    // with expected_tally in expectation.
    for (int l = 0; l < sns::kNumIntensities; ++l) {
        for (int r = 0; r < sns::kNumIntensities; ++r) {
            if (l == 1 && r == 1) continue;
            const double n_sent = t.sent_pairs.n[l][r];
            if (n_sent <= 0.0) continue;
            const double mu_l = mu_of(params, l), mu_r = mu_of(params, r);
            const double p00 = std::exp(-mu_l) * std::exp(-mu_r);
            const double p01 = std::exp(-mu_l) * mu_r * std::exp(-mu_r);
            const double p10 = mu_l * std::exp(-mu_l) * std::exp(-mu_r);
            const double prest = std::max(0.0, 1.0 - p00 - p01 - p10);
            const double total = avg_single_click(mu_l, mu_r, ch);
            const double yrest =
                prest > 0.0
                    ? std::clamp((total - p00 * y00 - p01 * tr.y01 - p10 * tr.y10) / prest,
                                 0.0, 1.0)
                    : 0.0;

            double n00 = binom(n_sent, p00);
            double n01 = binom(n_sent - n00, p01 / std::max(1e-300, 1.0 - p00));
            double n10 =
                binom(n_sent - n00 - n01, p10 / std::max(1e-300, 1.0 - p00 - p01));
            double nrest = n_sent - n00 - n01 - n10;
            t.counts[l][r] = binom(n00, y00) + binom(n01, tr.y01) + binom(n10, tr.y10) +
                             binom(nrest, yrest);
        }
    }

    // Filtered xx: decompose by total photon number of the joint state.
    const double n_xx = t.sent_pairs.n[1][1];
    const double mu2 = 2.0 * params.mu_x;
    const double q0 = std::exp(-mu2);
    const double q1 = mu2 * std::exp(-mu2);
    const double qrest = std::max(0.0, 1.0 - q0 - q1);
    const double eta = std::sqrt(ch.arm_transmittance_i() * ch.arm_transmittance_j());
    const double u1 = eta * (1.0 - dc) + (1.0 - eta) * y00;
    const XxStats xs = xx_stats(params, ch, filter);
    const double urest =
        qrest > 0.0 ? std::clamp((xs.accept_click - q0 * y00 - q1 * u1) / qrest, 0.0, 1.0)
                    : 0.0;
    const double w1 = u1 * tr.e1ph;
    const double wrest =
        qrest > 0.0
            ? std::clamp((xs.accept_error - q0 * y00 * 0.5 - q1 * w1) / qrest, 0.0, urest)
            : 0.0;

    const double sent_acc = binom(n_xx, filter.pass_fraction());
    t.xx_sent_accepted = sent_acc;
    double m0 = binom(sent_acc, q0);
    double m1 = binom(sent_acc - m0, q1 / std::max(1e-300, 1.0 - q0));
    double mrest = sent_acc - m0 - m1;
    const double c0 = binom(m0, y00);
    const double c1 = binom(m1, u1);
    const double crest = binom(mrest, urest);
    const double e0 = binom(c0, 0.5);
    const double e1 = binom(c1, tr.e1ph);
    const double erest = binom(crest, urest > 0.0 ? wrest / urest : 0.0);
    t.xx_accepted = c0 + c1 + crest;
    t.xx_correct = t.xx_accepted - (e0 + e1 + erest);
    // Unfiltered slice pairs fill the rest of the detected-xx aggregate.
    t.counts[1][1] =
        t.xx_accepted + binom(n_xx - sent_acc, xs.detected_any);

    t.counts[2][2] = binom(t.sent_pairs.n[2][2], avg_single_click(params.mu_y, params.mu_y, ch));
    t.zz.yy = t.counts[2][2];
    t.zz.oy = binom(t.sent_pairs.zz_oy, avg_single_click(params.mu_o, params.mu_y, ch));
    t.zz.yo = binom(t.sent_pairs.zz_yo, avg_single_click(params.mu_y, params.mu_o, ch));
    t.zz.oo = binom(t.sent_pairs.zz_oo, avg_single_click(params.mu_o, params.mu_o, ch));
    return t;
}

}  // namespace qnet::sim
