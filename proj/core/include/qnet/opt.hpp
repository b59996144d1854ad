#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "qnet/sim.hpp"
#include "qnet/sns.hpp"

namespace qnet::opt {

// Search box for (mu_y, mu_x, p_x, p_y, eps_send). mu_o is a device
// property, not a free variable. The simplex guard keeps p_o >= 1 - p_sum_max.
struct ParamBounds {
    double mu_y_min = 0.10, mu_y_max = 0.70;
    double mu_x_min = 0.005, mu_x_max = 0.04;
    double p_x_min = 0.05, p_x_max = 0.45;
    double p_y_min = 0.15, p_y_max = 0.85;
    double eps_min = 0.10, eps_max = 0.45;
    double mu_o = 0.0016;
    double mu_ref = 1.5;
    double p_sum_max = 0.97;

    // Coarse grid resolution per axis (D17).
    int grid_mu_y = 4, grid_mu_x = 3, grid_p_x = 4, grid_p_y = 4, grid_eps = 3;

    void validate() const;
};

struct InfeasibleEverywhere : std::runtime_error {
    InfeasibleEverywhere() : std::runtime_error("no parameter point yields R > 0") {}
};

struct OptimizeOptions {
    sns::DecoyOptions decoy;
    double clock_hz = 1e8;
    double duty = 400.0 / 1024.0;
    double aopp_sample_bits = 1e6;
    // Warm starts injected into the coarse grid (Table 1 rows by default).
    bool include_table1_starts = true;
    // Stop when a full coordinate-descent cycle improves R by less than this
    // relative amount (D17).
    double rel_tol = 1e-3;
    int max_cycles = 40;
};

struct OptimizeResult {
    sns::ProtocolParams best;
    sns::KeyRateReport report;
    long evaluations = 0;
    bool used_warm_start = false;
};

// Coarse grid + cyclic coordinate descent with shrinking steps over the
// expected-mode simulate_keyrate objective. Deterministic given the seed
// (which only feeds the D11 AOPP sub-sample). Throws InfeasibleEverywhere
// when nothing in the search space produces a positive rate.
OptimizeResult optimize_params(const sim::ChannelSpec& ch, double N,
                               const sns::SecurityParams& sec, const ParamBounds& bounds,
                               std::uint64_t seed, const OptimizeOptions& opt = {});

}  // namespace qnet::opt
