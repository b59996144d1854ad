#include "qnet/opt.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace qnet::opt {

namespace {

void check(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

struct Point {
    double mu_y, mu_x, p_x, p_y, eps;
};

}  // namespace

void ParamBounds::validate() const {
    check(mu_o >= 0.0 && mu_o < mu_x_min, "ParamBounds: need mu_o < mu_x_min");
    check(mu_x_min > 0.0 && mu_x_min <= mu_x_max && mu_x_max < mu_y_min &&
              mu_y_min <= mu_y_max,
          "ParamBounds: intensity intervals must be ordered mu_x < mu_y");
    check(p_x_min > 0.0 && p_x_min <= p_x_max && p_x_max < 1.0, "ParamBounds: bad p_x box");
    check(p_y_min > 0.0 && p_y_min <= p_y_max && p_y_max < 1.0, "ParamBounds: bad p_y box");
    check(eps_min > 0.0 && eps_min <= eps_max && eps_max < 1.0, "ParamBounds: bad eps box");
    check(p_sum_max > 0.0 && p_sum_max < 1.0, "ParamBounds: bad p_sum_max");
    check(grid_mu_y >= 2 && grid_mu_x >= 2 && grid_p_x >= 2 && grid_p_y >= 2 &&
              grid_eps >= 2,
          "ParamBounds: coarse grid needs >= 2 points per axis");
}

OptimizeResult optimize_params(const sim::ChannelSpec& ch, double N,
                               const sns::SecurityParams& sec, const ParamBounds& bounds,
                               std::uint64_t seed, const OptimizeOptions& opt) {
    bounds.validate();
    ch.validate();
    sec.validate();
    check(N > 0.0, "optimize_params: N must be positive");

    const sim::PhaseFilter filter;
    sim::SimulateOptions sopt;
    sopt.mode = sim::SimMode::Expected;
    sopt.seed = seed;
    sopt.decoy = opt.decoy;
    sopt.clock_hz = opt.clock_hz;
    sopt.duty = opt.duty;
    sopt.aopp_sample_bits = opt.aopp_sample_bits;

    long evals = 0;
    auto feasible_point = [&](const Point& p) {
        return p.mu_y >= bounds.mu_y_min && p.mu_y <= bounds.mu_y_max &&
               p.mu_x >= bounds.mu_x_min && p.mu_x <= bounds.mu_x_max &&
               p.p_x >= bounds.p_x_min && p.p_x <= bounds.p_x_max &&
               p.p_y >= bounds.p_y_min && p.p_y <= bounds.p_y_max &&
               p.eps >= bounds.eps_min && p.eps <= bounds.eps_max &&
               p.p_x + p.p_y <= bounds.p_sum_max && p.mu_x < p.mu_y;
    };
    auto params_of = [&](const Point& p) {
        sns::ProtocolParams pp;
        pp.mu_o = bounds.mu_o;
        pp.mu_x = p.mu_x;
        pp.mu_y = p.mu_y;
        pp.p_x = p.p_x;
        pp.p_y = p.p_y;
        pp.p_o = 1.0 - p.p_x - p.p_y;
        pp.eps_send = p.eps;
        pp.mu_ref = bounds.mu_ref;
        return pp;
    };
    auto evaluate = [&](const Point& p) -> sns::KeyRateReport {
        ++evals;
        return sim::simulate_keyrate(params_of(p), ch, filter, N, sec, sopt).report;
    };

    auto axis = [](double lo, double hi, int n, int k) {
        return n == 1 ? lo : lo + (hi - lo) * k / (n - 1);
    };

    // Coarse grid, plus the published operating points as warm starts so the
    // optimum dominates them by construction.
    std::vector<Point> starts;
    for (int a = 0; a < bounds.grid_mu_y; ++a)
        for (int b = 0; b < bounds.grid_mu_x; ++b)
            for (int c = 0; c < bounds.grid_p_x; ++c)
                for (int d = 0; d < bounds.grid_p_y; ++d)
                    for (int e = 0; e < bounds.grid_eps; ++e)
                        starts.push_back(
                            {axis(bounds.mu_y_min, bounds.mu_y_max, bounds.grid_mu_y, a),
                             axis(bounds.mu_x_min, bounds.mu_x_max, bounds.grid_mu_x, b),
                             axis(bounds.p_x_min, bounds.p_x_max, bounds.grid_p_x, c),
                             axis(bounds.p_y_min, bounds.p_y_max, bounds.grid_p_y, d),
                             axis(bounds.eps_min, bounds.eps_max, bounds.grid_eps, e)});
    std::size_t grid_count = starts.size();
    if (opt.include_table1_starts) {
        for (const auto& t : {sns::table1_20db(), sns::table1_30db()})
            starts.push_back({t.mu_y, t.mu_x, t.p_x, t.p_y, t.eps_send});
    }

    Point best_pt{};
    sns::KeyRateReport best_rep;
    bool any = false;
    bool warm = false;
    for (std::size_t k = 0; k < starts.size(); ++k) {
        if (!feasible_point(starts[k])) continue;
        const sns::KeyRateReport rep = evaluate(starts[k]);
        if (!any || rep.rate_per_pulse > best_rep.rate_per_pulse) {
            any = true;
            best_pt = starts[k];
            best_rep = rep;
            warm = k >= grid_count;
        }
    }
    if (!any || !(best_rep.rate_per_pulse > 0.0)) throw InfeasibleEverywhere{};

    // Cyclic coordinate descent with halving steps (D17).
    std::array<double, 5> step = {
        (bounds.mu_y_max - bounds.mu_y_min) / (bounds.grid_mu_y - 1),
        (bounds.mu_x_max - bounds.mu_x_min) / (bounds.grid_mu_x - 1),
        (bounds.p_x_max - bounds.p_x_min) / (bounds.grid_p_x - 1),
        (bounds.p_y_max - bounds.p_y_min) / (bounds.grid_p_y - 1),
        (bounds.eps_max - bounds.eps_min) / (bounds.grid_eps - 1)};
    auto coord = [](Point& p, int i) -> double& {
        switch (i) {
            case 0: return p.mu_y;
            case 1: return p.mu_x;
            case 2: return p.p_x;
            case 3: return p.p_y;
            default: return p.eps;
        }
    };

    for (int cycle = 0; cycle < opt.max_cycles; ++cycle) {
        const double before = best_rep.rate_per_pulse;
        for (int i = 0; i < 5; ++i) {
            for (const double dir : {+1.0, -1.0}) {
                for (;;) {
                    Point trial = best_pt;
                    coord(trial, i) += dir * step[i];
                    if (!feasible_point(trial)) break;
                    const sns::KeyRateReport rep = evaluate(trial);
                    if (rep.rate_per_pulse > best_rep.rate_per_pulse) {
                        best_pt = trial;
                        best_rep = rep;
                    } else {
                        break;
                    }
                }
            }
        }
        const double gain = best_rep.rate_per_pulse - before;
        if (gain < opt.rel_tol * std::max(before, 1e-300)) {
            bool shrunk = false;
            for (double& s : step) {
                s *= 0.5;
                shrunk = true;
            }
            // Converged once the steps are negligible relative to the box.
            if (shrunk && step[0] < 1e-4 * (bounds.mu_y_max - bounds.mu_y_min)) break;
        }
    }

    OptimizeResult out;
    out.best = params_of(best_pt);
    out.report = best_rep;
    out.evaluations = evals;
    out.used_warm_start = warm;
    return out;
}

}  // namespace qnet::opt
