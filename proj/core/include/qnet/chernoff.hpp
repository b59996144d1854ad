#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qnet::sns {

// Multiplicative Chernoff estimators (ledger D2). Two directions are needed:
//  - expected -> realized (phi): given a known mean x, bracket the count a
//    Poisson-like process will actually produce;
//  - observed -> expected (E): given a count k, bracket the mean that
//    produced it.
// All four are monotone in their first argument and have relative half-width
// O(sqrt(beta/x)) with beta = ln(1/eps).

inline double chernoff_beta(double eps) {
    if (!(eps > 0.0 && eps < 1.0))
        throw std::domain_error("chernoff: eps must be in (0,1)");
    return std::log(1.0 / eps);
}

inline double chernoff_real_upper(double x, double eps) {
    if (x < 0.0) throw std::domain_error("chernoff: negative expectation");
    const double b = chernoff_beta(eps);
    return x + 0.5 * b + std::sqrt(2.0 * b * x + 0.25 * b * b);
}

inline double chernoff_real_lower(double x, double eps) {
    if (x < 0.0) throw std::domain_error("chernoff: negative expectation");
    const double b = chernoff_beta(eps);
    return std::max(0.0, x - std::sqrt(2.0 * b * x));
}

inline double chernoff_expected_upper(double k, double eps) {
    if (k < 0.0) throw std::domain_error("chernoff: negative count");
    const double b = chernoff_beta(eps);
    return k + b + std::sqrt(2.0 * b * k + b * b);
}

inline double chernoff_expected_lower(double k, double eps) {
    if (k < 0.0) throw std::domain_error("chernoff: negative count");
    const double b = chernoff_beta(eps);
    return std::max(0.0, k - std::sqrt(2.0 * b * k));
}

}  // namespace qnet::sns
