#pragma once

#include <cmath>
#include <string>

#include "reticulum/errors.hpp"

namespace reticulum {

namespace detail {

inline void require_positive(double a, const char* what) {
    if (!(a > 0.0) || !std::isfinite(a)) {
        throw DomainError(std::string(what) + ": argument must be positive and finite, got " +
                          std::to_string(a));
    }
}

}  // namespace detail

/// Natural log of the Beta function, ln B(a, b) = ln Γ(a) + ln Γ(b) − ln Γ(a + b).
///
/// Never evaluates B itself: leaf pseudo-counts reach the thousands, far
/// beyond the range where Γ is representable.
inline double log_beta(double a, double b) {
    detail::require_positive(a, "log_beta");
    detail::require_positive(b, "log_beta");
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

/// Digamma ψ(a) for a > 0.
///
/// Shifts the argument upward with ψ(x) = ψ(x + 1) − 1/x until x ≥ 10, then
/// applies the asymptotic expansion in 1/x² with Bernoulli coefficients up to
/// B₁₄. Truncation error at x = 10 is below 1e−16.
inline double digamma(double a) {
    detail::require_positive(a, "digamma");
    double shift = 0.0;
    double x = a;
    while (x < 10.0) {
        shift += 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    // -B_{2k} / (2k) for k = 1..7, evaluated by Horner in inv2.
    const double series =
        inv2 * (1.0 / 12.0 -
                inv2 * (1.0 / 120.0 -
                        inv2 * (1.0 / 252.0 -
                                inv2 * (1.0 / 240.0 -
                                        inv2 * (1.0 / 132.0 -
                                                inv2 * (691.0 / 32760.0 - inv2 * (1.0 / 12.0)))))));
    return std::log(x) - 0.5 * inv - series - shift;
}

/// Logistic sigmoid 1 / (1 + e^−t), evaluated on whichever side keeps the
/// exponential argument non-positive so it never overflows.
inline double sigmoid(double t) {
    const double e = std::exp(-std::fabs(t));
    const double num = t >= 0.0 ? 1.0 : e;
    return num / (1.0 + e);
}

}  // namespace reticulum
