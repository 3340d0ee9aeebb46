#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "reticulum/errors.hpp"
#include "reticulum/tree.hpp"

namespace reticulum {

/// Hyperplane in polar form: offset q, stiffness r and d − 1 orientation angles.
///
///     w₀ = r q
///     w₁ = r cos φ₁
///     w₂ = r sin φ₁ cos φ₂
///     ...
///     w_d = r sin φ₁ ⋯ sin φ_{d−1}
///
/// φ₁…φ_{d−2} lie in [0, π] and φ_{d−1} in [0, 2π). For d = 1 there are no
/// angles and `sign` carries the orientation of w₁.
struct PolarWeights {
    double offset = 0.0;
    double stiffness = 1.0;
    std::vector<double> angles;
    int sign = 1;

    std::size_t dim() const { return angles.size() + 1; }

    /// Parameter vector (q, r, φ₁, …, φ_{d−1}).
    std::vector<double> params() const {
        std::vector<double> p{offset, stiffness};
        p.insert(p.end(), angles.begin(), angles.end());
        return p;
    }

    static PolarWeights from_params(std::span<const double> p, int sign = 1) {
        PolarWeights out;
        out.offset = p[0];
        out.stiffness = p[1];
        out.angles.assign(p.begin() + 2, p.end());
        out.sign = sign;
        return out;
    }
};

namespace detail {

/// Unit normal u with w_k = r u_k.
inline std::vector<double> polar_unit_normal(const PolarWeights& p) {
    const std::size_t d = p.dim();
    std::vector<double> u(d);
    if (d == 1) {
        u[0] = p.sign >= 0 ? 1.0 : -1.0;
        return u;
    }
    double prod = 1.0;
    for (std::size_t k = 0; k + 1 < d; ++k) {
        u[k] = prod * std::cos(p.angles[k]);
        prod *= std::sin(p.angles[k]);
    }
    u[d - 1] = prod;
    return u;
}

}  // namespace detail

inline NodeWeights to_cartesian(const PolarWeights& p) {
    const auto u = detail::polar_unit_normal(p);
    NodeWeights w;
    w.intercept = p.stiffness * p.offset;
    w.normal.resize(u.size());
    for (std::size_t k = 0; k < u.size(); ++k) w.normal[k] = p.stiffness * u[k];
    return w;
}

/// Inverse of `to_cartesian`. Angles come from atan2 of the tail norm against
/// the leading coordinate, which stays accurate near the poles. Where the
/// tail vanishes the remaining angles are set to 0.
inline PolarWeights to_polar(const NodeWeights& w) {
    const std::size_t d = w.dim();
    if (d == 0) throw StructuralError("to_polar: empty weight vector");
    // tail[k] = ‖(w_k, …, w_d)‖ computed from the back.
    std::vector<double> tail(d + 1, 0.0);
    for (std::size_t k = d; k-- > 0;) tail[k] = std::hypot(tail[k + 1], w.normal[k]);
    const double r = tail[0];
    if (!(r > 0.0) || !std::isfinite(r)) {
        throw DomainError("to_polar: degenerate hyperplane with zero normal vector");
    }
    PolarWeights p;
    p.stiffness = r;
    p.offset = w.intercept / r;
    if (d == 1) {
        p.sign = w.normal[0] >= 0.0 ? 1 : -1;
        return p;
    }
    p.angles.assign(d - 1, 0.0);
    for (std::size_t k = 0; k + 2 < d; ++k) {
        if (tail[k] == 0.0) break;
        p.angles[k] = std::atan2(tail[k + 1], w.normal[k]);
    }
    if (tail[d - 2] > 0.0) {
        double last = std::atan2(w.normal[d - 1], w.normal[d - 2]);
        if (last < 0.0) last += 2.0 * std::numbers::pi;
        if (last >= 2.0 * std::numbers::pi) last = 0.0;
        p.angles[d - 2] = last;
    }
    return p;
}

/// Jᵀ g: the gradient with respect to (q, r, φ₁, …, φ_{d−1}) given the
/// Cartesian gradient g = (∂/∂w₀, …, ∂/∂w_d), with J the Jacobian of the
/// polar substitution.
inline std::vector<double> pullback_gradient(const PolarWeights& p, std::span<const double> cart_grad) {
    const std::size_t d = p.dim();
    if (cart_grad.size() != d + 1) {
        throw StructuralError("pullback_gradient: expected " + std::to_string(d + 1) +
                              " gradient entries, got " + std::to_string(cart_grad.size()));
    }
    const double r = p.stiffness;
    const auto u = detail::polar_unit_normal(p);
    std::vector<double> out(d + 1, 0.0);
    out[0] = r * cart_grad[0];
    out[1] = p.offset * cart_grad[0];
    for (std::size_t k = 0; k < d; ++k) out[1] += cart_grad[k + 1] * u[k];
    if (d == 1) return out;

    // ∂u_k/∂φ_i: in the product defining u_k, differentiate the single
    // factor that depends on φ_i (sin → cos for i < k, cos → −sin for i = k).
    const std::size_t n_angles = d - 1;
    for (std::size_t i = 0; i < n_angles; ++i) {
        double acc = 0.0;
        for (std::size_t k = i; k < d; ++k) {
            double du = 1.0;
            const std::size_t sines = std::min(k, n_angles);
            for (std::size_t j = 0; j < sines; ++j) {
                du *= j == i ? std::cos(p.angles[j]) : std::sin(p.angles[j]);
            }
            if (k < n_angles) du *= k == i ? -std::sin(p.angles[k]) : std::cos(p.angles[k]);
            acc += cart_grad[k + 1] * du;
        }
        out[2 + i] = r * acc;
    }
    return out;
}

}  // namespace reticulum
