#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <vector>

#include "reticulum/dataset.hpp"
#include "reticulum/errors.hpp"
#include "reticulum/numerics.hpp"
#include "reticulum/tree.hpp"

namespace reticulum {

/// ∂c/∂w for every internal node; entry k = 0 is the intercept.
using GradientTable = std::map<NodeId, std::vector<double>>;

/// Everything one pass over the data yields: leaf statistics, the bound and,
/// optionally, its gradient.
struct Evaluation {
    std::vector<LeafStats> stats;
    double bound = 0.0;
    GradientTable gradient;
};

/// Backpropagation of the bound through the gate hierarchy.
///
/// Pass 1 routes every point forward and accumulates leaf pseudo-counts, so
/// the digamma factors ψ(z) − ψ(α' + β') are known per leaf. Pass 2 revisits
/// each point: a leaf returns (1 − y)∂lnB/∂α' + y ∂lnB/∂β'; an internal node j
/// combines its children as
///
///     V_j = s_j V_left + (1 − s_j) V_right,
///
/// and ∂c/∂s_j for that point equals incoming_j · (V_left − V_right), where
/// incoming_j is the gate product from the root to j. incoming_j · V_left is
/// exactly Σ_{ℓ under left} p(x ∈ ℓ)/s_j · factor_ℓ, computed without any
/// division. The chain factor s_j(1 − s_j) x_k then gives ∂c/∂w_{k,j}.
/// Accumulation runs point by point in input order.
inline Evaluation evaluate(const Reticulum& tree, const Dataset& data, bool with_gradient = true) {
    if (data.dim() != tree.dim()) {
        throw StructuralError("evaluate: dataset dimension " + std::to_string(data.dim()) +
                              " differs from tree dimension " + std::to_string(tree.dim()));
    }
    const TreeLayout layout(tree);
    const std::size_t m = data.size();
    const std::size_t slots = layout.slot_count();
    const std::size_t d = tree.dim();

    // Cached per point: incoming products and gate values, reused across calls.
    thread_local std::vector<double> incoming;
    thread_local std::vector<double> gates;
    incoming.assign(m * slots, 0.0);
    gates.assign(m * slots, 0.0);
    std::vector<double> zeros(layout.leaf_count(), 0.0);
    std::vector<double> ones(layout.leaf_count(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        std::span<double> inc(incoming.data() + i * slots, slots);
        std::span<double> g(gates.data() + i * slots, slots);
        layout.forward(data.row(i), inc, g);
        auto& acc = data.label(i) == 1 ? ones : zeros;
        for (std::size_t c = 0; c < layout.leaf_count(); ++c) acc[c] += inc[layout.leaf_slots()[c]];
    }

    Evaluation out;
    out.stats.resize(layout.leaf_count());
    const double prior_log_beta = log_beta(tree.prior_alpha(), tree.prior_beta());
    // Per-leaf ∂lnB/∂α' and ∂lnB/∂β'.
    std::vector<double> d_alpha(layout.leaf_count());
    std::vector<double> d_beta(layout.leaf_count());
    for (std::size_t c = 0; c < layout.leaf_count(); ++c) {
        LeafStats& s = out.stats[c];
        s.alpha_post = tree.prior_alpha() + zeros[c];
        s.beta_post = tree.prior_beta() + ones[c];
        s.potential = log_beta(s.alpha_post, s.beta_post) - prior_log_beta;
        out.bound += s.potential;
        if (with_gradient) {
            const double psi_total = digamma(s.alpha_post + s.beta_post);
            d_alpha[c] = digamma(s.alpha_post) - psi_total;
            d_beta[c] = digamma(s.beta_post) - psi_total;
        }
    }
    if (!with_gradient) return out;

    std::vector<std::vector<double>> grad(slots);
    for (std::size_t s : layout.internal_slots()) grad[s].assign(d + 1, 0.0);

    std::vector<double> value(slots);
    const auto internal = layout.internal_slots();
    for (std::size_t i = 0; i < m; ++i) {
        const double* inc = incoming.data() + i * slots;
        const double* g = gates.data() + i * slots;
        const int y = data.label(i);
        for (std::size_t c = 0; c < layout.leaf_count(); ++c) {
            value[layout.leaf_slots()[c]] = y == 1 ? d_beta[c] : d_alpha[c];
        }
        const auto x = data.row(i);
        for (auto it = internal.rbegin(); it != internal.rend(); ++it) {
            const std::size_t s = *it;
            const double v_left = value[static_cast<std::size_t>(layout.left(s))];
            const double v_right = value[static_cast<std::size_t>(layout.right(s))];
            const double dc_ds = inc[s] * (v_left - v_right);
            const double ds_dt = g[s] * (1.0 - g[s]);
            const double factor = dc_ds * ds_dt;
            auto& gs = grad[s];
            gs[0] += factor;
            for (std::size_t k = 0; k < d; ++k) gs[k + 1] += factor * x[k];
            value[s] = g[s] * v_left + (1.0 - g[s]) * v_right;
        }
    }
    for (std::size_t s : layout.internal_slots()) out.gradient.emplace(layout.id(s), std::move(grad[s]));
    return out;
}

/// ∂c/∂w_{k,j} for every internal node j.
inline GradientTable backprop(const Reticulum& tree, const Dataset& data) {
    return evaluate(tree, data, true).gradient;
}

}  // namespace reticulum
