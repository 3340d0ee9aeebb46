#pragma once

#include <vector>

#include "reticulum/dataset.hpp"
#include "reticulum/numerics.hpp"
#include "reticulum/tree.hpp"

namespace reticulum {

/// c_ℓ = ln(B(α'_ℓ, β'_ℓ) / B(α, β)). Never positive when α' ≥ α and β' ≥ β;
/// the more heterogeneous the leaf, the more negative.
inline double unexplained_potential(double alpha_post, double beta_post, double prior_alpha,
                                    double prior_beta) {
    return log_beta(alpha_post, beta_post) - log_beta(prior_alpha, prior_beta);
}

/// Jensen lower bound c = Σ_ℓ c_ℓ of the expected marginal log-likelihood,
/// evaluated at the tree's current weights. Does not touch the tree's cache.
inline double bound(const Reticulum& tree, const Dataset& data) {
    double c = 0.0;
    for (const LeafStats& s : compute_leaf_stats(tree, data)) c += s.potential;
    return c;
}

/// Σ_ℓ c_ℓ from the tree's cached leaf statistics.
inline double cached_bound(const Reticulum& tree) {
    double c = 0.0;
    for (const auto& [id, s] : tree.leaves()) c += s.potential;
    return c;
}

}  // namespace reticulum
