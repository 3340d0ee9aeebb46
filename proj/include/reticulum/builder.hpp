#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "reticulum/dataset.hpp"
#include "reticulum/errors.hpp"
#include "reticulum/likelihood.hpp"
#include "reticulum/optimizer.hpp"
#include "reticulum/random.hpp"
#include "reticulum/tree.hpp"

namespace reticulum {

/// Operator-chosen hyperparameters of the construction loop.
struct TrainConfig {
    std::size_t max_attempts = 50;
    /// Deepest level a leaf may occupy; leaves at this level are never extended.
    unsigned max_depth = 6;
    double prior_alpha = 1.0;
    double prior_beta = 1.0;
    /// Length of the initial normal vector in pseudo-range units.
    double initial_stiffness = 1.0;
    double step_size = 0.05;
    /// Split between the local and the global phase; odd totals favour local.
    std::size_t total_gradient_steps = 400;
    double pruning_factor = 1.05;
    std::uint64_t rng_seed = 0;
    Coordinates coordinates = Coordinates::cartesian;

    std::size_t local_steps() const { return (total_gradient_steps + 1) / 2; }
    std::size_t global_steps() const { return total_gradient_steps / 2; }

    void validate() const {
        if (max_depth < 1 || max_depth > kSupportedDepth) {
            throw ConfigError("max_depth must lie in [1, " + std::to_string(kSupportedDepth) + "]");
        }
        if (!(prior_alpha > 0.0) || !(prior_beta > 0.0) || !std::isfinite(prior_alpha) ||
            !std::isfinite(prior_beta)) {
            throw ConfigError("prior_alpha and prior_beta must be positive");
        }
        if (!(initial_stiffness > 0.0) || !std::isfinite(initial_stiffness)) {
            throw ConfigError("initial_stiffness must be positive");
        }
        if (!(step_size > 0.0) || !std::isfinite(step_size)) throw ConfigError("step_size must be positive");
        if (total_gradient_steps < 1) throw ConfigError("total_gradient_steps must be at least 1");
        if (!(pruning_factor >= 1.0 && pruning_factor <= 1.2)) {
            throw ConfigError("pruning_factor must lie in [1, 1.2]");
        }
    }

    bool operator==(const TrainConfig&) const = default;
};

/// Leaves that may still be extended, with their probability of selection.
/// A leaf is chosen proportionally to c_ℓ / Σ c_ℓ*; when every eligible
/// potential is zero the choice is uniform.
inline std::vector<std::pair<NodeId, double>> selection_probabilities(const Reticulum& tree,
                                                                      unsigned max_depth) {
    std::vector<std::pair<NodeId, double>> out;
    double total = 0.0;
    for (const auto& [id, stats] : tree.leaves()) {
        if (id.level() < max_depth) {
            out.emplace_back(id, stats.potential);
            total += stats.potential;
        }
    }
    for (auto& [id, p] : out) {
        p = total < 0.0 ? p / total : 1.0 / static_cast<double>(out.size());
    }
    return out;
}

/// Draws the leaf to extend; nullopt when no leaf is eligible.
inline std::optional<NodeId> select_leaf(const Reticulum& tree, unsigned max_depth, Pcg32& rng) {
    const auto probs = selection_probabilities(tree, max_depth);
    if (probs.empty()) return std::nullopt;
    const double u = rng.uniform();
    double cumulative = 0.0;
    for (const auto& [id, p] : probs) {
        cumulative += p;
        if (u < cumulative) return id;
    }
    // Rounding left the cumulative sum just below 1.
    for (auto it = probs.rbegin(); it != probs.rend(); ++it) {
        if (it->second > 0.0) return it->first;
    }
    return probs.back().first;
}

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7). `sorted` must be ascending and non-empty.
inline double quantile_type7(std::span<const double> sorted, double q) {
    const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Uniform direction on the unit sphere in ℝᵈ from normalized Gaussians.
inline std::vector<double> sample_unit_direction(std::size_t d, Pcg32& rng) {
    std::vector<double> u(d);
    double norm = 0.0;
    do {
        norm = 0.0;
        for (double& v : u) {
            v = rng.normal();
            norm += v * v;
        }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (double& v : u) v /= norm;
    return u;
}

/// Pseudo-range and median of the points routed to `leaf` with incoming
/// probability strictly above one half.
struct LeafSpread {
    std::vector<double> pseudo_range;
    std::vector<double> median;
    std::size_t points = 0;
};

inline LeafSpread leaf_spread(const Reticulum& tree, NodeId leaf, const Dataset& data) {
    const MembershipMatrix p = memberships(tree, data);
    const auto col_it = std::find(p.leaves.begin(), p.leaves.end(), leaf);
    if (col_it == p.leaves.end()) throw StructuralError("leaf_spread: #" + std::to_string(leaf.index) + " is not a leaf");
    const auto col = static_cast<std::size_t>(col_it - p.leaves.begin());

    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (p(i, col) > 0.5) rows.push_back(i);
    }
    LeafSpread out;
    out.points = rows.size();
    if (rows.empty()) return out;
    std::vector<double> column(rows.size());
    for (std::size_t k = 0; k < data.dim(); ++k) {
        for (std::size_t r = 0; r < rows.size(); ++r) column[r] = data.row(rows[r])[k];
        std::sort(column.begin(), column.end());
        double range = quantile_type7(column, 0.75) - quantile_type7(column, 0.25);
        if (!(range > 0.0)) range = 1.0;
        out.pseudo_range.push_back(range);
        out.median.push_back(quantile_type7(column, 0.5));
    }
    return out;
}

/// Initial hyperplane for a new node at `leaf`: a uniform random direction,
/// divided per dimension by the pseudo-range, scaled by the stiffness and
/// shifted to pass through the median. nullopt when fewer than two points
/// reach the leaf with probability above one half.
inline std::optional<NodeWeights> sample_initial_weights(const Reticulum& tree, NodeId leaf,
                                                         const Dataset& data, double initial_stiffness,
                                                         Pcg32& rng) {
    const LeafSpread spread = leaf_spread(tree, leaf, data);
    if (spread.points < 2) return std::nullopt;
    const auto direction = sample_unit_direction(data.dim(), rng);
    NodeWeights w = NodeWeights::zeros(data.dim());
    for (std::size_t k = 0; k < data.dim(); ++k) {
        w.normal[k] = initial_stiffness * direction[k] / spread.pseudo_range[k];
        w.intercept -= w.normal[k] * spread.median[k];
    }
    return w;
}

/// A split removed by pruning.
struct PrunedSplit {
    NodeId id;
    double children_potential = 0.0;
    double parent_potential = 0.0;
    double penalty = 0.0;
};

/// ln(factor^(level + 1)), the evidence a split at `level` must add.
inline double pruning_penalty(unsigned level, double pruning_factor) {
    return static_cast<double>(level + 1) * std::log(pruning_factor);
}

/// Collapses every split whose children's summed potential is not better
/// than the pooled parent's potential plus the level penalty. Works bottom-up
/// from parents of two leaves and repeats until no split qualifies, so a
/// collapse can expose its own parent within the same call. Requires fresh
/// leaf statistics.
inline std::vector<PrunedSplit> prune(Reticulum& tree, double pruning_factor) {
    if (!tree.stats_fresh()) throw StructuralError("prune: leaf statistics are stale");
    std::vector<PrunedSplit> removed;
    bool changed = true;
    while (changed) {
        changed = false;
        std::vector<NodeId> candidates;
        for (const auto& [id, w] : tree.nodes()) {
            if (tree.is_leaf(id.left()) && tree.is_leaf(id.right())) candidates.push_back(id);
        }
        for (auto it = candidates.rbegin(); it != candidates.rend(); ++it) {
            const NodeId id = *it;
            const double children = tree.leaf(id.left()).potential + tree.leaf(id.right()).potential;
            const double parent = tree.pooled_stats(id).potential;
            const double penalty = pruning_penalty(id.level(), pruning_factor);
            if (!(children > parent + penalty)) {
                tree.collapse(id);
                removed.push_back(PrunedSplit{id, children, parent, penalty});
                changed = true;
            }
        }
    }
    return removed;
}

enum class TraceStage { sampled, local, global, pruned, skipped };

inline const char* to_string(TraceStage stage) {
    switch (stage) {
        case TraceStage::sampled: return "sampled";
        case TraceStage::local: return "local";
        case TraceStage::global: return "global";
        case TraceStage::pruned: return "pruned";
        case TraceStage::skipped: return "skipped";
    }
    return "unknown";
}

/// One step of one construction attempt. `weights` are the new node's weights
/// at that stage (empty for skipped attempts), `bound` the bound after it.
struct TraceEvent {
    std::size_t attempt = 0;
    TraceStage stage = TraceStage::sampled;
    std::optional<NodeId> leaf;
    NodeWeights weights;
    double bound = 0.0;
    std::vector<PrunedSplit> pruned;
    Reticulum snapshot{1};
};

using ConstructionTrace = std::vector<TraceEvent>;

struct FitResult {
    Reticulum tree;
    ConstructionTrace trace;
};

/// Adaptive construction: starting from a single leaf, each attempt picks a
/// leaf by unexplained potential, seeds a new split there, trains it alone,
/// then trains all splits jointly, and finally prunes.
inline FitResult fit(const Dataset& data, const TrainConfig& config) {
    config.validate();
    if (data.empty()) throw ConfigError("fit: dataset is empty");

    Reticulum tree(data.dim(), config.prior_alpha, config.prior_beta);
    refresh_leaf_stats(tree, data);
    ConstructionTrace trace;
    Pcg32 rng(config.rng_seed);
    const AdamParameters adam{config.step_size};

    const auto record = [&](std::size_t attempt, TraceStage stage, std::optional<NodeId> leaf,
                            std::vector<PrunedSplit> pruned = {}) {
        TraceEvent ev{attempt, stage, leaf, {}, cached_bound(tree), std::move(pruned), tree};
        if (leaf && tree.is_internal(*leaf)) ev.weights = tree.weights(*leaf);
        trace.push_back(std::move(ev));
    };

    for (std::size_t attempt = 0; attempt < config.max_attempts; ++attempt) {
        const auto leaf = select_leaf(tree, config.max_depth, rng);
        if (!leaf) {
            record(attempt, TraceStage::skipped, std::nullopt);
            continue;
        }
        const auto weights = sample_initial_weights(tree, *leaf, data, config.initial_stiffness, rng);
        if (!weights) {
            record(attempt, TraceStage::skipped, leaf);
            continue;
        }
        tree.split(*leaf, *weights);
        refresh_leaf_stats(tree, data);
        record(attempt, TraceStage::sampled, leaf);

        AdamState local(adam);
        ascend(tree, data, OptimizeScope::local(*leaf), config.local_steps(), local, config.coordinates);
        record(attempt, TraceStage::local, leaf);

        if (config.global_steps() > 0) {
            AdamState global(adam);
            ascend(tree, data, OptimizeScope::global(), config.global_steps(), global, config.coordinates);
        }
        record(attempt, TraceStage::global, leaf);

        auto pruned = prune(tree, config.pruning_factor);
        record(attempt, TraceStage::pruned, leaf, std::move(pruned));
    }
    refresh_leaf_stats(tree, data);
    return FitResult{std::move(tree), std::move(trace)};
}

}  // namespace reticulum
