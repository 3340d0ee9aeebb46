#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "reticulum/dataset.hpp"
#include "reticulum/errors.hpp"
#include "reticulum/numerics.hpp"

namespace reticulum {

/// Deepest level the heap numbering supports. Leaves may sit at this level.
inline constexpr unsigned kSupportedDepth = 10;

/// Node position in implicit binary-heap numbering: root 0, left child of j
/// is 2j + 1, right child 2j + 2. Left children therefore have odd ids.
struct NodeId {
    std::uint32_t index = 0;

    static constexpr NodeId root() { return NodeId{0}; }

    constexpr NodeId left() const { return NodeId{2 * index + 1}; }
    constexpr NodeId right() const { return NodeId{2 * index + 2}; }
    constexpr NodeId parent() const { return NodeId{(index - 1) / 2}; }
    constexpr NodeId sibling() const { return is_left() ? NodeId{index + 1} : NodeId{index - 1}; }
    constexpr bool is_root() const { return index == 0; }
    constexpr bool is_left() const { return index % 2 == 1; }
    constexpr unsigned level() const {
        return static_cast<unsigned>(std::bit_width(index + 1u)) - 1u;
    }

    constexpr auto operator<=>(const NodeId&) const = default;
};

/// Affine hyperplane w₀ + Σ w_k x_k defining one sigmoid gate.
struct NodeWeights {
    double intercept = 0.0;
    std::vector<double> normal;

    NodeWeights() = default;
    NodeWeights(double w0, std::vector<double> w) : intercept(w0), normal(std::move(w)) {}

    /// Zero hyperplane of dimension d; its gate is 0.5 everywhere.
    static NodeWeights zeros(std::size_t d) { return NodeWeights(0.0, std::vector<double>(d, 0.0)); }

    std::size_t dim() const { return normal.size(); }

    /// Number of parameters, d + 1.
    std::size_t size() const { return normal.size() + 1; }

    /// Parameter k with k = 0 the intercept.
    double operator[](std::size_t k) const { return k == 0 ? intercept : normal[k - 1]; }
    double& operator[](std::size_t k) { return k == 0 ? intercept : normal[k - 1]; }

    double signed_distance(std::span<const double> x) const {
        double t = intercept;
        for (std::size_t k = 0; k < normal.size(); ++k) t += normal[k] * x[k];
        return t;
    }

    NodeWeights scaled(double factor) const {
        NodeWeights out = *this;
        out.intercept *= factor;
        for (double& w : out.normal) w *= factor;
        return out;
    }

    bool all_finite() const {
        return std::isfinite(intercept) &&
               std::all_of(normal.begin(), normal.end(), [](double w) { return std::isfinite(w); });
    }

    bool operator==(const NodeWeights&) const = default;
};

/// Jensen-expected Beta posterior of a leaf and its unexplained potential.
struct LeafStats {
    double alpha_post = 1.0;
    double beta_post = 1.0;
    double potential = 0.0;

    /// p(y = 1 | x ∈ ℓ) = β' / (α' + β').
    double proba_one() const { return beta_post / (alpha_post + beta_post); }

    bool operator==(const LeafStats&) const = default;
};

/// Gate value: the probability routed to the left child.
inline double gate(const NodeWeights& weights, std::span<const double> x) {
    if (x.size() != weights.dim()) {
        throw StructuralError("gate: point of dimension " + std::to_string(x.size()) +
                              " against hyperplane of dimension " + std::to_string(weights.dim()));
    }
    return sigmoid(weights.signed_distance(x));
}

/// A soft binary decision tree with Beta-Binomial leaves.
///
/// Leaf statistics are a cache over the current weights and data: any weight
/// or topology change marks them stale until `refresh_leaf_stats` runs again.
class Reticulum {
public:
    explicit Reticulum(std::size_t dim, double prior_alpha = 1.0, double prior_beta = 1.0)
        : dim_(dim), prior_alpha_(prior_alpha), prior_beta_(prior_beta) {
        if (dim == 0) throw StructuralError("Reticulum: dimension must be at least 1");
        detail::require_positive(prior_alpha, "Reticulum prior alpha");
        detail::require_positive(prior_beta, "Reticulum prior beta");
        leaves_.emplace(NodeId::root(), prior_stats());
    }

    /// Rebuilds a tree from explicit parts, validating every structural invariant.
    static Reticulum from_parts(std::size_t dim, double prior_alpha, double prior_beta,
                                std::map<NodeId, NodeWeights> nodes,
                                std::map<NodeId, LeafStats> leaves) {
        Reticulum tree(dim, prior_alpha, prior_beta);
        tree.nodes_ = std::move(nodes);
        tree.leaves_ = std::move(leaves);
        tree.stats_fresh_ = true;
        tree.validate();
        return tree;
    }

    std::size_t dim() const { return dim_; }
    double prior_alpha() const { return prior_alpha_; }
    double prior_beta() const { return prior_beta_; }
    LeafStats prior_stats() const { return LeafStats{prior_alpha_, prior_beta_, 0.0}; }

    const std::map<NodeId, NodeWeights>& nodes() const { return nodes_; }
    const std::map<NodeId, LeafStats>& leaves() const { return leaves_; }
    std::size_t internal_count() const { return nodes_.size(); }
    std::size_t leaf_count() const { return leaves_.size(); }

    bool is_leaf(NodeId id) const { return leaves_.contains(id); }
    bool is_internal(NodeId id) const { return nodes_.contains(id); }
    bool stats_fresh() const { return stats_fresh_; }

    /// Deepest level occupied by any leaf.
    unsigned depth() const {
        unsigned d = 0;
        for (const auto& [id, stats] : leaves_) d = std::max(d, id.level());
        return d;
    }

    const NodeWeights& weights(NodeId id) const {
        const auto it = nodes_.find(id);
        if (it == nodes_.end()) throw StructuralError("Reticulum: node " + describe(id) + " is not internal");
        return it->second;
    }

    const LeafStats& leaf(NodeId id) const {
        const auto it = leaves_.find(id);
        if (it == leaves_.end()) throw StructuralError("Reticulum: node " + describe(id) + " is not a leaf");
        return it->second;
    }

    void set_weights(NodeId id, NodeWeights w) {
        check_weights(w);
        auto it = nodes_.find(id);
        if (it == nodes_.end()) throw StructuralError("Reticulum: node " + describe(id) + " is not internal");
        it->second = std::move(w);
        stats_fresh_ = false;
    }

    /// Turns a leaf into an internal node with two fresh leaves at the prior.
    void split(NodeId leaf_id, NodeWeights w) {
        check_weights(w);
        if (!is_leaf(leaf_id)) throw StructuralError("Reticulum: cannot split non-leaf " + describe(leaf_id));
        if (leaf_id.level() + 1 > kSupportedDepth) {
            throw StructuralError("Reticulum: splitting " + describe(leaf_id) +
                                  " exceeds the supported depth " + std::to_string(kSupportedDepth));
        }
        leaves_.erase(leaf_id);
        nodes_.emplace(leaf_id, std::move(w));
        leaves_.emplace(leaf_id.left(), prior_stats());
        leaves_.emplace(leaf_id.right(), prior_stats());
        stats_fresh_ = false;
    }

    /// Replaces an internal node whose children are both leaves by a leaf.
    /// The new leaf pools the children's pseudo-counts; other leaves keep
    /// their cached statistics.
    void collapse(NodeId id) {
        if (!is_internal(id) || !is_leaf(id.left()) || !is_leaf(id.right())) {
            throw StructuralError("Reticulum: collapse requires both children of " + describe(id) +
                                  " to be leaves");
        }
        const LeafStats pooled = pooled_stats(id);
        leaves_.erase(id.left());
        leaves_.erase(id.right());
        nodes_.erase(id);
        leaves_.emplace(id, pooled);
    }

    /// Statistics the node would have as a leaf, from its two leaf children.
    LeafStats pooled_stats(NodeId id) const {
        const LeafStats& l = leaf(id.left());
        const LeafStats& r = leaf(id.right());
        LeafStats pooled;
        pooled.alpha_post = l.alpha_post + r.alpha_post - prior_alpha_;
        pooled.beta_post = l.beta_post + r.beta_post - prior_beta_;
        pooled.alpha_post = std::max(pooled.alpha_post, prior_alpha_);
        pooled.beta_post = std::max(pooled.beta_post, prior_beta_);
        pooled.potential = log_beta(pooled.alpha_post, pooled.beta_post) -
                           log_beta(prior_alpha_, prior_beta_);
        return pooled;
    }

    /// Installs statistics for every leaf, in ascending leaf-id order.
    void set_leaf_stats(std::span<const LeafStats> stats) {
        if (stats.size() != leaves_.size()) {
            throw StructuralError("Reticulum: expected " + std::to_string(leaves_.size()) +
                                  " leaf statistics, got " + std::to_string(stats.size()));
        }
        std::size_t k = 0;
        for (auto& [id, s] : leaves_) s = stats[k++];
        stats_fresh_ = true;
    }

    /// Throws StructuralError unless the tree is a well-formed binary tree.
    void validate() const {
        if (!(prior_alpha_ > 0.0) || !(prior_beta_ > 0.0)) {
            throw StructuralError("Reticulum: priors must be positive");
        }
        if (leaves_.empty()) throw StructuralError("Reticulum: no leaves");
        for (const auto& [id, w] : nodes_) {
            if (leaves_.contains(id)) throw StructuralError("Reticulum: " + describe(id) + " is both node and leaf");
            if (!id.is_root() && !nodes_.contains(id.parent())) {
                throw StructuralError("Reticulum: parent of " + describe(id) + " missing");
            }
            for (NodeId child : {id.left(), id.right()}) {
                if (!nodes_.contains(child) && !leaves_.contains(child)) {
                    throw StructuralError("Reticulum: child " + describe(child) + " of " + describe(id) +
                                          " missing");
                }
            }
            if (w.dim() != dim_ || !w.all_finite()) {
                throw StructuralError("Reticulum: weights of " + describe(id) + " malformed");
            }
        }
        for (const auto& [id, s] : leaves_) {
            if (id.level() > kSupportedDepth) throw StructuralError("Reticulum: leaf too deep");
            if (!id.is_root() && !nodes_.contains(id.parent())) {
                throw StructuralError("Reticulum: parent of leaf " + describe(id) + " missing");
            }
            if (!(s.alpha_post > 0.0) || !(s.beta_post > 0.0)) {
                throw StructuralError("Reticulum: leaf " + describe(id) + " has non-positive counts");
            }
        }
        if (!nodes_.empty() && !nodes_.contains(NodeId::root())) {
            throw StructuralError("Reticulum: internal nodes without a root");
        }
        if (nodes_.empty() && !leaves_.contains(NodeId::root())) {
            throw StructuralError("Reticulum: single leaf must be the root");
        }
    }

    bool operator==(const Reticulum&) const = default;

private:
    static std::string describe(NodeId id) { return "#" + std::to_string(id.index); }

    void check_weights(const NodeWeights& w) const {
        if (w.dim() != dim_) {
            throw StructuralError("Reticulum: weights of dimension " + std::to_string(w.dim()) +
                                  " for tree of dimension " + std::to_string(dim_));
        }
        if (!w.all_finite()) throw StructuralError("Reticulum: non-finite weights");
    }

    std::size_t dim_;
    double prior_alpha_;
    double prior_beta_;
    std::map<NodeId, NodeWeights> nodes_;
    std::map<NodeId, LeafStats> leaves_;
    bool stats_fresh_ = true;
};

/// Flattened view of a tree for per-point evaluation. Slots are all node ids
/// in ascending order, so every parent precedes its children.
class TreeLayout {
public:
    static constexpr int kNone = -1;

    explicit TreeLayout(const Reticulum& tree) : dim_(tree.dim()) {
        std::vector<NodeId> ids;
        ids.reserve(tree.internal_count() + tree.leaf_count());
        for (const auto& [id, w] : tree.nodes()) ids.push_back(id);
        for (const auto& [id, s] : tree.leaves()) ids.push_back(id);
        std::sort(ids.begin(), ids.end());
        ids_ = ids;
        const auto slot_of = [&](NodeId id) {
            return static_cast<int>(std::lower_bound(ids.begin(), ids.end(), id) - ids.begin());
        };
        left_.assign(ids.size(), kNone);
        right_.assign(ids.size(), kNone);
        leaf_column_.assign(ids.size(), kNone);
        weights_.assign(ids.size(), nullptr);
        for (std::size_t s = 0; s < ids.size(); ++s) {
            const auto it = tree.nodes().find(ids[s]);
            if (it != tree.nodes().end()) {
                left_[s] = slot_of(ids[s].left());
                right_[s] = slot_of(ids[s].right());
                weights_[s] = &it->second;
                internal_slots_.push_back(s);
            }
        }
        // Leaf columns follow ascending leaf-id order, matching Reticulum::leaves().
        for (const auto& [id, stats] : tree.leaves()) {
            const auto s = static_cast<std::size_t>(slot_of(id));
            leaf_column_[s] = static_cast<int>(leaf_slots_.size());
            leaf_slots_.push_back(s);
        }
    }

    std::size_t slot_count() const { return ids_.size(); }
    std::size_t leaf_count() const { return leaf_slots_.size(); }
    std::size_t dim() const { return dim_; }
    NodeId id(std::size_t slot) const { return ids_[slot]; }
    bool is_internal(std::size_t slot) const { return left_[slot] != kNone; }
    int left(std::size_t slot) const { return left_[slot]; }
    int right(std::size_t slot) const { return right_[slot]; }
    const NodeWeights& weights(std::size_t slot) const { return *weights_[slot]; }
    std::span<const std::size_t> internal_slots() const { return internal_slots_; }
    std::span<const std::size_t> leaf_slots() const { return leaf_slots_; }
    int leaf_column(std::size_t slot) const { return leaf_column_[slot]; }

    /// Fills `incoming[s]`, the product of gates from the root down to slot s,
    /// and `gates[s]` for internal slots.
    void forward(std::span<const double> x, std::span<double> incoming, std::span<double> gates) const {
        if (x.size() != dim_) {
            throw StructuralError("forward: point of dimension " + std::to_string(x.size()) +
                                  " for tree of dimension " + std::to_string(dim_));
        }
        incoming[0] = 1.0;
        for (std::size_t s : internal_slots_) {
            const double g = sigmoid(weights_[s]->signed_distance(x));
            gates[s] = g;
            incoming[static_cast<std::size_t>(left_[s])] = incoming[s] * g;
            incoming[static_cast<std::size_t>(right_[s])] = incoming[s] * (1.0 - g);
        }
    }

private:
    std::size_t dim_;
    std::vector<NodeId> ids_;
    std::vector<int> left_;
    std::vector<int> right_;
    std::vector<int> leaf_column_;
    std::vector<const NodeWeights*> weights_;
    std::vector<std::size_t> internal_slots_;
    std::vector<std::size_t> leaf_slots_;
};

/// m × |𝓛| matrix of leaf memberships p(xᵢ ∈ ℓ), columns in ascending leaf-id order.
struct MembershipMatrix {
    std::size_t rows = 0;
    std::vector<NodeId> leaves;
    std::vector<double> values;

    std::size_t cols() const { return leaves.size(); }
    double operator()(std::size_t i, std::size_t col) const { return values[i * leaves.size() + col]; }
    std::span<const double> row(std::size_t i) const {
        return {values.data() + i * leaves.size(), leaves.size()};
    }
};

inline MembershipMatrix memberships(const Reticulum& tree, std::span<const double> features,
                                    std::size_t rows) {
    if (features.size() != rows * tree.dim()) {
        throw StructuralError("memberships: feature block does not match tree dimension");
    }
    const TreeLayout layout(tree);
    MembershipMatrix out;
    out.rows = rows;
    for (const auto& [id, s] : tree.leaves()) out.leaves.push_back(id);
    out.values.resize(rows * out.leaves.size());
    std::vector<double> incoming(layout.slot_count());
    std::vector<double> gates(layout.slot_count());
    const std::size_t d = tree.dim();
    for (std::size_t i = 0; i < rows; ++i) {
        layout.forward(features.subspan(i * d, d), incoming, gates);
        for (std::size_t c = 0; c < layout.leaf_count(); ++c) {
            out.values[i * out.leaves.size() + c] = incoming[layout.leaf_slots()[c]];
        }
    }
    return out;
}

inline MembershipMatrix memberships(const Reticulum& tree, const Dataset& data) {
    if (data.dim() != tree.dim()) {
        throw StructuralError("memberships: dataset dimension " + std::to_string(data.dim()) +
                              " differs from tree dimension " + std::to_string(tree.dim()));
    }
    return memberships(tree, data.features(), data.size());
}

/// Jensen-expected posterior counts for every leaf (ascending id order):
/// α'_ℓ = α + Σ p(xᵢ∈ℓ)(1 − yᵢ), β'_ℓ = β + Σ p(xᵢ∈ℓ) yᵢ.
inline std::vector<LeafStats> compute_leaf_stats(const Reticulum& tree, const Dataset& data) {
    const MembershipMatrix p = memberships(tree, data);
    std::vector<double> zeros(p.cols(), 0.0);
    std::vector<double> ones(p.cols(), 0.0);
    for (std::size_t i = 0; i < p.rows; ++i) {
        auto& acc = data.label(i) == 1 ? ones : zeros;
        for (std::size_t c = 0; c < p.cols(); ++c) acc[c] += p(i, c);
    }
    const double prior_log_beta = log_beta(tree.prior_alpha(), tree.prior_beta());
    std::vector<LeafStats> stats(p.cols());
    for (std::size_t c = 0; c < p.cols(); ++c) {
        stats[c].alpha_post = tree.prior_alpha() + zeros[c];
        stats[c].beta_post = tree.prior_beta() + ones[c];
        stats[c].potential = log_beta(stats[c].alpha_post, stats[c].beta_post) - prior_log_beta;
    }
    return stats;
}

inline void refresh_leaf_stats(Reticulum& tree, const Dataset& data) {
    const auto stats = compute_leaf_stats(tree, data);
    tree.set_leaf_stats(stats);
}

/// p(y = 1 | x) = Σ_ℓ p(x ∈ ℓ) β'_ℓ / (α'_ℓ + β'_ℓ).
inline double predict_proba(const Reticulum& tree, std::span<const double> x) {
    if (!tree.stats_fresh()) throw StructuralError("predict_proba: leaf statistics are stale");
    const TreeLayout layout(tree);
    std::vector<double> incoming(layout.slot_count());
    std::vector<double> gates(layout.slot_count());
    layout.forward(x, incoming, gates);
    double p = 0.0;
    std::size_t c = 0;
    for (const auto& [id, stats] : tree.leaves()) {
        p += incoming[layout.leaf_slots()[c++]] * stats.proba_one();
    }
    return p;
}

inline std::vector<double> predict_proba(const Reticulum& tree, const Dataset& data) {
    if (data.dim() != tree.dim()) {
        throw StructuralError("predict_proba: dataset dimension " + std::to_string(data.dim()) +
                              " differs from tree dimension " + std::to_string(tree.dim()));
    }
    const MembershipMatrix p = memberships(tree, data);
    if (!tree.stats_fresh()) throw StructuralError("predict_proba: leaf statistics are stale");
    std::vector<double> leaf_proba;
    for (const auto& [id, stats] : tree.leaves()) leaf_proba.push_back(stats.proba_one());
    std::vector<double> out(data.size(), 0.0);
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (std::size_t c = 0; c < p.cols(); ++c) out[i] += p(i, c) * leaf_proba[c];
    }
    return out;
}

}  // namespace reticulum
