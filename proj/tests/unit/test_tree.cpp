#include <cmath>
#include <functional>
#include <numeric>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "reticulum/errors.hpp"
#include "reticulum/tree.hpp"

using namespace reticulum;
using reticulum::testing::random_dataset;
using reticulum::testing::random_tree;

namespace {

std::vector<double> point(std::initializer_list<double> v) { return v; }

/// Depth-2 tree with all four leaves: root 0, internal 1 and 2.
Reticulum full_depth_two(NodeWeights w0, NodeWeights w1, NodeWeights w2) {
    Reticulum tree(w0.dim());
    tree.split(NodeId{0}, std::move(w0));
    tree.split(NodeId{1}, std::move(w1));
    tree.split(NodeId{2}, std::move(w2));
    return tree;
}

/// Copies the subtree under `from` in `src` to position `to` in `dst`.
void graft(const Reticulum& src, NodeId from, Reticulum& dst, NodeId to) {
    if (!src.is_internal(from)) return;
    dst.split(to, src.weights(from));
    graft(src, from.left(), dst, to.left());
    graft(src, from.right(), dst, to.right());
}

/// Same function with node j's children exchanged and its weights negated.
Reticulum mirror(const Reticulum& tree, NodeId j) {
    Reticulum out(tree.dim(), tree.prior_alpha(), tree.prior_beta());
    std::function<void(NodeId)> copy = [&](NodeId id) {
        if (!tree.is_internal(id)) return;
        if (id == j) {
            out.split(id, tree.weights(id).scaled(-1.0));
            graft(tree, id.right(), out, id.left());
            graft(tree, id.left(), out, id.right());
            return;
        }
        out.split(id, tree.weights(id));
        copy(id.left());
        copy(id.right());
    };
    copy(NodeId::root());
    return out;
}

}  // namespace

TEST(NodeId, HeapNumbering) {
    const NodeId root = NodeId::root();
    EXPECT_EQ(root.left().index, 1u);
    EXPECT_EQ(root.right().index, 2u);
    EXPECT_EQ(NodeId{5}.parent().index, 2u);
    EXPECT_EQ(NodeId{6}.parent().index, 2u);
    EXPECT_TRUE(NodeId{5}.is_left());
    EXPECT_FALSE(NodeId{6}.is_left());
    EXPECT_EQ(NodeId{5}.sibling().index, 6u);
    EXPECT_EQ(NodeId{6}.sibling().index, 5u);
    EXPECT_EQ(NodeId{0}.level(), 0u);
    EXPECT_EQ(NodeId{2}.level(), 1u);
    EXPECT_EQ(NodeId{3}.level(), 2u);
    EXPECT_EQ(NodeId{6}.level(), 2u);
    EXPECT_EQ(NodeId{7}.level(), 3u);
    for (std::uint32_t j = 0; j < 2000; ++j) {
        EXPECT_EQ(NodeId{j}.level(), static_cast<unsigned>(std::floor(std::log2(j + 1.0))));
    }
}

TEST(Gate, ZeroHyperplaneIsHalf) {
    EXPECT_EQ(gate(NodeWeights::zeros(3), point({4.0, -1.0, 9.0})), 0.5);
}

TEST(Gate, Example) {
    EXPECT_NEAR(gate(NodeWeights(0.0, {1.0, 0.0}), point({std::log(3.0), 7.0})), 0.75, 1e-15);
}

TEST(Gate, HeavisideLimit) {
    const NodeWeights w = NodeWeights(0.3, {1.0, -2.0}).scaled(1e6);
    EXPECT_NEAR(gate(w, point({0.5, 0.1})), 1.0, 1e-12);
    EXPECT_NEAR(gate(w, point({-0.5, 0.1})), 0.0, 1e-12);
}

TEST(Gate, DimensionMismatch) {
    EXPECT_THROW(gate(NodeWeights::zeros(2), point({1.0})), StructuralError);
}

TEST(Memberships, SingleLeafIsOne) {
    Pcg32 rng(1);
    const Dataset data = random_dataset(rng, 3, 20);
    const MembershipMatrix p = memberships(Reticulum(3), data);
    ASSERT_EQ(p.cols(), 1u);
    for (std::size_t i = 0; i < data.size(); ++i) EXPECT_EQ(p(i, 0), 1.0);
}

TEST(Memberships, HalfGatesGiveQuarters) {
    const Reticulum tree = full_depth_two(NodeWeights::zeros(2), NodeWeights::zeros(2), NodeWeights::zeros(2));
    Dataset data(2);
    data.add(point({0.7, -3.0}), 1);
    const MembershipMatrix p = memberships(tree, data);
    ASSERT_EQ(p.cols(), 4u);
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(p(0, c), 0.25);
}

TEST(Memberships, HandProduct) {
    const NodeWeights w0(0.2, {1.0, -0.5});
    const NodeWeights w1(-0.4, {0.3, 2.0});
    const NodeWeights w2(1.1, {-1.5, 0.25});
    const Reticulum tree = full_depth_two(w0, w1, w2);
    const auto x = point({0.4, -0.8});
    Dataset data(2);
    data.add(x, 0);
    const double g0 = 1.0 / (1.0 + std::exp(-(0.2 + 0.4 + 0.4)));
    const double g1 = 1.0 / (1.0 + std::exp(-(-0.4 + 0.12 - 1.6)));
    const double g2 = 1.0 / (1.0 + std::exp(-(1.1 - 0.6 - 0.2)));
    const MembershipMatrix p = memberships(tree, data);
    ASSERT_EQ(p.leaves, (std::vector<NodeId>{NodeId{3}, NodeId{4}, NodeId{5}, NodeId{6}}));
    EXPECT_NEAR(p(0, 0), g0 * g1, 1e-15);
    EXPECT_NEAR(p(0, 1), g0 * (1 - g1), 1e-15);
    EXPECT_NEAR(p(0, 2), (1 - g0) * g2, 1e-15);
    EXPECT_NEAR(p(0, 3), (1 - g0) * (1 - g2), 1e-15);
}

TEST(Memberships, RowsSumToOne) {
    Pcg32 rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        const unsigned depth = 1 + trial % 6;
        const Reticulum tree = random_tree(rng, 3, depth, 3.0);
        const Dataset data = random_dataset(rng, 3, 50);
        const MembershipMatrix p = memberships(tree, data);
        for (std::size_t i = 0; i < data.size(); ++i) {
            double s = 0.0;
            for (double v : p.row(i)) {
                EXPECT_GE(v, 0.0);
                EXPECT_LE(v, 1.0);
                s += v;
            }
            EXPECT_NEAR(s, 1.0, 1e-12);
        }
    }
}

TEST(Memberships, HeavisideLimitMatchesHardRouting) {
    Pcg32 rng(4);
    int checked = 0;
    for (int trial = 0; trial < 50; ++trial) {
        Reticulum tree = random_tree(rng, 2, 4, 2.0);
        Reticulum stiff = tree;
        for (const auto& [id, w] : tree.nodes()) stiff.set_weights(id, w.scaled(1e6));
        const Dataset data = random_dataset(rng, 2, 40);
        const MembershipMatrix p = memberships(stiff, data);
        for (std::size_t i = 0; i < data.size(); ++i) {
            bool far = true;
            for (const auto& [id, w] : tree.nodes()) {
                double norm = 0.0;
                for (double v : w.normal) norm += v * v;
                if (std::fabs(w.signed_distance(data.row(i))) / std::sqrt(norm) < 1e-3) far = false;
            }
            if (!far) continue;
            NodeId at = NodeId::root();
            while (tree.is_internal(at)) at = tree.weights(at).signed_distance(data.row(i)) > 0 ? at.left() : at.right();
            for (std::size_t c = 0; c < p.cols(); ++c) EXPECT_EQ(p(i, c), p.leaves[c] == at ? 1.0 : 0.0);
            ++checked;
        }
    }
    EXPECT_GT(checked, 1500);
}

TEST(Memberships, DimensionMismatch) {
    Dataset data(3);
    data.add(point({1.0, 2.0, 3.0}), 0);
    EXPECT_THROW(memberships(Reticulum(2), data), StructuralError);
}

TEST(RefreshLeafStats, EmptyDataLeavesPrior) {
    Reticulum tree(2, 2.0, 3.0);
    tree.split(NodeId{0}, NodeWeights(0.1, {1.0, 1.0}));
    refresh_leaf_stats(tree, Dataset(2));
    for (const auto& [id, s] : tree.leaves()) EXPECT_EQ(s, (LeafStats{2.0, 3.0, 0.0}));
}

TEST(RefreshLeafStats, SinglePositivePoint) {
    Reticulum tree(1);
    Dataset data(1);
    data.add(point({0.0}), 1);
    refresh_leaf_stats(tree, data);
    const LeafStats& s = tree.leaf(NodeId{0});
    EXPECT_EQ(s.alpha_post, 1.0);
    EXPECT_EQ(s.beta_post, 2.0);
    EXPECT_NEAR(s.potential, std::log(0.5), 1e-15);
}

TEST(RefreshLeafStats, SymmetricSplit) {
    Reticulum tree(1);
    tree.split(NodeId{0}, NodeWeights(0.0, {0.0}));
    Dataset data(1);
    data.add(point({1.0}), 0);
    data.add(point({2.0}), 1);
    refresh_leaf_stats(tree, data);
    for (const auto& [id, s] : tree.leaves()) {
        EXPECT_DOUBLE_EQ(s.alpha_post, 1.5);
        EXPECT_DOUBLE_EQ(s.beta_post, 1.5);
    }
}

TEST(RefreshLeafStats, ConservesPseudoCounts) {
    Pcg32 rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        const double a = rng.uniform(0.5, 3.0);
        const double b = rng.uniform(0.5, 3.0);
        Reticulum tree = random_tree(rng, 2, 5, 2.0, 0.7, a, b);
        const Dataset data = random_dataset(rng, 2, 200);
        refresh_leaf_stats(tree, data);
        double total = 0.0;
        for (const auto& [id, s] : tree.leaves()) {
            total += (s.alpha_post - a) + (s.beta_post - b);
            EXPECT_GE(s.alpha_post, a);
            EXPECT_GE(s.beta_post, b);
        }
        EXPECT_NEAR(total, 200.0, 1e-9);
    }
}

TEST(RefreshLeafStats, Idempotent) {
    Pcg32 rng(8);
    Reticulum tree = random_tree(rng, 2, 3, 1.0);
    const Dataset data = random_dataset(rng, 2, 30);
    refresh_leaf_stats(tree, data);
    const Reticulum once = tree;
    refresh_leaf_stats(tree, data);
    EXPECT_EQ(tree, once);
}

TEST(PredictProba, PriorMean) {
    Reticulum tree(2);
    EXPECT_EQ(predict_proba(tree, point({1.0, 1.0})), 0.5);
}

TEST(PredictProba, PosteriorMean) {
    Reticulum tree(1);
    Dataset data(1);
    for (int i = 0; i < 3; ++i) data.add(point({double(i)}), 1);
    refresh_leaf_stats(tree, data);
    EXPECT_NEAR(predict_proba(tree, point({5.0})), 0.8, 1e-15);
}

TEST(PredictProba, ComplementSumsToOne) {
    Pcg32 rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        Reticulum tree = random_tree(rng, 2, 4, 2.0);
        const Dataset data = random_dataset(rng, 2, 40);
        refresh_leaf_stats(tree, data);
        const MembershipMatrix p = memberships(tree, data);
        const auto p1 = predict_proba(tree, data);
        for (std::size_t i = 0; i < data.size(); ++i) {
            double p0 = 0.0;
            std::size_t c = 0;
            for (const auto& [id, s] : tree.leaves()) p0 += p(i, c++) * s.alpha_post / (s.alpha_post + s.beta_post);
            EXPECT_NEAR(p0 + p1[i], 1.0, 1e-12);
            EXPECT_GT(p1[i], 0.0);
            EXPECT_LT(p1[i], 1.0);
        }
    }
}

TEST(PredictProba, ChildSwapSymmetry) {
    Pcg32 rng(12);
    for (int trial = 0; trial < 30; ++trial) {
        Reticulum tree = random_tree(rng, 2, 4, 2.0);
        const Dataset data = random_dataset(rng, 2, 40);
        std::vector<NodeId> ids;
        for (const auto& [id, w] : tree.nodes()) ids.push_back(id);
        Reticulum swapped = mirror(tree, ids[rng.below(static_cast<std::uint32_t>(ids.size()))]);
        refresh_leaf_stats(tree, data);
        refresh_leaf_stats(swapped, data);
        const auto a = predict_proba(tree, data);
        const auto b = predict_proba(swapped, data);
        for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
    }
}

TEST(PredictProba, StaleStatsRejected) {
    Reticulum tree(1);
    tree.split(NodeId{0}, NodeWeights(0.0, {1.0}));
    EXPECT_THROW(predict_proba(tree, point({0.0})), StructuralError);
}

TEST(Reticulum, SplitAndCollapse) {
    Reticulum tree(2);
    tree.split(NodeId{0}, NodeWeights(0.0, {1.0, 0.0}));
    EXPECT_EQ(tree.internal_count(), 1u);
    EXPECT_EQ(tree.leaf_count(), 2u);
    EXPECT_EQ(tree.depth(), 1u);
    EXPECT_THROW(tree.split(NodeId{0}, NodeWeights::zeros(2)), StructuralError);
    EXPECT_THROW(tree.split(NodeId{1}, NodeWeights::zeros(3)), StructuralError);
    EXPECT_THROW(tree.split(NodeId{1}, NodeWeights(std::nan(""), {0.0, 0.0})), StructuralError);
    Dataset data(2);
    data.add(point({1.0, 0.0}), 1);
    data.add(point({-1.0, 0.0}), 0);
    refresh_leaf_stats(tree, data);
    const LeafStats pooled = tree.pooled_stats(NodeId{0});
    EXPECT_NEAR(pooled.alpha_post, 2.0, 1e-12);
    EXPECT_NEAR(pooled.beta_post, 2.0, 1e-12);
    tree.collapse(NodeId{0});
    EXPECT_EQ(tree.internal_count(), 0u);
    EXPECT_NEAR(tree.leaf(NodeId{0}).potential, std::log(1.0 / 6.0), 1e-12);
    EXPECT_THROW(tree.collapse(NodeId{0}), StructuralError);
}

TEST(Reticulum, DepthLimit) {
    Reticulum tree(1);
    NodeId at = NodeId::root();
    for (unsigned level = 0; level < kSupportedDepth; ++level) {
        tree.split(at, NodeWeights(0.0, {1.0}));
        at = at.left();
    }
    EXPECT_EQ(tree.depth(), kSupportedDepth);
    EXPECT_THROW(tree.split(at, NodeWeights(0.0, {1.0})), StructuralError);
}

TEST(Reticulum, FromPartsValidates) {
    std::map<NodeId, NodeWeights> nodes{{NodeId{0}, NodeWeights(0.0, {1.0})}};
    std::map<NodeId, LeafStats> leaves{{NodeId{1}, LeafStats{}}, {NodeId{2}, LeafStats{}}};
    EXPECT_NO_THROW(Reticulum::from_parts(1, 1.0, 1.0, nodes, leaves));
    auto missing = leaves;
    missing.erase(NodeId{2});
    EXPECT_THROW(Reticulum::from_parts(1, 1.0, 1.0, nodes, missing), StructuralError);
    auto orphan = leaves;
    orphan.emplace(NodeId{5}, LeafStats{});
    EXPECT_THROW(Reticulum::from_parts(1, 1.0, 1.0, nodes, orphan), StructuralError);
    auto overlap = leaves;
    overlap.emplace(NodeId{0}, LeafStats{});
    EXPECT_THROW(Reticulum::from_parts(1, 1.0, 1.0, nodes, overlap), StructuralError);
    EXPECT_THROW(Reticulum(1, 0.0, 1.0), DomainError);
    EXPECT_THROW(Reticulum(0), StructuralError);
}
