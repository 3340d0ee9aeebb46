#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "reticulum/dataset.hpp"
#include "reticulum/errors.hpp"
#include "reticulum/gradient.hpp"
#include "reticulum/polar.hpp"
#include "reticulum/tree.hpp"

namespace reticulum {

struct AdamParameters {
    double step_size = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adam moments for one fixed set of parameters, used for ascent.
class AdamState {
public:
    explicit AdamState(AdamParameters params = {}) : params_(params) {
        if (!(params.step_size > 0.0)) throw ConfigError("Adam: step size must be positive");
        if (params.beta1 < 0.0 || params.beta1 >= 1.0 || params.beta2 < 0.0 || params.beta2 >= 1.0) {
            throw ConfigError("Adam: beta1 and beta2 must lie in [0, 1)");
        }
        if (!(params.epsilon > 0.0)) throw ConfigError("Adam: epsilon must be positive");
    }

    const AdamParameters& parameters() const { return params_; }
    std::size_t step_count() const { return step_count_; }
    std::span<const double> first_moment() const { return first_; }
    std::span<const double> second_moment() const { return second_; }

    void reset(std::size_t n) {
        first_.assign(n, 0.0);
        second_.assign(n, 0.0);
        step_count_ = 0;
    }

    /// One ascent step: x += step · m̂ / (√v̂ + ε). Moments reset whenever the
    /// parameter count changes.
    void ascend(std::span<double> x, std::span<const double> grad) {
        if (x.size() != first_.size()) reset(x.size());
        ++step_count_;
        const double t = static_cast<double>(step_count_);
        const double bias1 = 1.0 - std::pow(params_.beta1, t);
        const double bias2 = 1.0 - std::pow(params_.beta2, t);
        for (std::size_t k = 0; k < x.size(); ++k) {
            first_[k] = params_.beta1 * first_[k] + (1.0 - params_.beta1) * grad[k];
            second_[k] = params_.beta2 * second_[k] + (1.0 - params_.beta2) * grad[k] * grad[k];
            const double m_hat = first_[k] / bias1;
            const double v_hat = second_[k] / bias2;
            x[k] += params_.step_size * m_hat / (std::sqrt(v_hat) + params_.epsilon);
        }
    }

private:
    AdamParameters params_;
    std::vector<double> first_;
    std::vector<double> second_;
    std::size_t step_count_ = 0;
};

/// Which weights an ascent may change: one node (local) or all of them (global).
struct OptimizeScope {
    std::optional<NodeId> node;

    static OptimizeScope local(NodeId id) { return OptimizeScope{id}; }
    static OptimizeScope global() { return OptimizeScope{std::nullopt}; }
    bool is_global() const { return !node.has_value(); }
};

enum class Coordinates { cartesian, polar };

/// Smallest stiffness a polar-mode step may leave behind.
inline constexpr double kMinPolarStiffness = 1e-8;

/// Runs `steps` Adam updates maximizing the bound over the weights in scope.
/// Leaves the tree with fresh leaf statistics and returns the final bound.
inline double ascend(Reticulum& tree, const Dataset& data, OptimizeScope scope, std::size_t steps,
                     AdamState& state, Coordinates coords = Coordinates::cartesian) {
    if (steps == 0) throw ConfigError("ascend: steps must be at least 1");
    std::vector<NodeId> targets;
    if (scope.is_global()) {
        for (const auto& [id, w] : tree.nodes()) targets.push_back(id);
    } else {
        if (!tree.is_internal(*scope.node)) {
            throw StructuralError("ascend: scope node #" + std::to_string(scope.node->index) +
                                  " is not internal");
        }
        targets.push_back(*scope.node);
    }
    if (targets.empty()) {
        refresh_leaf_stats(tree, data);
        return cached_bound(tree);
    }

    const std::size_t width = tree.dim() + 1;
    std::vector<double> params(targets.size() * width);
    std::vector<double> grad(params.size());
    std::vector<PolarWeights> polar(coords == Coordinates::polar ? targets.size() : 0);

    // Parameters persist across steps; in polar mode the angles are never
    // re-canonicalized mid-run so Adam's moments stay meaningful.
    for (std::size_t t = 0; t < targets.size(); ++t) {
        const NodeWeights& w = tree.weights(targets[t]);
        double* p = params.data() + t * width;
        if (coords == Coordinates::cartesian) {
            for (std::size_t k = 0; k < width; ++k) p[k] = w[k];
        } else {
            polar[t] = to_polar(w);
            const auto pp = polar[t].params();
            std::copy(pp.begin(), pp.end(), p);
        }
    }

    for (std::size_t step = 0; step < steps; ++step) {
        const Evaluation ev = evaluate(tree, data, true);
        for (std::size_t t = 0; t < targets.size(); ++t) {
            const auto& g = ev.gradient.at(targets[t]);
            for (double v : g) {
                if (!std::isfinite(v)) {
                    throw NumericError("ascend: non-finite gradient at node #" +
                                       std::to_string(targets[t].index) + " on step " +
                                       std::to_string(step));
                }
            }
            double* gp = grad.data() + t * width;
            if (coords == Coordinates::cartesian) {
                std::copy(g.begin(), g.end(), gp);
            } else {
                const auto pg = pullback_gradient(polar[t], g);
                std::copy(pg.begin(), pg.end(), gp);
            }
        }
        state.ascend(params, grad);
        for (std::size_t t = 0; t < targets.size(); ++t) {
            std::span<double> p(params.data() + t * width, width);
            NodeWeights w;
            if (coords == Coordinates::cartesian) {
                w.intercept = p[0];
                w.normal.assign(p.begin() + 1, p.end());
            } else {
                p[1] = std::max(p[1], kMinPolarStiffness);
                polar[t] = PolarWeights::from_params(p, polar[t].sign);
                w = to_cartesian(polar[t]);
            }
            if (!w.all_finite()) {
                throw NumericError("ascend: non-finite weights at node #" + std::to_string(targets[t].index));
            }
            tree.set_weights(targets[t], std::move(w));
        }
    }
    refresh_leaf_stats(tree, data);
    return cached_bound(tree);
}

}  // namespace reticulum
