// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "reticulum/builder.hpp"
#include "reticulum/data.hpp"
#include "reticulum/model_io.hpp"
#include "reticulum/polar.hpp"

using namespace reticulum;
using namespace reticulum::testing;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

struct Criterion {
    std::string name;
    double budget_seconds;  // 0: no runtime limit
    std::function<Outcome()> body;
};

std::string fmt(const char* format, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

// ---------------------------------------------------------------------------

Outcome gradient_correctness() {
    Pcg32 rng(1001);
    std::size_t components = 0, bad = 0;
    double worst_rel = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t dim = 1 + rng.below(4);
        const double a = rng.uniform(0.5, 3.0);
        const double b = rng.uniform(0.5, 3.0);
        const Reticulum tree = random_tree(rng, dim, 1 + rng.below(3), rng.uniform(0.3, 3.0), 0.7, a, b);
        const Dataset data = random_dataset(rng, dim, 1 + rng.below(50));
        const GradientTable g = backprop(tree, data);
        const GradientTable fd = finite_diff_gradient(tree, data, 1e-5);
        for (const auto& [id, gj] : g) {
            for (std::size_t k = 0; k < gj.size(); ++k) {
                const double n = fd.at(id)[k];
                ++components;
                if (!gradient_close(gj[k], n)) ++bad;
                const double scale = std::max(std::fabs(gj[k]), std::fabs(n));
                if (scale >= 1e-6) worst_rel = std::max(worst_rel, std::fabs(gj[k] - n) / scale);
            }
        }
    }
    return {bad == 0, fmt("%zu components, %zu outside tolerance, worst rel %.2e (rel 1e-5, abs 1e-8)", components,
                          bad, worst_rel)};
}

Outcome jensen_oracle() {
    Pcg32 rng(1002);
    int violations = 0, hard_instances = 0, hard_mismatch = 0;
    double worst_gap = -std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t dim = 1 + rng.below(3);
        const bool hard = trial % 4 == 0;
        Reticulum tree = random_tree(rng, dim, 1 + rng.below(3), hard ? 1e4 : rng.uniform(0.3, 3.0));
        const std::size_t leaves = tree.leaf_count();
        const auto max_m = static_cast<std::size_t>(std::floor(std::log(4096.0) / std::log(double(leaves)) + 1e-12));
        const Dataset data = random_dataset(rng, dim, 1 + rng.below(std::max<std::size_t>(max_m, 1)));
        const double c = bound(tree, data);
        const double exact = exact_expected_loglike(tree, data);
        worst_gap = std::max(worst_gap, c - exact);
        if (c > exact + 1e-9) ++violations;

        const MembershipMatrix p = memberships(tree, data);
        bool is_hard = true;
        for (double v : p.values) is_hard = is_hard && (v == 0.0 || v == 1.0);
        if (is_hard) {
            ++hard_instances;
            if (std::fabs(c - exact) > 1e-9) ++hard_mismatch;
        }
    }
    const bool pass = violations == 0 && hard_mismatch == 0 && hard_instances > 0;
    return {pass, fmt("max(bound - exact) %.2e, %d violations; %d hard-membership instances, %d not equal within 1e-9",
                      worst_gap, violations, hard_instances, hard_mismatch)};
}

Outcome hard_tree_equivalence() {
    Pcg32 rng(1003);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t dim = 1 + rng.below(3);
        Reticulum tree = random_tree(rng, dim, 1 + rng.below(3), 1.0);
        const Reticulum soft = tree;
        for (const auto& [id, w] : soft.nodes()) tree.set_weights(id, w.scaled(1e6));

        Dataset data(dim);
        std::vector<double> x(dim);
        while (data.size() < 40) {
            for (double& v : x) v = rng.uniform(-1.0, 1.0);
            bool clear = true;
            for (const auto& [id, w] : tree.nodes()) {
                double norm = 0.0;
                for (double v : w.normal) norm += v * v;
                clear = clear && std::fabs(w.signed_distance(x)) / std::sqrt(norm) >= 1e-3;
            }
            if (clear) data.add(x, rng.bernoulli(0.5) ? 1 : 0);
        }
        worst = std::max(worst, std::fabs(bound(tree, data) - hard_tree_loglike(tree, data)));
    }
    return {worst <= 1e-6, fmt("max |bound - hard tree log-likelihood| %.2e over 50 instances (tol 1e-6)", worst)};
}

Outcome cross_recovery() {
    const TrainConfig config;
    const Dataset cv_data = generate_cross(1000, 500);
    const CrossValidationReport report = cross_validate(cv_data, config, 5, 500);
    int three = 0;
    std::string counts;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        TrainConfig c = config;
        c.rng_seed = seed;
        const FitResult r = fit(generate_cross(1000, 600 + seed), c);
        three += r.tree.internal_count() == 3;
        counts += (counts.empty() ? "" : " ") + std::to_string(r.tree.internal_count());
    }
    const bool ll_ok = report.mean_log_loss >= 0.32 && report.mean_log_loss <= 0.40;
    return {ll_ok && three >= 6, fmt("5-fold CV log-loss %.4f (need [0.32, 0.40]); 3 internal nodes in %d/10 seeds "
                                     "(need >= 6), counts [%s]",
                                     report.mean_log_loss, three, counts.c_str())};
}

Outcome sphere_experiment() {
    const TrainConfig config;
    const Dataset data = generate_sphere(5000, 1, SphereLabel::distance_to_circle);
    const CrossValidationReport report = cross_validate(data, config, 5, 1);
    const FitResult r = fit(data, config);
    const SurfaceGrid grid = compute_surface(r.tree, -2.0, 2.0, -2.0, 2.0, 101, 101);
    std::size_t band = 0, above = 0;
    for (std::size_t i = 0; i < grid.ny; ++i) {
        for (std::size_t j = 0; j < grid.nx; ++j) {
            const double radius = std::hypot(grid.x_at(j), grid.y_at(i));
            if (radius < 1.15 || radius > 1.45) continue;
            ++band;
            above += grid(i, j) > 0.5;
        }
    }
    const double share = double(above) / double(band);
    const bool pass = report.mean_log_loss <= 0.45 && r.tree.internal_count() >= 8 && share >= 0.9;
    return {pass, fmt("5-fold CV log-loss %.4f (need <= 0.45); %zu internal nodes (need >= 8); p > 0.5 in %.1f%% of "
                      "%zu cells with radius in [1.15, 1.45] (need >= 90%%)",
                      report.mean_log_loss, r.tree.internal_count(), 100.0 * share, band)};
}

Outcome pruning_semantics() {
    Pcg32 rng(1006);
    int empty_kept = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t dim = 1 + rng.below(3);
        Reticulum tree = random_tree(rng, dim, 1 + rng.below(3), 2.0);
        const Dataset data = random_dataset(rng, dim, 5 + rng.below(60));
        // Extend one leaf with a gate that sends everything left.
        std::vector<NodeId> leaves;
        for (const auto& [id, s] : tree.leaves()) leaves.push_back(id);
        const NodeId target = leaves[rng.below(leaves.size())];
        NodeWeights w = NodeWeights::zeros(dim);
        w.intercept = 1e3;
        tree.split(target, w);
        refresh_leaf_stats(tree, data);
        prune(tree, 1.0 + 1e-9);
        if (tree.is_internal(target)) ++empty_kept;
    }

    int violations = 0, pruning_events = 0;
    std::size_t events = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        TrainConfig config;
        config.rng_seed = seed;
        config.max_attempts = 20;
        config.pruning_factor = 1.0 + 0.01 * double(seed);
        const FitResult r = fit(generate_cross(300, 700 + seed), config);
        events += r.trace.size();
        for (std::size_t e = 1; e < r.trace.size(); ++e) {
            if (r.trace[e].stage != TraceStage::pruned) continue;
            double penalty = 0.0;
            for (const auto& p : r.trace[e].pruned) penalty += p.penalty;
            pruning_events += !r.trace[e].pruned.empty();
            if (r.trace[e].bound + penalty < r.trace[e - 1].bound - 1e-9) ++violations;
        }
    }
    return {empty_kept == 0 && violations == 0,
            fmt("empty-child split survived %d/100 prunes at factor 1+1e-9; penalized objective decreased at %d of %zu "
                "trace events (%d with removals) over 20 fits",
                empty_kept, violations, events, pruning_events)};
}

Outcome polar_round_trip() {
    Pcg32 rng(1007);
    double worst = 0.0;
    for (std::size_t d : {2, 3, 5}) {
        for (int i = 0; i < 1000; ++i) {
            NodeWeights w = NodeWeights::zeros(d);
            for (std::size_t k = 0; k < w.size(); ++k) w[k] = 3.0 * rng.normal();
            const NodeWeights back = to_cartesian(to_polar(w));
            for (std::size_t k = 0; k < w.size(); ++k) worst = std::max(worst, std::fabs(back[k] - w[k]));
        }
    }
    const auto polar_bound = [](const PolarWeights& p, const Dataset& data) {
        Reticulum tree(data.dim());
        tree.split(NodeId{0}, to_cartesian(p));
        return static_cast<double>(bound_extended(tree, data));
    };
    std::size_t components = 0, bad = 0;
    for (std::size_t d : {2, 3, 5}) {
        for (int trial = 0; trial < 20; ++trial) {
            const Dataset data = random_dataset(rng, d, 40);
            NodeWeights w = NodeWeights::zeros(d);
            for (std::size_t k = 0; k < w.size(); ++k) w[k] = rng.normal();
            PolarWeights p = to_polar(w);
            p.stiffness = rng.uniform(0.3, 3.0);
            Reticulum tree(d);
            tree.split(NodeId{0}, to_cartesian(p));
            const auto g = pullback_gradient(p, backprop(tree, data).at(NodeId{0}));
            const auto params = p.params();
            for (std::size_t k = 0; k < params.size(); ++k) {
                auto plus = params, minus = params;
                plus[k] += 1e-5;
                minus[k] -= 1e-5;
                const double fd = (polar_bound(PolarWeights::from_params(plus, p.sign), data) -
                                   polar_bound(PolarWeights::from_params(minus, p.sign), data)) /
                                  (plus[k] - minus[k]);
                ++components;
                if (!gradient_close(g[k], fd)) ++bad;
            }
        }
    }
    return {worst <= 1e-10 && bad == 0, fmt("round trip max error %.2e on 3000 vectors (tol 1e-10); pullback: %zu of "
                                            "%zu components outside rel 1e-5",
                                            worst, bad, components)};
}

Outcome selection_law() {
    TrainConfig config;
    config.max_attempts = 12;
    const Reticulum tree = fit(generate_cross(400, 800), config).tree;
    const auto probs = selection_probabilities(tree, config.max_depth);
    std::map<NodeId, double> counts;
    Pcg32 rng(1008);
    for (int i = 0; i < 100000; ++i) counts[*select_leaf(tree, config.max_depth, rng)] += 1.0;
    std::vector<double> observed, expected;
    for (const auto& [id, p] : probs) {
        observed.push_back(counts[id]);
        expected.push_back(p);
    }
    const double pv = probs.size() > 1 ? chi_square_p_value(observed, expected) : 1.0;
    return {probs.size() > 1 && pv > 0.01,
            fmt("%zu eligible leaves, chi-square p = %.4f over 1e5 draws (need > 0.01)", probs.size(), pv)};
}

Outcome determinism() {
    const Dataset data = generate_cross(500, 900);
    TrainConfig config;
    config.rng_seed = 42;
    const FitResult a = fit(data, config);
    const FitResult b = fit(data, config);
    const std::string text_a = serialize_model(ModelFile{a.tree, config, DataFingerprint::of(data)});
    const std::string text_b = serialize_model(ModelFile{b.tree, config, DataFingerprint::of(data)});

    const auto path = std::filesystem::temp_directory_path() / "reticulum_acceptance_model.json";
    save_model(path.string(), ModelFile{a.tree, config, DataFingerprint::of(data)});
    const ModelFile loaded = load_model(path.string());
    std::filesystem::remove(path);
    const Dataset probe = generate_cross(2000, 901);
    const auto p = predict_proba(a.tree, probe);
    const auto q = predict_proba(loaded.tree, probe);
    double worst = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) worst = std::max(worst, std::fabs(p[i] - q[i]));
    return {text_a == text_b && worst <= 1e-12,
            fmt("model files %s (%zu bytes); load->predict max difference %.2e (tol 1e-12)",
                text_a == text_b ? "byte-identical" : "DIFFER", text_a.size(), worst)};
}

// Two-class Gaussian mixture shaped like the classic 250-point benchmark.
Dataset ripley_stand_in() {
    Pcg32 rng(1010);
    const double centers[4][2] = {{-0.7, 0.3}, {0.3, 0.3}, {-0.3, 0.7}, {0.4, 0.7}};
    const double sd = std::sqrt(0.03);
    Dataset data(2);
    for (int i = 0; i < 250; ++i) {
        const int component = i % 4;
        const std::vector<double> x{centers[component][0] + sd * rng.normal(), centers[component][1] + sd * rng.normal()};
        data.add(x, component >= 2 ? 1 : 0);
    }
    return data;
}

Outcome ripley_qualitative() {
    const char* env = std::getenv("RIPLEY_TRAIN_CSV");
    const bool external = env != nullptr && *env != '\0';
    const Dataset data = external ? load_csv(env) : ripley_stand_in();
    const FitResult r = fit(data, TrainConfig{});
    std::set<TraceStage> stages;
    for (const auto& e : r.trace) stages.insert(e.stage);
    const bool all_stages = stages.count(TraceStage::sampled) && stages.count(TraceStage::local) &&
                            stages.count(TraceStage::global) && stages.count(TraceStage::pruned);
    const double ll = log_loss(predict_proba(r.tree, data), data.labels());
    return {all_stages && std::isfinite(ll),
            fmt("%s (%zu points): %zu trace events, all stages %s, %zu internal nodes, train log-loss %.4f",
                external ? "RIPLEY_TRAIN_CSV" : "synthetic stand-in, RIPLEY_TRAIN_CSV unset", data.size(),
                r.trace.size(), all_stages ? "present" : "MISSING", r.tree.internal_count(), ll)};
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {"1 gradient correctness", 30.0, gradient_correctness},
        {"2 Jensen-bound oracle", 60.0, jensen_oracle},
        {"3 hard-tree equivalence", 0.0, hard_tree_equivalence},
        {"4 cross recovery", 300.0, cross_recovery},
        {"5 sphere experiment", 600.0, sphere_experiment},
        {"6 pruning semantics", 0.0, pruning_semantics},
        {"7 polar round trip", 0.0, polar_round_trip},
        {"8 selection law", 0.0, selection_law},
        {"9 determinism and persistence", 0.0, determinism},
        {"ripley qualitative", 0.0, ripley_qualitative},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.body();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::string timing = fmt("%.1f s", seconds);
        if (c.budget_seconds > 0.0) {
            timing += fmt(" of %.0f s", c.budget_seconds);
            if (seconds > c.budget_seconds) {
                o.pass = false;
                timing += " EXCEEDED";
            }
        }
        failures += !o.pass;
        std::printf("%s [%s] %s (%s)\n", o.pass ? "PASS" : "FAIL", c.name.c_str(), o.detail.c_str(), timing.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
