// Command-line front end: generate data, fit, predict, evaluate, cross-validate,
// export probability surfaces and explain a model in polar form.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "reticulum/builder.hpp"
#include "reticulum/data.hpp"
#include "reticulum/errors.hpp"
#include "reticulum/model_io.hpp"

namespace {

using namespace reticulum;

enum ExitCode : int { kOk = 0, kOther = 1, kUsage = 2, kIngestion = 3, kNumeric = 4 };

struct CsvFlags {
    std::string label;
    bool no_header = false;

    CsvOptions options() const { return CsvOptions{!no_header, label}; }
};

void add_csv_flags(CLI::App* cmd, CsvFlags& flags) {
    cmd->add_option("--label", flags.label, "Label column name or 0-based index (default: 'y', else last column)");
    cmd->add_flag("--no-header", flags.no_header, "The CSV has no header row");
}

void add_train_flags(CLI::App* cmd, TrainConfig& c, std::string& coordinates) {
    cmd->add_option("--max-attempts", c.max_attempts, "Construction attempts")->capture_default_str();
    cmd->add_option("--max-depth", c.max_depth, "Deepest level a leaf may be extended from")->capture_default_str();
    cmd->add_option("--prior-alpha", c.prior_alpha, "Beta prior alpha (class 0 pseudo-count)")->capture_default_str();
    cmd->add_option("--prior-beta", c.prior_beta, "Beta prior beta (class 1 pseudo-count)")->capture_default_str();
    cmd->add_option("--initial-stiffness", c.initial_stiffness, "Initial normal length in pseudo-range units")
        ->capture_default_str();
    cmd->add_option("--step-size", c.step_size, "Adam step size")->capture_default_str();
    cmd->add_option("--gradient-steps", c.total_gradient_steps, "Adam steps per attempt, split local/global")
        ->capture_default_str();
    cmd->add_option("--pruning-factor", c.pruning_factor, "Pruning factor in [1, 1.2]")->capture_default_str();
    cmd->add_option("--seed", c.rng_seed, "Construction RNG seed")->capture_default_str();
    cmd->add_option("--coordinates", coordinates, "Optimization coordinates")
        ->check(CLI::IsMember({"cartesian", "polar"}))
        ->capture_default_str();
}

TrainConfig finish_config(TrainConfig c, const std::string& coordinates) {
    c.coordinates = coordinates == "polar" ? Coordinates::polar : Coordinates::cartesian;
    c.validate();
    return c;
}

void write_output(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
    } else {
        write_file_atomic(path, content);
    }
}

Dataset features_as_dataset(const FeatureTable& table) {
    // Labels are irrelevant for prediction; zeros keep the Dataset invariants.
    return Dataset(table.dim, table.values, std::vector<int>(table.rows(), 0));
}

std::string format_report_line(const std::string& key, double value) { return key + " " + format_double(value) + "\n"; }

void explain(const ModelFile& model, std::ostream& out) {
    const Reticulum& tree = model.tree;
    out << "dim " << tree.dim() << "\n";
    out << "prior alpha " << format_double(tree.prior_alpha()) << " beta " << format_double(tree.prior_beta()) << "\n";
    out << "internal_nodes " << tree.internal_count() << "\n";
    out << "leaves " << tree.leaf_count() << "\n";
    for (const auto& [id, w] : tree.nodes()) {
        out << "node " << id.index << " level " << id.level();
        double norm = 0.0;
        for (double v : w.normal) norm += v * v;
        if (norm == 0.0) {
            out << " degenerate (zero normal)\n";
            continue;
        }
        const PolarWeights p = to_polar(w);
        out << " offset " << format_double(p.offset) << " stiffness " << format_double(p.stiffness);
        if (tree.dim() == 1) {
            out << " sign " << (p.sign > 0 ? "+" : "-");
        } else {
            out << " angles_deg";
            for (double a : p.angles) out << ' ' << format_double(a * 180.0 / std::numbers::pi);
        }
        out << "\n";
    }
    for (const auto& [id, s] : tree.leaves()) {
        out << "leaf " << id.index << " level " << id.level() << " alpha " << format_double(s.alpha_post) << " beta "
            << format_double(s.beta_post) << " p1 " << format_double(s.proba_one()) << " potential "
            << format_double(s.potential) << "\n";
    }
}

int run(int argc, char** argv) {
    CLI::App app{"Adaptive Bayesian Reticulum: soft decision trees grown by unexplained potential"};
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML/INI file with default flag values; command-line flags take precedence");

    // generate
    std::string gen_kind;
    std::size_t gen_n = 1000;
    std::uint64_t gen_seed = 0;
    std::string gen_out;
    bool literal_sphere = false;
    auto* generate = app.add_subcommand("generate", "Write a synthetic dataset as CSV");
    generate->add_option("kind", gen_kind, "sphere or cross")->required()->check(CLI::IsMember({"sphere", "cross"}));
    generate->add_option("--n", gen_n, "Number of points")->capture_default_str()->check(CLI::PositiveNumber);
    generate->add_option("--seed", gen_seed, "Generator seed")->capture_default_str();
    generate->add_option("--out", gen_out, "Output CSV (default: stdout)");
    generate->add_flag("--literal-sphere", literal_sphere,
                       "Sphere labels from p = 1/(1+exp(-10|X|)) instead of the distance to the unit circle");

    // fit
    std::string fit_data, fit_model, fit_trace;
    TrainConfig fit_config;
    std::string fit_coordinates = "cartesian";
    CsvFlags fit_csv;
    auto* fitc = app.add_subcommand("fit", "Grow a reticulum on a CSV dataset");
    fitc->add_option("--data", fit_data, "Training CSV")->required();
    fitc->add_option("--model", fit_model, "Output model file")->required();
    fitc->add_option("--trace", fit_trace, "Optional construction trace (one JSON record per line)");
    add_train_flags(fitc, fit_config, fit_coordinates);
    add_csv_flags(fitc, fit_csv);

    // predict
    std::string pred_model, pred_data, pred_out;
    CsvFlags pred_csv;
    auto* predict = app.add_subcommand("predict", "Write p(y=1|x) for every row of a CSV");
    predict->add_option("--model", pred_model, "Model file")->required();
    predict->add_option("--data", pred_data, "Feature CSV; a label column, if present, is ignored")->required();
    predict->add_option("--out", pred_out, "Output CSV (default: stdout)");
    add_csv_flags(predict, pred_csv);

    // evaluate
    std::string eval_model, eval_data;
    CsvFlags eval_csv;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Report log-loss and node count on labelled data");
    evaluate_cmd->add_option("--model", eval_model, "Model file")->required();
    evaluate_cmd->add_option("--data", eval_data, "Labelled CSV")->required();
    add_csv_flags(evaluate_cmd, eval_csv);

    // cv
    std::string cv_data;
    std::size_t cv_k = 5;
    std::uint64_t cv_seed = 0;
    TrainConfig cv_config;
    std::string cv_coordinates = "cartesian";
    CsvFlags cv_csv;
    auto* cv = app.add_subcommand("cv", "k-fold cross-validated log-loss");
    cv->add_option("--data", cv_data, "Labelled CSV")->required();
    cv->add_option("--k", cv_k, "Number of folds")->capture_default_str();
    cv->add_option("--fold-seed", cv_seed, "Seed of the fold assignment")->capture_default_str();
    add_train_flags(cv, cv_config, cv_coordinates);
    add_csv_flags(cv, cv_csv);

    // surface
    std::string surf_model, surf_out;
    std::vector<double> x_range{-2.0, 2.0}, y_range{-2.0, 2.0};
    std::vector<std::size_t> resolution{101, 101};
    auto* surface = app.add_subcommand("surface", "Evaluate p(y=1|x) on a grid (2-d models only)");
    surface->add_option("--model", surf_model, "Model file")->required();
    surface->add_option("--out", surf_out, "Output CSV (default: stdout)");
    surface->add_option("--x-range", x_range, "x1 range: lo hi")->expected(2)->capture_default_str();
    surface->add_option("--y-range", y_range, "x2 range: lo hi")->expected(2)->capture_default_str();
    surface->add_option("--resolution", resolution, "Grid points: nx ny")->expected(2)->capture_default_str();

    // explain
    std::string expl_model;
    auto* explain_cmd = app.add_subcommand("explain", "Print nodes in polar form and leaf posteriors");
    explain_cmd->add_option("--model", expl_model, "Model file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    if (generate->parsed()) {
        const Dataset data = gen_kind == "cross"
                                 ? generate_cross(gen_n, gen_seed)
                                 : generate_sphere(gen_n, gen_seed,
                                                   literal_sphere ? SphereLabel::literal_norm
                                                                  : SphereLabel::distance_to_circle);
        write_output(gen_out, to_csv(data));
    } else if (fitc->parsed()) {
        const TrainConfig config = finish_config(fit_config, fit_coordinates);
        const Dataset data = load_csv(fit_data, fit_csv.options());
        const FitResult result = fit(data, config);
        save_model(fit_model, ModelFile{result.tree, config, DataFingerprint::of(data)});
        if (!fit_trace.empty()) write_file_atomic(fit_trace, serialize_trace(result.trace));
        std::cout << "internal_nodes " << result.tree.internal_count() << "\n"
                  << format_report_line("bound", cached_bound(result.tree));
    } else if (predict->parsed()) {
        const ModelFile model = load_model(pred_model);
        const FeatureTable table = load_features_csv(pred_data, pred_csv.options());
        const auto p = predict_proba(model.tree, features_as_dataset(table));
        std::string out = "p\n";
        for (double v : p) out += format_double(v) + "\n";
        write_output(pred_out, out);
    } else if (evaluate_cmd->parsed()) {
        const ModelFile model = load_model(eval_model);
        const Dataset data = load_csv(eval_data, eval_csv.options());
        const auto p = predict_proba(model.tree, data);
        std::cout << format_report_line("log_loss", log_loss(p, data.labels()))
                  << "internal_nodes " << model.tree.internal_count() << "\n"
                  << "points " << data.size() << "\n";
    } else if (cv->parsed()) {
        const TrainConfig config = finish_config(cv_config, cv_coordinates);
        const Dataset data = load_csv(cv_data, cv_csv.options());
        const CrossValidationReport report = cross_validate(data, config, cv_k, cv_seed);
        for (std::size_t f = 0; f < report.folds.size(); ++f) {
            std::cout << "fold " << f << " log_loss " << format_double(report.folds[f].log_loss) << " internal_nodes "
                      << report.folds[f].node_count << " test_points " << report.folds[f].test_size << "\n";
        }
        std::cout << format_report_line("mean_log_loss", report.mean_log_loss)
                  << format_report_line("mean_internal_nodes", report.mean_node_count);
    } else if (surface->parsed()) {
        const ModelFile model = load_model(surf_model);
        const SurfaceGrid grid =
            compute_surface(model.tree, x_range[0], x_range[1], y_range[0], y_range[1], resolution[0], resolution[1]);
        write_output(surf_out, surface_to_csv(grid));
    } else if (explain_cmd->parsed()) {
        explain(load_model(expl_model), std::cout);
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const reticulum::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const reticulum::IngestionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIngestion;
    } catch (const reticulum::StructuralError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIngestion;
    } catch (const reticulum::RefusalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIngestion;
    } catch (const reticulum::NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumeric;
    } catch (const reticulum::DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kOther;
    }
}
