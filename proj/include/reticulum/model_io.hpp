#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "reticulum/builder.hpp"
#include "reticulum/data.hpp"
#include "reticulum/errors.hpp"
#include "reticulum/polar.hpp"
#include "reticulum/tree.hpp"

namespace reticulum {

inline constexpr int kModelFormatVersion = 1;

/// Size and class balance of the data a model was fitted on.
struct DataFingerprint {
    std::size_t points = 0;
    std::size_t dim = 0;
    std::size_t label_zero = 0;
    std::size_t label_one = 0;

    static DataFingerprint of(const Dataset& data) {
        return {data.size(), data.dim(), data.count_label(0), data.count_label(1)};
    }
    bool operator==(const DataFingerprint&) const = default;
};

struct ModelFile {
    Reticulum tree{1};
    std::optional<TrainConfig> config;
    std::optional<DataFingerprint> fingerprint;
};

// ---------------------------------------------------------------------------
// Canonical text: keys sorted, floats printed with 17 significant digits.
// Parsing canonical text and printing it again reproduces the same bytes.

namespace detail {

inline void write_canonical(std::ostringstream& out, const nlohmann::json& j, int indent, int depth) {
    const auto newline = [&](int level) {
        if (indent < 0) return;
        out << '\n' << std::string(static_cast<std::size_t>(indent * level), ' ');
    };
    switch (j.type()) {
        case nlohmann::json::value_t::object: {
            if (j.empty()) {
                out << "{}";
                return;
            }
            out << '{';
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out << ',';
                first = false;
                newline(depth + 1);
                out << nlohmann::json(it.key()).dump() << (indent < 0 ? ":" : ": ");
                write_canonical(out, it.value(), indent, depth + 1);
            }
            newline(depth);
            out << '}';
            return;
        }
        case nlohmann::json::value_t::array: {
            if (j.empty()) {
                out << "[]";
                return;
            }
            // Arrays of numbers stay on one line.
            const bool flat = std::all_of(j.begin(), j.end(), [](const auto& v) { return v.is_number(); });
            out << '[';
            bool first = true;
            for (const auto& v : j) {
                if (!first) out << (flat && indent >= 0 ? ", " : ",");
                first = false;
                if (!flat) newline(depth + 1);
                write_canonical(out, v, indent, depth + 1);
            }
            if (!flat) newline(depth);
            out << ']';
            return;
        }
        case nlohmann::json::value_t::number_float: {
            const double v = j.get<double>();
            if (!std::isfinite(v)) throw NumericError("model serialization: non-finite number");
            out << format_double(v);
            return;
        }
        default:
            out << j.dump();
            return;
    }
}

}  // namespace detail

/// Serializes with sorted keys and 17-significant-digit floats. `indent` < 0
/// gives a single line.
inline std::string canonical_dump(const nlohmann::json& j, int indent = 2) {
    std::ostringstream out;
    detail::write_canonical(out, j, indent, 0);
    return out.str();
}

inline nlohmann::json weights_to_json(const NodeWeights& w) {
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t k = 0; k < w.size(); ++k) arr.push_back(w[k]);
    return arr;
}

inline nlohmann::json polar_to_json(const NodeWeights& w) {
    double norm = 0.0;
    for (double v : w.normal) norm += v * v;
    if (!(norm > 0.0)) return nullptr;
    const PolarWeights p = to_polar(w);
    nlohmann::json j{{"offset", p.offset}, {"stiffness", p.stiffness}, {"angles", nlohmann::json::array()}};
    for (double a : p.angles) j["angles"].push_back(a);
    if (w.dim() == 1) j["sign"] = p.sign;
    return j;
}

/// Nodes (with their polar reading) and leaves of a tree.
inline nlohmann::json tree_to_json(const Reticulum& tree) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& [id, w] : tree.nodes()) {
        nodes.push_back({{"id", id.index},
                         {"level", id.level()},
                         {"weights", weights_to_json(w)},
                         {"polar", polar_to_json(w)}});
    }
    nlohmann::json leaves = nlohmann::json::array();
    for (const auto& [id, s] : tree.leaves()) {
        leaves.push_back({{"id", id.index},
                          {"level", id.level()},
                          {"alpha_post", s.alpha_post},
                          {"beta_post", s.beta_post},
                          {"potential", s.potential}});
    }
    return {{"dim", tree.dim()},
            {"prior", {{"alpha", tree.prior_alpha()}, {"beta", tree.prior_beta()}}},
            {"nodes", std::move(nodes)},
            {"leaves", std::move(leaves)}};
}

inline nlohmann::json config_to_json(const TrainConfig& c) {
    return {{"max_attempts", c.max_attempts},
            {"max_depth", c.max_depth},
            {"prior_alpha", c.prior_alpha},
            {"prior_beta", c.prior_beta},
            {"initial_stiffness", c.initial_stiffness},
            {"step_size", c.step_size},
            {"total_gradient_steps", c.total_gradient_steps},
            {"pruning_factor", c.pruning_factor},
            {"rng_seed", c.rng_seed},
            {"coordinates", c.coordinates == Coordinates::polar ? "polar" : "cartesian"}};
}

namespace detail {

template <typename T>
T field(const nlohmann::json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) {
        throw IngestionError(std::string("model file: missing field '") + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw IngestionError(std::string("model file: field '") + key + "': " + e.what());
    }
}

}  // namespace detail

inline Reticulum tree_from_json(const nlohmann::json& j) {
    const auto dim = detail::field<std::size_t>(j, "dim");
    const auto prior = j.contains("prior") ? j.at("prior") : nlohmann::json();
    const auto alpha = detail::field<double>(prior, "alpha");
    const auto beta = detail::field<double>(prior, "beta");
    std::map<NodeId, NodeWeights> nodes;
    for (const auto& n : detail::field<nlohmann::json>(j, "nodes")) {
        const auto values = detail::field<std::vector<double>>(n, "weights");
        if (values.size() != dim + 1) throw IngestionError("model file: node weights have the wrong length");
        NodeWeights w(values[0], std::vector<double>(values.begin() + 1, values.end()));
        nodes.emplace(NodeId{detail::field<std::uint32_t>(n, "id")}, std::move(w));
    }
    std::map<NodeId, LeafStats> leaves;
    for (const auto& l : detail::field<nlohmann::json>(j, "leaves")) {
        leaves.emplace(NodeId{detail::field<std::uint32_t>(l, "id")},
                       LeafStats{detail::field<double>(l, "alpha_post"), detail::field<double>(l, "beta_post"),
                                 detail::field<double>(l, "potential")});
    }
    try {
        return Reticulum::from_parts(dim, alpha, beta, std::move(nodes), std::move(leaves));
    } catch (const Error& e) {
        throw IngestionError(std::string("model file: invalid tree: ") + e.what());
    }
}

inline TrainConfig config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.max_attempts = detail::field<std::size_t>(j, "max_attempts");
    c.max_depth = detail::field<unsigned>(j, "max_depth");
    c.prior_alpha = detail::field<double>(j, "prior_alpha");
    c.prior_beta = detail::field<double>(j, "prior_beta");
    c.initial_stiffness = detail::field<double>(j, "initial_stiffness");
    c.step_size = detail::field<double>(j, "step_size");
    c.total_gradient_steps = detail::field<std::size_t>(j, "total_gradient_steps");
    c.pruning_factor = detail::field<double>(j, "pruning_factor");
    c.rng_seed = detail::field<std::uint64_t>(j, "rng_seed");
    c.coordinates = detail::field<std::string>(j, "coordinates") == "polar" ? Coordinates::polar
                                                                            : Coordinates::cartesian;
    return c;
}

inline std::string serialize_model(const ModelFile& model) {
    nlohmann::json j = tree_to_json(model.tree);
    j["format"] = "reticulum-model";
    j["format_version"] = kModelFormatVersion;
    j["train_config"] = model.config ? config_to_json(*model.config) : nlohmann::json(nullptr);
    if (model.fingerprint) {
        const auto& f = *model.fingerprint;
        j["data_fingerprint"] = {{"points", f.points},
                                 {"dim", f.dim},
                                 {"label_counts", {f.label_zero, f.label_one}}};
    } else {
        j["data_fingerprint"] = nullptr;
    }
    return canonical_dump(j) + "\n";
}

inline ModelFile parse_model(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw IngestionError(std::string("model file: ") + e.what());
    }
    if (detail::field<std::string>(j, "format") != "reticulum-model") {
        throw IngestionError("model file: unexpected format tag");
    }
    const int version = detail::field<int>(j, "format_version");
    if (version != kModelFormatVersion) {
        throw IngestionError("model file: unsupported format_version " + std::to_string(version));
    }
    ModelFile model;
    model.tree = tree_from_json(j);
    if (j.contains("train_config") && !j.at("train_config").is_null()) {
        model.config = config_from_json(j.at("train_config"));
    }
    if (j.contains("data_fingerprint") && !j.at("data_fingerprint").is_null()) {
        const auto& f = j.at("data_fingerprint");
        const auto counts = detail::field<std::vector<std::size_t>>(f, "label_counts");
        if (counts.size() != 2) throw IngestionError("model file: label_counts must have two entries");
        model.fingerprint = DataFingerprint{detail::field<std::size_t>(f, "points"),
                                            detail::field<std::size_t>(f, "dim"), counts[0], counts[1]};
    }
    return model;
}

/// One line-delimited record per construction event.
inline std::string trace_record(const TraceEvent& ev) {
    nlohmann::json pruned = nlohmann::json::array();
    for (const auto& p : ev.pruned) {
        pruned.push_back({{"id", p.id.index},
                          {"level", p.id.level()},
                          {"children_potential", p.children_potential},
                          {"parent_potential", p.parent_potential},
                          {"penalty", p.penalty}});
    }
    nlohmann::json j{{"attempt", ev.attempt},
                     {"stage", to_string(ev.stage)},
                     {"leaf", ev.leaf ? nlohmann::json(ev.leaf->index) : nlohmann::json(nullptr)},
                     {"weights", ev.weights.normal.empty() ? nlohmann::json(nullptr) : weights_to_json(ev.weights)},
                     {"bound", ev.bound},
                     {"pruned", std::move(pruned)},
                     {"tree", tree_to_json(ev.snapshot)}};
    return canonical_dump(j, -1);
}

inline std::string serialize_trace(const ConstructionTrace& trace) {
    std::string out;
    for (const auto& ev : trace) out += trace_record(ev) + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Files

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestionError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

/// Writes to a sibling temporary file, then renames it over `path`.
inline void write_file_atomic(const std::string& path, const std::string& content) {
    const std::filesystem::path target(path);
    std::filesystem::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IngestionError("cannot write '" + tmp.string() + "'");
        out << content;
        out.flush();
        if (!out) throw IngestionError("failed writing '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, target, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw IngestionError("cannot move '" + tmp.string() + "' to '" + path + "': " + ec.message());
    }
}

inline ModelFile load_model(const std::string& path) { return parse_model(read_text_file(path)); }

inline void save_model(const std::string& path, const ModelFile& model) {
    write_file_atomic(path, serialize_model(model));
}

// ---------------------------------------------------------------------------
// Probability surfaces

/// p(y = 1 | x) on a regular grid over a 2-d box, row-major with x₂ as the
/// row (outer) index and x₁ as the column index. Axis points include both ends.
struct SurfaceGrid {
    double x_min = -1.0, x_max = 1.0;
    double y_min = -1.0, y_max = 1.0;
    std::size_t nx = 0, ny = 0;
    std::vector<double> values;

    double x_at(std::size_t col) const { return axis(x_min, x_max, nx, col); }
    double y_at(std::size_t row) const { return axis(y_min, y_max, ny, row); }
    double operator()(std::size_t row, std::size_t col) const { return values[row * nx + col]; }

private:
    static double axis(double lo, double hi, std::size_t n, std::size_t i) {
        return n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
};

inline SurfaceGrid compute_surface(const Reticulum& tree, double x_min, double x_max, double y_min, double y_max,
                                   std::size_t nx, std::size_t ny) {
    if (tree.dim() != 2) {
        throw StructuralError("surface: defined for 2-dimensional models only, got dimension " +
                              std::to_string(tree.dim()));
    }
    if (nx == 0 || ny == 0) throw ConfigError("surface: resolution must be positive");
    if (!(x_max >= x_min) || !(y_max >= y_min)) throw ConfigError("surface: empty axis range");
    SurfaceGrid grid{x_min, x_max, y_min, y_max, nx, ny, {}};
    std::vector<double> features;
    features.reserve(nx * ny * 2);
    for (std::size_t r = 0; r < ny; ++r) {
        for (std::size_t c = 0; c < nx; ++c) {
            features.push_back(grid.x_at(c));
            features.push_back(grid.y_at(r));
        }
    }
    const MembershipMatrix p = memberships(tree, features, nx * ny);
    if (!tree.stats_fresh()) throw StructuralError("surface: leaf statistics are stale");
    std::vector<double> leaf_proba;
    for (const auto& [id, s] : tree.leaves()) leaf_proba.push_back(s.proba_one());
    grid.values.assign(nx * ny, 0.0);
    for (std::size_t i = 0; i < nx * ny; ++i) {
        for (std::size_t c = 0; c < p.cols(); ++c) grid.values[i] += p(i, c) * leaf_proba[c];
    }
    return grid;
}

/// "x1,x2,p" rows in grid order.
inline std::string surface_to_csv(const SurfaceGrid& grid) {
    std::ostringstream out;
    out << "x1,x2,p\n";
    for (std::size_t r = 0; r < grid.ny; ++r) {
        for (std::size_t c = 0; c < grid.nx; ++c) {
            out << format_double(grid.x_at(c)) << ',' << format_double(grid.y_at(r)) << ','
                << format_double(grid(r, c)) << '\n';
        }
    }
    return out.str();
}

}  // namespace reticulum
