#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <future>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "reticulum/builder.hpp"
#include "reticulum/dataset.hpp"
#include "reticulum/errors.hpp"
#include "reticulum/numerics.hpp"
#include "reticulum/random.hpp"

namespace reticulum {

// ---------------------------------------------------------------------------
// Synthetic generators

enum class SphereLabel {
    /// p = 1 / (1 + e^{−10(‖X‖ − 1)}): depends on the signed distance to the unit circle.
    distance_to_circle,
    /// p = 1 / (1 + e^{−10‖X‖}): the formula taken literally; close to 1 everywhere.
    literal_norm,
};

/// X = (1 + 0.3N)(cos 2πU, sin 2πU) with U ~ Uniform(0, 1), N ~ Normal(0, 1).
/// Per point the stream yields U, then N, then the label draw.
inline Dataset generate_sphere(std::size_t n, std::uint64_t seed,
                               SphereLabel label = SphereLabel::distance_to_circle) {
    Dataset out(2);
    Pcg32 rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.uniform();
        const double radius = 1.0 + 0.3 * rng.normal();
        const double angle = 2.0 * std::numbers::pi * u;
        const double x[2] = {radius * std::cos(angle), radius * std::sin(angle)};
        const double norm = std::hypot(x[0], x[1]);
        const double p = label == SphereLabel::distance_to_circle ? sigmoid(10.0 * (norm - 1.0))
                                                                  : sigmoid(10.0 * norm);
        out.add(x, rng.bernoulli(p) ? 1 : 0);
    }
    return out;
}

/// Class-1 probability of the cross pattern: 0.9 where x₁x₂ > 0, else 0.1
/// (points on an axis fall in the 0.1 branch).
inline double cross_probability(double x1, double x2) { return x1 * x2 > 0.0 ? 0.9 : 0.1; }

/// Uniform points on [−2, 2]² labelled by `cross_probability`.
inline Dataset generate_cross(std::size_t n, std::uint64_t seed) {
    Dataset out(2);
    Pcg32 rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const double x[2] = {rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
        out.add(x, rng.bernoulli(cross_probability(x[0], x[1])) ? 1 : 0);
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV

/// Where the label lives in a CSV file.
struct CsvOptions {
    bool has_header = true;
    /// Column name (requires a header) or zero-based index. Empty selects the
    /// column named "y" when present, otherwise the last column.
    std::string label_column;
};

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        std::string_view cell = line.substr(start, comma == std::string_view::npos ? comma : comma - start);
        while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
        while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) {
            cell.remove_suffix(1);
        }
        out.push_back(cell);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline std::optional<double> parse_double(std::string_view cell) {
    if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) return std::nullopt;
    return v;
}

inline std::string strip_bom(std::string line) {
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
        static_cast<unsigned char>(line[1]) == 0xBB && static_cast<unsigned char>(line[2]) == 0xBF) {
        line.erase(0, 3);
    }
    return line;
}

/// Resolves a label column spec against the header (possibly empty).
inline std::optional<std::size_t> resolve_column(const std::vector<std::string>& header, std::size_t width,
                                                 const std::string& spec, bool required) {
    if (spec.empty()) {
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (header[c] == "y") return c;
        }
        if (required) return width - 1;
        return std::nullopt;
    }
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == spec) return c;
    }
    std::size_t index = 0;
    const auto [ptr, ec] = std::from_chars(spec.data(), spec.data() + spec.size(), index);
    if (ec == std::errc() && ptr == spec.data() + spec.size()) {
        if (index >= width) {
            throw IngestionError("CSV: label column index " + spec + " out of range for " +
                                 std::to_string(width) + " columns");
        }
        return index;
    }
    if (required) throw IngestionError("CSV: no column named '" + spec + "'");
    return std::nullopt;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;
};

inline CsvTable read_csv_table(const std::string& path, bool has_header) {
    std::ifstream in(path);
    if (!in) throw IngestionError("CSV: cannot open '" + path + "'");
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (first) line = strip_bom(std::move(line));
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<std::string> cells;
        for (auto c : split_csv_line(line)) cells.emplace_back(c);
        if (first && has_header) {
            table.header = std::move(cells);
            first = false;
            continue;
        }
        first = false;
        const std::size_t width = table.header.empty() ? (table.rows.empty() ? cells.size() : table.rows[0].size())
                                                       : table.header.size();
        if (cells.size() != width) {
            throw IngestionError("CSV: line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                                 " columns, expected " + std::to_string(width));
        }
        table.rows.push_back(std::move(cells));
        table.line_numbers.push_back(line_no);
    }
    return table;
}

inline std::string column_name(const CsvTable& table, std::size_t c) {
    return c < table.header.size() ? "'" + table.header[c] + "'" : std::to_string(c);
}

}  // namespace detail

/// Reads features and a binary label from a comma-separated file. Feature
/// columns keep their file order with the label column removed.
inline Dataset load_csv(const std::string& path, const CsvOptions& options = {}) {
    const detail::CsvTable table = detail::read_csv_table(path, options.has_header);
    const std::size_t width = !table.header.empty() ? table.header.size()
                              : table.rows.empty()  ? 0
                                                    : table.rows[0].size();
    if (table.rows.empty()) throw IngestionError("CSV: '" + path + "' contains no data rows");
    if (width < 2) throw IngestionError("CSV: need at least one feature column and a label column");
    const std::size_t label_col = *detail::resolve_column(table.header, width, options.label_column, true);

    std::vector<double> features;
    std::vector<int> labels;
    features.reserve(table.rows.size() * (width - 1));
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& cells = table.rows[r];
        const std::string where = "line " + std::to_string(table.line_numbers[r]);
        for (std::size_t c = 0; c < width; ++c) {
            const auto v = detail::parse_double(cells[c]);
            if (!v) {
                throw IngestionError("CSV: " + where + ", column " + detail::column_name(table, c) +
                                     ": cannot parse '" + cells[c] + "' as a number");
            }
            if (!std::isfinite(*v)) {
                throw IngestionError("CSV: " + where + ", column " + detail::column_name(table, c) +
                                     ": non-finite value");
            }
            if (c == label_col) {
                if (*v != 0.0 && *v != 1.0) {
                    throw IngestionError("CSV: " + where + ", column " + detail::column_name(table, c) +
                                         ": label '" + cells[c] + "' is not 0 or 1");
                }
                labels.push_back(static_cast<int>(*v));
            } else {
                features.push_back(*v);
            }
        }
    }
    return Dataset(width - 1, std::move(features), std::move(labels));
}

/// Feature matrix from a CSV whose label column is optional: the column
/// selected by `options.label_column` is dropped when present.
struct FeatureTable {
    std::size_t dim = 0;
    std::vector<double> values;
    std::size_t rows() const { return dim == 0 ? 0 : values.size() / dim; }
};

inline FeatureTable load_features_csv(const std::string& path, const CsvOptions& options = {}) {
    const detail::CsvTable table = detail::read_csv_table(path, options.has_header);
    if (table.rows.empty()) throw IngestionError("CSV: '" + path + "' contains no data rows");
    const std::size_t width = !table.header.empty() ? table.header.size() : table.rows[0].size();
    const auto drop = detail::resolve_column(table.header, width, options.label_column, false);
    FeatureTable out;
    out.dim = width - (drop ? 1 : 0);
    if (out.dim == 0) throw IngestionError("CSV: no feature columns");
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        for (std::size_t c = 0; c < width; ++c) {
            if (drop && c == *drop) continue;
            const auto v = detail::parse_double(table.rows[r][c]);
            if (!v || !std::isfinite(*v)) {
                throw IngestionError("CSV: line " + std::to_string(table.line_numbers[r]) + ", column " +
                                     detail::column_name(table, c) + ": invalid value '" + table.rows[r][c] +
                                     "'");
            }
            out.values.push_back(*v);
        }
    }
    return out;
}

/// Decimal text with 17 significant digits; parses back to the same double.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Writes "x1,…,xd,y" rows with 17 significant digits.
inline std::string to_csv(const Dataset& data) {
    std::ostringstream out;
    for (std::size_t k = 0; k < data.dim(); ++k) out << 'x' << (k + 1) << ',';
    out << "y\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (double v : data.row(i)) out << format_double(v) << ',';
        out << data.label(i) << '\n';
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Metrics and cross-validation

/// Mean of −(y ln p + (1 − y) ln(1 − p)).
inline double log_loss(std::span<const double> p, std::span<const int> y) {
    if (p.size() != y.size()) {
        throw DomainError("log_loss: " + std::to_string(p.size()) + " predictions for " +
                          std::to_string(y.size()) + " labels");
    }
    if (p.empty()) throw DomainError("log_loss: no predictions");
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!(p[i] > 0.0 && p[i] < 1.0)) {
            throw DomainError("log_loss: prediction " + std::to_string(i) + " = " + format_double(p[i]) +
                              " outside (0, 1)");
        }
        total -= y[i] == 1 ? std::log(p[i]) : std::log1p(-p[i]);
    }
    return total / static_cast<double>(p.size());
}

/// Assignment of each point to one of k folds; fold sizes differ by at most one.
struct FoldPlan {
    std::size_t k = 0;
    std::vector<std::size_t> assignment;
    std::uint64_t seed = 0;

    std::vector<std::size_t> members(std::size_t fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignment.size(); ++i) {
            if (assignment[i] == fold) out.push_back(i);
        }
        return out;
    }
    std::vector<std::size_t> complement(std::size_t fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignment.size(); ++i) {
            if (assignment[i] != fold) out.push_back(i);
        }
        return out;
    }
};

/// Seeded permutation; position j of the permutation goes to fold j mod k.
inline FoldPlan make_folds(std::size_t m, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw ConfigError("cross-validation needs k >= 2");
    if (m < k) throw ConfigError("cross-validation needs at least k points");
    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Pcg32 rng(seed, 0x5eedf01d5ULL);
    rng.shuffle(std::span<std::size_t>(perm));
    FoldPlan plan{k, std::vector<std::size_t>(m), seed};
    for (std::size_t j = 0; j < m; ++j) plan.assignment[perm[j]] = j % k;
    return plan;
}

struct FoldResult {
    double log_loss = 0.0;
    std::size_t node_count = 0;
    std::size_t test_size = 0;
};

struct CrossValidationReport {
    std::vector<FoldResult> folds;
    double mean_log_loss = 0.0;
    double mean_node_count = 0.0;
};

/// k-fold cross-validation of `fit` under `config`. Folds run concurrently;
/// results are gathered in fold order, so the report does not depend on
/// scheduling.
inline CrossValidationReport cross_validate(const Dataset& data, const TrainConfig& config, std::size_t k,
                                            std::uint64_t seed) {
    config.validate();
    const FoldPlan plan = make_folds(data.size(), k, seed);
    std::vector<std::future<FoldResult>> jobs;
    jobs.reserve(k);
    for (std::size_t fold = 0; fold < k; ++fold) {
        jobs.push_back(std::async(std::launch::async, [&, fold] {
            const auto train_idx = plan.complement(fold);
            const auto test_idx = plan.members(fold);
            const Dataset train = data.subset(train_idx);
            const Dataset test = data.subset(test_idx);
            const FitResult model = fit(train, config);
            const auto p = predict_proba(model.tree, test);
            return FoldResult{log_loss(p, test.labels()), model.tree.internal_count(), test.size()};
        }));
    }
    CrossValidationReport report;
    for (auto& job : jobs) report.folds.push_back(job.get());
    for (const auto& f : report.folds) {
        report.mean_log_loss += f.log_loss;
        report.mean_node_count += static_cast<double>(f.node_count);
    }
    report.mean_log_loss /= static_cast<double>(k);
    report.mean_node_count /= static_cast<double>(k);
    return report;
}

}  // namespace reticulum
