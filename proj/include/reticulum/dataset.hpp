#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "reticulum/errors.hpp"

namespace reticulum {

/// m points in ℝᵈ (row-major) with binary outcomes.
class Dataset {
public:
    explicit Dataset(std::size_t dim) : dim_(dim) {
        if (dim == 0) throw StructuralError("Dataset: dimension must be at least 1");
    }

    Dataset(std::size_t dim, std::vector<double> features, std::vector<int> labels)
        : dim_(dim), features_(std::move(features)), labels_(std::move(labels)) {
        if (dim == 0) throw StructuralError("Dataset: dimension must be at least 1");
        if (features_.size() != labels_.size() * dim_) {
            throw StructuralError("Dataset: feature count " + std::to_string(features_.size()) +
                                  " does not match " + std::to_string(labels_.size()) +
                                  " labels of dimension " + std::to_string(dim_));
        }
        for (std::size_t i = 0; i < labels_.size(); ++i) check_row(row(i), labels_[i], i);
    }

    void add(std::span<const double> x, int label) {
        if (x.size() != dim_) {
            throw StructuralError("Dataset: point of dimension " + std::to_string(x.size()) +
                                  " added to dataset of dimension " + std::to_string(dim_));
        }
        check_row(x, label, labels_.size());
        features_.insert(features_.end(), x.begin(), x.end());
        labels_.push_back(label);
    }

    std::size_t size() const { return labels_.size(); }
    bool empty() const { return labels_.empty(); }
    std::size_t dim() const { return dim_; }

    std::span<const double> row(std::size_t i) const {
        return {features_.data() + i * dim_, dim_};
    }
    int label(std::size_t i) const { return labels_[i]; }
    std::span<const int> labels() const { return labels_; }
    std::span<const double> features() const { return features_; }

    std::size_t count_label(int label) const {
        std::size_t n = 0;
        for (int y : labels_) n += (y == label);
        return n;
    }

    /// Rows at the given indices, in the given order.
    Dataset subset(std::span<const std::size_t> indices) const {
        Dataset out(dim_);
        out.features_.reserve(indices.size() * dim_);
        out.labels_.reserve(indices.size());
        for (std::size_t i : indices) {
            const auto x = row(i);
            out.features_.insert(out.features_.end(), x.begin(), x.end());
            out.labels_.push_back(labels_[i]);
        }
        return out;
    }

    bool operator==(const Dataset&) const = default;

private:
    static void check_row(std::span<const double> x, int label, std::size_t index) {
        for (double v : x) {
            if (!std::isfinite(v)) {
                throw StructuralError("Dataset: non-finite feature in row " + std::to_string(index));
            }
        }
        if (label != 0 && label != 1) {
            throw StructuralError("Dataset: label in row " + std::to_string(index) +
                                  " is not binary");
        }
    }

    std::size_t dim_;
    std::vector<double> features_;
    std::vector<int> labels_;
};

}  // namespace reticulum
