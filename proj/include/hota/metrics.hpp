#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hota/depth.hpp"
#include "hota/grid.hpp"

namespace hota {

struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;

    std::uint64_t total() const { return tp + fp + fn + tn; }
    bool operator==(const ConfusionCounts&) const = default;
};

/// Each metric is empty when its denominator is zero.
struct Metrics2D {
    std::optional<double> accuracy;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
    std::optional<double> iou;
};

/// Counts over pixels where `valid` (if given) is true.
ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& truth, const BinaryMask* valid = nullptr);

Metrics2D metrics_2d(const ConfusionCounts& c);

/// F1 from precision and recall alone (harmonic mean).
std::optional<double> f1_from(double precision, double recall);

struct BoundaryErrorReport {
    int region_label = 0;  // 0 for the pooled report
    std::size_t n_boundary = 0;
    double mu_bnd = 0.0;
    std::vector<double> errors;
};

struct BoundaryErrorSummary {
    std::vector<BoundaryErrorReport> regions;
    BoundaryErrorReport pooled;
};

/// Mean absolute boundary depth against a 0 m reference, per 8-connected
/// region and pooled over every boundary pixel.
BoundaryErrorSummary boundary_mae(const Grid& depth, const BinaryMask& mask);

/// mean |d| over the given errors.
double mean_absolute(const std::vector<double>& errors);

struct BeforeAfterRow {
    int label = 0;  // 0 for the pooled row
    std::size_t n_boundary = 0;
    double mae_before = 0.0;
    double mae_after = 0.0;
    double improvement = 0.0;  // before - after
};

struct BeforeAfterTable {
    std::vector<BeforeAfterRow> rows;
    BeforeAfterRow pooled;

    /// Columns: label,n_boundary,mae_before,mae_after,improvement; pooled last.
    std::string to_csv() const;
    std::string to_json() const;
};

/// Per-region boundary MAE before and after refinement, matched by label.
BeforeAfterTable before_after_report(const FloodSurface& initial, const FloodSurface& final_surface);

/// Percentage with two decimals ("89.52"), or "undefined".
std::string format_percent(const std::optional<double>& fraction);

}  // namespace hota
