#include "hota/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"

#include "hota/error.hpp"
#include "hota/morpho.hpp"

namespace hota {

ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& truth, const BinaryMask* valid) {
    if (pred.rows() != truth.rows() || pred.cols() != truth.cols() ||
        (valid && (valid->rows() != pred.rows() || valid->cols() != pred.cols()))) {
        throw ValidationError("dimension mismatch between prediction and truth masks");
    }
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (valid && !(*valid)[i]) continue;
        const bool p = pred[i], t = truth[i];
        if (p && t) ++c.tp;
        else if (p) ++c.fp;
        else if (t) ++c.fn;
        else ++c.tn;
    }
    return c;
}

namespace {

std::optional<double> ratio(double num, double den) {
    if (den == 0.0) return std::nullopt;
    return num / den;
}

}  // namespace

std::optional<double> f1_from(double precision, double recall) {
    if (precision + recall == 0.0) return std::nullopt;
    return 2.0 * precision * recall / (precision + recall);
}

Metrics2D metrics_2d(const ConfusionCounts& c) {
    const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
    const double fn = static_cast<double>(c.fn), tn = static_cast<double>(c.tn);
    Metrics2D m;
    m.accuracy = ratio(tp + tn, tp + fp + fn + tn);
    m.precision = ratio(tp, tp + fp);
    m.recall = ratio(tp, tp + fn);
    if (m.precision && m.recall) m.f1 = f1_from(*m.precision, *m.recall);
    m.iou = ratio(tp, tp + fp + fn);
    return m;
}

double mean_absolute(const std::vector<double>& errors) {
    if (errors.empty()) throw ComputationError("empty boundary");
    double sum = 0.0;
    for (double d : errors) sum += std::abs(d);
    return sum / static_cast<double>(errors.size());
}

BoundaryErrorSummary boundary_mae(const Grid& depth, const BinaryMask& mask) {
    if (depth.rows() != mask.rows() || depth.cols() != mask.cols()) {
        throw ValidationError("depth grid and mask dimensions differ");
    }
    const RegionLabels labels = connected_components(mask, Connectivity::Eight);
    BoundaryErrorSummary out;
    out.regions.resize(static_cast<std::size_t>(labels.n_regions));
    for (int i = 0; i < labels.n_regions; ++i) out.regions[static_cast<std::size_t>(i)].region_label = i + 1;

    for (const Pixel& p : boundary(mask)) {
        if (!depth.is_valid(p.row, p.col)) continue;
        const double d = depth(p.row, p.col) - 0.0;
        auto& report = out.regions[static_cast<std::size_t>(labels(p.row, p.col)) - 1];
        report.errors.push_back(d);
        out.pooled.errors.push_back(d);
    }
    if (out.pooled.errors.empty()) throw ComputationError("empty boundary");
    for (auto& report : out.regions) {
        report.n_boundary = report.errors.size();
        report.mu_bnd = report.errors.empty() ? 0.0 : mean_absolute(report.errors);
    }
    out.pooled.n_boundary = out.pooled.errors.size();
    out.pooled.mu_bnd = mean_absolute(out.pooled.errors);
    return out;
}

BeforeAfterTable before_after_report(const FloodSurface& initial, const FloodSurface& final_surface) {
    BeforeAfterTable table;
    double before_sum = 0.0, after_sum = 0.0;
    std::size_t before_n = 0, after_n = 0;
    for (const RegionResult& after : final_surface.regions) {
        const RegionResult* before = initial.region(after.label);
        if (!before) continue;
        BeforeAfterRow row;
        row.label = after.label;
        row.n_boundary = after.n_boundary_final;
        row.mae_before = before->boundary_mae_final;
        row.mae_after = after.boundary_mae_final;
        row.improvement = row.mae_before - row.mae_after;
        table.rows.push_back(row);
        before_sum += before->boundary_mae_final * static_cast<double>(before->n_boundary_final);
        before_n += before->n_boundary_final;
        after_sum += after.boundary_mae_final * static_cast<double>(after.n_boundary_final);
        after_n += after.n_boundary_final;
    }
    table.pooled.label = 0;
    table.pooled.n_boundary = after_n;
    table.pooled.mae_before = before_n ? before_sum / static_cast<double>(before_n) : 0.0;
    table.pooled.mae_after = after_n ? after_sum / static_cast<double>(after_n) : 0.0;
    table.pooled.improvement = table.pooled.mae_before - table.pooled.mae_after;
    return table;
}

namespace {

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

std::string BeforeAfterTable::to_csv() const {
    std::ostringstream out;
    out << "label,n_boundary,mae_before,mae_after,improvement\n";
    auto emit = [&](const std::string& label, const BeforeAfterRow& r) {
        out << label << ',' << r.n_boundary << ',' << fixed(r.mae_before, 6) << ',' << fixed(r.mae_after, 6) << ','
            << fixed(r.improvement, 6) << '\n';
    };
    for (const auto& r : rows) emit(std::to_string(r.label), r);
    emit("pooled", pooled);
    return out.str();
}

std::string BeforeAfterTable::to_json() const {
    auto row_json = [](const BeforeAfterRow& r) {
        return nlohmann::ordered_json{{"label", r.label},
                                      {"n_boundary", r.n_boundary},
                                      {"mae_before", r.mae_before},
                                      {"mae_after", r.mae_after},
                                      {"improvement", r.improvement}};
    };
    nlohmann::ordered_json doc;
    doc["regions"] = nlohmann::ordered_json::array();
    for (const auto& r : rows) doc["regions"].push_back(row_json(r));
    doc["pooled"] = row_json(pooled);
    return doc.dump(2) + "\n";
}

std::string format_percent(const std::optional<double>& fraction) {
    if (!fraction) return "undefined";
    return fixed(*fraction * 100.0, 2);
}

}  // namespace hota
