#include "hota/depth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <spdlog/spdlog.h>

#include "hota/error.hpp"

namespace hota {

std::string to_string(SurfaceEstimator estimator) {
    return estimator == SurfaceEstimator::Median ? "median" : "mean";
}

SurfaceEstimator parse_surface_estimator(const std::string& text) {
    if (text == "median") return SurfaceEstimator::Median;
    if (text == "mean") return SurfaceEstimator::Mean;
    throw ValidationError("unknown surface estimator \"" + text + "\"");
}

std::string to_string(Termination termination) {
    switch (termination) {
        case Termination::Converged: return "converged";
        case Termination::VolumeBreak: return "volume_break";
        case Termination::MaxIter: return "max_iter";
        case Termination::Stalled: return "stalled";
    }
    return "unknown";
}

void DepthConfig::validate() const {
    if (!(volume_tolerance > 0.0 && volume_tolerance < 1.0)) throw ValidationError("volume tolerance must lie in (0, 1)");
    if (!(boundary_depth_tolerance > 0.0)) throw ValidationError("boundary depth tolerance must be positive");
    if (max_iterations <= 0) throw ValidationError("max iterations must be positive");
}

const RegionResult* FloodSurface::region(int label) const {
    for (const auto& r : regions) {
        if (r.label == label) return &r;
    }
    return nullptr;
}

// ---------------------------------------------------------------------------

SlopeField slope_field(const Grid& dem) {
    SlopeField field{Grid(dem.frame()), Grid(dem.frame())};
    const double csx = dem.georef().cell_size_x;
    const double csy = dem.georef().cell_size_y;
    auto ok = [&](int r, int c) { return dem.contains(r, c) && dem.is_valid(r, c); };

    // Derivative along one axis given the two neighbour positions.
    auto derivative = [&](int r, int c, int r_lo, int c_lo, int r_hi, int c_hi, double spacing) {
        const bool lo = ok(r_lo, c_lo), hi = ok(r_hi, c_hi);
        if (lo && hi) return (dem(r_hi, c_hi) - dem(r_lo, c_lo)) / (2.0 * spacing);
        if (hi) return (dem(r_hi, c_hi) - dem(r, c)) / spacing;
        if (lo) return (dem(r, c) - dem(r_lo, c_lo)) / spacing;
        return 0.0;
    };

    for (int r = 0; r < dem.rows(); ++r) {
        for (int c = 0; c < dem.cols(); ++c) {
            if (!dem.is_valid(r, c)) continue;
            field.gx(r, c) = derivative(r, c, r, c - 1, r, c + 1, csx);
            // North is row - 1.
            field.gy(r, c) = derivative(r, c, r + 1, c, r - 1, c, csy);
        }
    }
    return field;
}

BinaryMask align_to_dem(const BinaryMask& mask, const Grid& dem) {
    if (mask.frame().co_registered(dem.frame())) {
        BinaryMask out(dem.frame());
        for (std::size_t i = 0; i < mask.size(); ++i) out.set(i, mask[i]);
        return out;
    }
    return resample(mask, dem.frame());
}

double estimate_surface(const Grid& dem, std::span<const Pixel> boundary_pixels, SurfaceEstimator estimator) {
    std::vector<double> elevations;
    elevations.reserve(boundary_pixels.size());
    for (const Pixel& p : boundary_pixels) {
        if (dem.is_valid(p.row, p.col)) elevations.push_back(dem(p.row, p.col));
    }
    if (elevations.empty()) throw ComputationError("no valid DEM sample on the region boundary");
    if (estimator == SurfaceEstimator::Mean) {
        double sum = 0.0;
        for (double e : elevations) sum += e;
        return sum / static_cast<double>(elevations.size());
    }
    const std::size_t mid = elevations.size() / 2;
    std::nth_element(elevations.begin(), elevations.begin() + static_cast<std::ptrdiff_t>(mid), elevations.end());
    const double upper = elevations[mid];
    if (elevations.size() % 2 == 1) return upper;
    const double lower = *std::max_element(elevations.begin(), elevations.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

Grid depth_from_surface(const Grid& dem, const RegionLabels& labels, std::span<const double> water_surface,
                        std::size_t* nodata_count) {
    if (!labels.frame.co_registered(dem.frame())) throw ValidationError("labels are not aligned with the DEM");
    Grid depth(dem.frame());
    std::size_t missing = 0;
    for (std::size_t i = 0; i < depth.size(); ++i) {
        const int label = labels.labels[i];
        if (label == 0) continue;
        if (static_cast<std::size_t>(label) > water_surface.size()) {
            throw ValidationError("no water surface for region " + std::to_string(label));
        }
        if (!dem.is_valid(i)) {
            ++missing;
            continue;
        }
        depth[i] = std::max(0.0, water_surface[static_cast<std::size_t>(label) - 1] - dem[i]);
    }
    if (missing > 0) spdlog::warn("{} flooded cell(s) have nodata elevation; depth set to 0", missing);
    if (nodata_count) *nodata_count = missing;
    return depth;
}

double flood_volume(const Grid& depth) {
    double sum = 0.0;
    for (std::size_t i = 0; i < depth.size(); ++i) {
        if (depth.is_valid(i)) sum += depth[i];
    }
    return sum * depth.georef().cell_area();
}

double outward_slope(const SlopeField& slope, const BinaryMask& mask, Pixel p) {
    if (!mask.contains(p.row, p.col) || !is_boundary(mask, p.row, p.col)) {
        throw ValidationError("pixel (" + std::to_string(p.row) + "," + std::to_string(p.col) +
                              ") is not on the mask boundary");
    }
    // Map-frame unit vectors: row - 1 is north (+y), col + 1 is east (+x).
    double nx = 0.0, ny = 0.0;
    int n = 0;
    for (const auto& d : kNeighbors4) {
        const int rr = p.row + d[0], cc = p.col + d[1];
        if (mask.contains(rr, cc) && mask(rr, cc)) continue;
        nx += d[1];
        ny -= d[0];
        ++n;
    }
    const double len = std::hypot(nx, ny);
    if (n == 0 || len == 0.0) return 0.0;
    return (slope.gx(p.row, p.col) * nx + slope.gy(p.row, p.col) * ny) / len;
}

double outward_slope(const Grid& dem, const BinaryMask& mask, Pixel p) {
    return outward_slope(slope_field(dem), mask, p);
}

// ---------------------------------------------------------------------------
// Per-region optimisation

namespace {

struct Window {
    int row0 = 0;
    int col0 = 0;
    int rows = 0;
    int cols = 0;
};

GridFrame crop_frame(const GridFrame& frame, const Window& w) {
    GridFrame out = frame;
    out.rows = w.rows;
    out.cols = w.cols;
    out.georef.origin_x = frame.georef.origin_x + w.col0 * frame.georef.cell_size_x;
    out.georef.origin_y = frame.georef.origin_y - w.row0 * frame.georef.cell_size_y;
    return out;
}

Grid crop(const Grid& grid, const Window& w) {
    std::vector<double> values(static_cast<std::size_t>(w.rows) * static_cast<std::size_t>(w.cols));
    for (int r = 0; r < w.rows; ++r) {
        for (int c = 0; c < w.cols; ++c) {
            values[static_cast<std::size_t>(r) * w.cols + c] = grid(w.row0 + r, w.col0 + c);
        }
    }
    Grid out(crop_frame(grid.frame(), w), std::move(values), grid.nodata());
    return out;
}

struct RegionState {
    BinaryMask mask;
    std::vector<Pixel> boundary_pixels;
    double water_surface = 0.0;
    double volume = 0.0;
    double boundary_mae = 0.0;
    std::size_t n_boundary = 0;
};

class RegionOptimizer {
public:
    RegionOptimizer(const Grid& dem, const SlopeField& slope, const DepthConfig& cfg)
        : dem_(dem), slope_(slope), cfg_(cfg) {}

    RegionState evaluate(BinaryMask mask) const {
        RegionState s;
        s.boundary_pixels = boundary(mask);
        s.water_surface = estimate_surface(dem_, s.boundary_pixels, cfg_.surface_estimator);
        double depth_sum = 0.0;
        for (std::size_t i = 0; i < mask.size(); ++i) {
            if (mask[i] && dem_.is_valid(i)) depth_sum += std::max(0.0, s.water_surface - dem_[i]);
        }
        s.volume = depth_sum * dem_.georef().cell_area();
        double mae_sum = 0.0;
        for (const Pixel& p : s.boundary_pixels) {
            if (!dem_.is_valid(p.row, p.col)) continue;
            mae_sum += std::max(0.0, s.water_surface - dem_(p.row, p.col));
            ++s.n_boundary;
        }
        s.boundary_mae = mae_sum / static_cast<double>(s.n_boundary);
        s.mask = std::move(mask);
        return s;
    }

    // Expansion where boundary depth is positive or terrain falls away from
    // the water; otherwise the dry boundary pixel is removed.
    BinaryMask propose(const RegionState& s, std::size_t& added, std::size_t& removed) const {
        const BinaryMask& mask = s.mask;
        std::vector<std::uint8_t> add(mask.size(), 0), drop(mask.size(), 0);
        for (const Pixel& p : s.boundary_pixels) {
            if (!dem_.is_valid(p.row, p.col)) continue;
            const double depth = std::max(0.0, s.water_surface - dem_(p.row, p.col));
            const double slope = outward_slope(slope_, mask, p);
            if (depth > 0.0 || slope < 0.0) {
                for (const auto& d : kNeighbors4) {
                    const int rr = p.row + d[0], cc = p.col + d[1];
                    if (!mask.contains(rr, cc) || mask(rr, cc) || !dem_.is_valid(rr, cc)) continue;
                    if (dem_(rr, cc) < s.water_surface || slope < 0.0) add[mask.index(rr, cc)] = 1;
                }
            } else {
                drop[mask.index(p.row, p.col)] = 1;
            }
        }
        const BinaryMask shrunk = erode_region(mask, [&](Pixel q) { return drop[mask.index(q.row, q.col)] != 0; });
        const BinaryMask grown = dilate_region(mask, [&](Pixel q) { return add[mask.index(q.row, q.col)] != 0; });
        BinaryMask next = shrunk;
        added = removed = 0;
        for (std::size_t i = 0; i < mask.size(); ++i) {
            if (grown[i] && !mask[i]) {
                next.set(i, true);
                ++added;
            }
            if (mask[i] && !shrunk[i]) ++removed;
        }
        return next;
    }

    RegionResult run(int label, const BinaryMask& initial_mask, bool refine, RegionState& final_state) const {
        RegionResult result;
        result.label = label;
        RegionState state = evaluate(initial_mask);
        result.boundary_mae_initial = state.boundary_mae;
        result.n_boundary_initial = state.n_boundary;
        result.pixels_initial = state.mask.count();
        result.termination = state.boundary_mae < cfg_.boundary_depth_tolerance ? Termination::Converged
                                                                                : Termination::MaxIter;

        if (refine) {
            double reference_volume = state.volume;
            result.termination = Termination::MaxIter;
            for (int n = 1; n <= cfg_.max_iterations; ++n) {
                IterationRecord rec;
                rec.iteration = n;
                rec.water_surface = state.water_surface;
                rec.boundary_mae = state.boundary_mae;
                rec.volume_reference = reference_volume;
                result.iterations = n;

                if (state.boundary_mae < cfg_.boundary_depth_tolerance) {
                    result.trace.push_back(rec);
                    result.termination = Termination::Converged;
                    break;
                }
                BinaryMask next = propose(state, rec.added, rec.removed);
                rec.step_proposed = true;
                if (next == state.mask) {
                    result.trace.push_back(rec);
                    result.termination = Termination::Stalled;
                    break;
                }
                RegionState candidate;
                try {
                    candidate = evaluate(std::move(next));
                } catch (const ComputationError&) {
                    result.trace.push_back(rec);
                    result.termination = Termination::Stalled;
                    break;
                }
                rec.volume_candidate = candidate.volume;
                if (std::abs(candidate.volume - reference_volume) > cfg_.volume_tolerance * reference_volume) {
                    result.trace.push_back(rec);
                    result.termination = Termination::VolumeBreak;
                    break;
                }
                rec.accepted = true;
                result.trace.push_back(rec);
                state = std::move(candidate);
                reference_volume = state.volume;
            }
            if (result.termination == Termination::MaxIter && state.boundary_mae < cfg_.boundary_depth_tolerance) {
                result.termination = Termination::Converged;
            }
        }

        result.water_surface = state.water_surface;
        result.volume = state.volume;
        result.boundary_mae_final = state.boundary_mae;
        result.n_boundary_final = state.n_boundary;
        result.pixels_final = state.mask.count();
        final_state = std::move(state);
        return result;
    }

private:
    const Grid& dem_;
    const SlopeField& slope_;
    const DepthConfig& cfg_;
};

FloodSurface build_surface(const BinaryMask& mask, const Grid& dem, const DepthConfig& cfg, bool refine) {
    cfg.validate();
    if (!mask.frame().co_registered(dem.frame())) {
        throw ValidationError("mask is not aligned with the DEM grid; call align_to_dem first");
    }
    if (mask.empty()) throw ComputationError("empty mask: nothing to estimate");

    const BinaryMask smoothed = smooth(mask, StructuringElement::Square3);
    if (smoothed.empty()) throw ComputationError("mask is empty after morphological smoothing");
    const RegionLabels regions = connected_components(smoothed, cfg.connectivity);
    const SlopeField slope = slope_field(dem);

    // Bounding boxes per region.
    std::vector<Window> boxes(static_cast<std::size_t>(regions.n_regions) + 1,
                              Window{std::numeric_limits<int>::max(), std::numeric_limits<int>::max(), -1, -1});
    for (int r = 0; r < mask.rows(); ++r) {
        for (int c = 0; c < mask.cols(); ++c) {
            const int label = regions(r, c);
            if (label == 0) continue;
            auto& b = boxes[static_cast<std::size_t>(label)];
            b.row0 = std::min(b.row0, r);
            b.col0 = std::min(b.col0, c);
            b.rows = std::max(b.rows, r);  // holds max row until converted
            b.cols = std::max(b.cols, c);
        }
    }

    FloodSurface surface;
    surface.mask = BinaryMask(dem.frame());
    surface.depth = Grid(dem.frame());
    surface.labels.frame = dem.frame();
    surface.labels.labels.assign(dem.size(), 0);
    surface.labels.n_regions = regions.n_regions;

    // A region grows at most one ring per iteration.
    const int pad = refine ? cfg.max_iterations + 2 : 1;
    for (int label = 1; label <= regions.n_regions; ++label) {
        const auto& b = boxes[static_cast<std::size_t>(label)];
        Window w;
        w.row0 = std::max(0, b.row0 - pad);
        w.col0 = std::max(0, b.col0 - pad);
        w.rows = std::min(dem.rows(), b.rows + pad + 1) - w.row0;
        w.cols = std::min(dem.cols(), b.cols + pad + 1) - w.col0;

        const Grid sub_dem = crop(dem, w);
        const SlopeField sub_slope{crop(slope.gx, w), crop(slope.gy, w)};
        BinaryMask sub_mask(sub_dem.frame());
        for (int r = 0; r < w.rows; ++r) {
            for (int c = 0; c < w.cols; ++c) sub_mask.set(r, c, regions(w.row0 + r, w.col0 + c) == label);
        }

        RegionOptimizer optimizer(sub_dem, sub_slope, cfg);
        RegionState final_state;
        RegionResult result;
        try {
            result = optimizer.run(label, sub_mask, refine, final_state);
        } catch (const ComputationError& e) {
            const std::string msg = "region " + std::to_string(label) + " dropped: " + e.what();
            spdlog::warn("{}", msg);
            surface.warnings.push_back(msg);
            continue;
        }

        // Lower labels keep contested pixels.
        for (int r = 0; r < w.rows; ++r) {
            for (int c = 0; c < w.cols; ++c) {
                if (!final_state.mask(r, c)) continue;
                const std::size_t gi = dem.index(w.row0 + r, w.col0 + c);
                if (surface.labels.labels[gi] != 0) continue;
                surface.labels.labels[gi] = label;
                surface.mask.set(gi, true);
                if (dem.is_valid(gi)) {
                    surface.depth[gi] = std::max(0.0, result.water_surface - dem[gi]);
                } else {
                    ++surface.nodata_pixels;
                }
            }
        }
        surface.iterations_used = std::max(surface.iterations_used, result.iterations);
        surface.regions.push_back(std::move(result));
    }
    if (surface.nodata_pixels > 0) {
        const std::string msg = std::to_string(surface.nodata_pixels) + " flooded cell(s) have nodata elevation";
        spdlog::warn("{}", msg);
        surface.warnings.push_back(msg);
    }
    surface.volume = flood_volume(surface.depth);
    return surface;
}

}  // namespace

FloodSurface differencing_surface(const BinaryMask& mask, const Grid& dem, const DepthConfig& cfg) {
    return build_surface(mask, dem, cfg, false);
}

FloodSurface joint_optimize(const BinaryMask& mask, const Grid& dem, const DepthConfig& cfg) {
    return build_surface(mask, dem, cfg, true);
}

}  // namespace hota
