#pragma once

#include <span>
#include <string>
#include <vector>

#include "hota/grid.hpp"
#include "hota/morpho.hpp"

namespace hota {

enum class SurfaceEstimator { Median, Mean };

std::string to_string(SurfaceEstimator estimator);
SurfaceEstimator parse_surface_estimator(const std::string& text);

struct DepthConfig {
    double volume_tolerance = 0.05;          // fractional, per accepted step
    double boundary_depth_tolerance = 0.05;  // metres
    int max_iterations = 50;
    SurfaceEstimator surface_estimator = SurfaceEstimator::Median;
    Connectivity connectivity = Connectivity::Eight;

    void validate() const;
};

enum class Termination {
    Converged,    // mean boundary depth below tolerance
    VolumeBreak,  // a step violated the volume tolerance and was reverted
    MaxIter,
    Stalled,      // the proposed step left the region unchanged
};

std::string to_string(Termination termination);

/// dE/dx (east) and dE/dy (north) in metres per metre. Central differences,
/// one-sided at raster edges and next to nodata; zero at nodata cells.
struct SlopeField {
    Grid gx;
    Grid gy;
};

SlopeField slope_field(const Grid& dem);

/// One refinement iteration of a region. Converged iterations carry no step.
struct IterationRecord {
    int iteration = 0;
    double water_surface = 0.0;
    double boundary_mae = 0.0;
    double volume_reference = 0.0;  // last accepted volume (V0)
    double volume_candidate = 0.0;  // volume after the proposed step
    std::size_t added = 0;
    std::size_t removed = 0;
    bool step_proposed = false;
    bool accepted = false;
};

struct RegionResult {
    int label = 0;
    double water_surface = 0.0;
    double volume = 0.0;
    int iterations = 0;
    Termination termination = Termination::Converged;
    double boundary_mae_initial = 0.0;
    double boundary_mae_final = 0.0;
    std::size_t n_boundary_initial = 0;
    std::size_t n_boundary_final = 0;
    std::size_t pixels_initial = 0;
    std::size_t pixels_final = 0;
    std::vector<IterationRecord> trace;
};

/// Refined mask M*, depth D* and per-region water surfaces.
struct FloodSurface {
    BinaryMask mask;
    Grid depth;
    /// Owning region label per pixel (0 outside the mask).
    RegionLabels labels;
    std::vector<RegionResult> regions;
    double volume = 0.0;
    int iterations_used = 0;
    std::size_t nodata_pixels = 0;
    std::vector<std::string> warnings;

    const RegionResult* region(int label) const;
};

/// Nearest-neighbour resampling of the mask onto the DEM grid.
BinaryMask align_to_dem(const BinaryMask& mask, const Grid& dem);

/// Median or mean of valid DEM values at the given pixels.
double estimate_surface(const Grid& dem, std::span<const Pixel> boundary_pixels, SurfaceEstimator estimator);

/// D = max(0, W_label - E) inside the mask, 0 outside and at nodata cells.
/// `water_surface[label - 1]` is the surface of region `label`.
Grid depth_from_surface(const Grid& dem, const RegionLabels& labels, std::span<const double> water_surface,
                        std::size_t* nodata_count = nullptr);

/// Sum of depth times cell area (cubic metres).
double flood_volume(const Grid& depth);

/// Directional derivative of the DEM along the outward normal of a boundary
/// pixel. Negative means terrain descends away from the water.
double outward_slope(const SlopeField& slope, const BinaryMask& mask, Pixel p);
double outward_slope(const Grid& dem, const BinaryMask& mask, Pixel p);

/// Plain DEM differencing: smooth, estimate W per region, D = max(0, W - E).
FloodSurface differencing_surface(const BinaryMask& mask, const Grid& dem, const DepthConfig& cfg);

/// Dual-constraint depth/boundary refinement, each 8-connected region
/// optimised independently.
FloodSurface joint_optimize(const BinaryMask& mask, const Grid& dem, const DepthConfig& cfg);

}  // namespace hota
