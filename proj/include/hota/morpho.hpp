#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "hota/grid.hpp"

namespace hota {

enum class StructuringElement { Square3, Cross3 };

enum class Connectivity { Four = 4, Eight = 8 };

/// Region labels in raster-scan discovery order; 0 is background.
struct RegionLabels {
    GridFrame frame;
    std::vector<std::int32_t> labels;
    int n_regions = 0;

    std::int32_t operator()(int row, int col) const {
        return labels[static_cast<std::size_t>(row) * static_cast<std::size_t>(frame.cols) + static_cast<std::size_t>(col)];
    }
    Grid to_grid() const;
    /// Mask of a single label.
    BinaryMask region_mask(int label) const;
};

using PixelPredicate = std::function<bool(Pixel)>;

// Out-of-raster neighbours are ignored by both primitives, which keeps
// erosion and dilation adjoint (so opening/closing stay idempotent).
BinaryMask erode(const BinaryMask& mask, StructuringElement se);
BinaryMask dilate(const BinaryMask& mask, StructuringElement se);
BinaryMask opening(const BinaryMask& mask, StructuringElement se);
BinaryMask closing(const BinaryMask& mask, StructuringElement se);

/// Opening followed by closing.
BinaryMask smooth(const BinaryMask& mask, StructuringElement se = StructuringElement::Square3);

RegionLabels connected_components(const BinaryMask& mask, Connectivity connectivity = Connectivity::Eight);

bool is_boundary(const BinaryMask& mask, int row, int col);

/// Inner boundary: true pixels with at least one false or off-raster
/// 4-neighbour, in raster-scan order.
std::vector<Pixel> boundary(const BinaryMask& mask);

/// Adds the false 4-neighbours of boundary pixels for which `candidate`
/// holds (one ring).
BinaryMask dilate_region(const BinaryMask& mask, const PixelPredicate& candidate);

/// Removes boundary pixels for which `candidate` holds (one ring). An
/// 8-connected region that would vanish keeps its first raster-order pixel.
BinaryMask erode_region(const BinaryMask& mask, const PixelPredicate& candidate);

/// The four 4-neighbour offsets (north, west, east, south) as (drow, dcol).
inline constexpr int kNeighbors4[4][2] = {{-1, 0}, {0, -1}, {0, 1}, {1, 0}};

}  // namespace hota
