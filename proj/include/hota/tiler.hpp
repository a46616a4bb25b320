#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hota/grid.hpp"

namespace hota {

enum class TilingMode { Conventional, Overlap, Hierarchical, Hota };

std::string to_string(TilingMode mode);
TilingMode parse_tiling_mode(const std::string& text);

struct TileSpec {
    std::vector<int> scales{64, 128, 256, 512};
    double overlap_fraction = 0.5;
    TilingMode mode = TilingMode::Hota;

    void validate() const;

    /// Overlap after applying the mode (conventional/hierarchical use none).
    double effective_overlap() const;
    /// Indices into `scales` used by the mode, before extent filtering.
    std::vector<int> mode_scale_ids() const;
    /// round-half-up(size * (1 - overlap)), at least 1.
    int stride(int size) const;
};

struct Tile {
    int row0 = 0;
    int col0 = 0;
    int size = 0;
    int scale_id = 0;

    bool operator==(const Tile&) const = default;
};

struct TilePlan {
    std::vector<Tile> tiles;
    /// Scale ids that produced at least one tile, ascending.
    std::vector<int> active_scale_ids;
    /// Scale ids skipped because the window exceeds the raster.
    std::vector<int> skipped_scale_ids;
};

/// Window origins along one axis: 0, stride, 2*stride, ... plus a final
/// origin clamped to extent - size when the regular sequence stops short.
std::vector<int> axis_origins(int extent, int size, int stride);

TilePlan plan_tiles(int rows, int cols, const TileSpec& spec);

/// Per-pixel number of tiles covering each cell.
Grid coverage_count(int rows, int cols, const std::vector<Tile>& tiles);

/// Band-major patch copied out of a raster. Nodata cells hold 0 and are
/// flagged invalid.
struct TilePatch {
    Tile tile;
    int rows = 0;
    int cols = 0;
    std::vector<std::string> band_names;
    std::vector<double> values;  // band * rows * cols
    std::vector<std::uint8_t> valid;

    std::size_t pixel_count() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
    std::size_t band_count() const { return band_names.size(); }
    double value(std::size_t band, std::size_t pixel) const { return values[band * pixel_count() + pixel]; }
    std::optional<std::size_t> band_index(const std::string& name) const;
};

TilePatch extract_tile(const MultibandRaster& raster, const Tile& tile);

/// Arbitrary rectangular window; extract_tile is the square special case.
TilePatch extract_window(const MultibandRaster& raster, int row0, int col0, int rows, int cols);

}  // namespace hota
