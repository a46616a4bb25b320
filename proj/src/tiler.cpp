#include "hota/tiler.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "hota/error.hpp"

namespace hota {

std::string to_string(TilingMode mode) {
    switch (mode) {
        case TilingMode::Conventional: return "conventional";
        case TilingMode::Overlap: return "overlap";
        case TilingMode::Hierarchical: return "hierarchical";
        case TilingMode::Hota: return "hota";
    }
    return "unknown";
}

TilingMode parse_tiling_mode(const std::string& text) {
    if (text == "conventional") return TilingMode::Conventional;
    if (text == "overlap") return TilingMode::Overlap;
    if (text == "hierarchical") return TilingMode::Hierarchical;
    if (text == "hota") return TilingMode::Hota;
    throw ValidationError("unknown tiling mode \"" + text + "\"");
}

void TileSpec::validate() const {
    if (scales.empty()) throw ValidationError("tile scales must be non-empty");
    for (std::size_t i = 0; i < scales.size(); ++i) {
        if (scales[i] < 8) throw ValidationError("tile scale " + std::to_string(scales[i]) + " is below 8 pixels");
        if (i > 0 && scales[i] <= scales[i - 1]) throw ValidationError("tile scales must be strictly increasing");
    }
    if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0)) {
        throw ValidationError("overlap fraction must lie in [0, 1)");
    }
}

double TileSpec::effective_overlap() const {
    return (mode == TilingMode::Overlap || mode == TilingMode::Hota) ? overlap_fraction : 0.0;
}

std::vector<int> TileSpec::mode_scale_ids() const {
    if (mode == TilingMode::Conventional || mode == TilingMode::Overlap) return {0};
    std::vector<int> ids(scales.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
    return ids;
}

int TileSpec::stride(int size) const {
    const double raw = size * (1.0 - effective_overlap());
    return std::max(1, static_cast<int>(std::floor(raw + 0.5)));
}

std::vector<int> axis_origins(int extent, int size, int stride) {
    std::vector<int> origins;
    int origin = 0;
    for (; origin + size <= extent; origin += stride) origins.push_back(origin);
    if (origins.empty() || origins.back() + size < extent) {
        const int last = extent - size;
        if (origins.empty() || origins.back() != last) origins.push_back(last);
    }
    return origins;
}

TilePlan plan_tiles(int rows, int cols, const TileSpec& spec) {
    spec.validate();
    const int smallest = spec.scales.front();
    if (rows < smallest || cols < smallest) {
        throw ValidationError("raster " + std::to_string(rows) + "x" + std::to_string(cols) +
                              " is smaller than the smallest tile scale " + std::to_string(smallest));
    }

    TilePlan plan;
    for (int id : spec.mode_scale_ids()) {
        const int size = spec.scales[static_cast<std::size_t>(id)];
        if (size > rows || size > cols) {
            spdlog::warn("tile scale {} exceeds raster {}x{}; skipped", size, rows, cols);
            plan.skipped_scale_ids.push_back(id);
            continue;
        }
        const int stride = spec.stride(size);
        const auto row_origins = axis_origins(rows, size, stride);
        const auto col_origins = axis_origins(cols, size, stride);
        for (int r : row_origins) {
            for (int c : col_origins) plan.tiles.push_back(Tile{r, c, size, id});
        }
        plan.active_scale_ids.push_back(id);
    }
    return plan;
}

Grid coverage_count(int rows, int cols, const std::vector<Tile>& tiles) {
    GridFrame frame{rows, cols, {}};
    // 2D difference array, prefix-summed once.
    std::vector<long long> diff(static_cast<std::size_t>(rows + 1) * static_cast<std::size_t>(cols + 1), 0);
    auto at = [&](int r, int c) -> long long& { return diff[static_cast<std::size_t>(r) * (cols + 1) + c]; };
    for (const auto& t : tiles) {
        const int r1 = std::min(rows, t.row0 + t.size);
        const int c1 = std::min(cols, t.col0 + t.size);
        const int r0 = std::max(0, t.row0);
        const int c0 = std::max(0, t.col0);
        if (r0 >= r1 || c0 >= c1) continue;
        at(r0, c0) += 1;
        at(r0, c1) -= 1;
        at(r1, c0) -= 1;
        at(r1, c1) += 1;
    }
    Grid out(frame);
    for (int r = 0; r <= rows; ++r) {
        for (int c = 0; c <= cols; ++c) {
            long long v = at(r, c);
            if (r > 0) v += at(r - 1, c);
            if (c > 0) v += at(r, c - 1);
            if (r > 0 && c > 0) v -= at(r - 1, c - 1);
            at(r, c) = v;
        }
    }
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) out(r, c) = static_cast<double>(at(r, c));
    }
    return out;
}

std::optional<std::size_t> TilePatch::band_index(const std::string& name) const {
    auto it = std::find(band_names.begin(), band_names.end(), name);
    if (it == band_names.end()) return std::nullopt;
    return static_cast<std::size_t>(it - band_names.begin());
}

TilePatch extract_window(const MultibandRaster& raster, int row0, int col0, int rows, int cols) {
    if (row0 < 0 || col0 < 0 || rows <= 0 || cols <= 0 || row0 + rows > raster.rows() ||
        col0 + cols > raster.cols()) {
        throw ValidationError("window (" + std::to_string(row0) + "," + std::to_string(col0) + ") " +
                              std::to_string(rows) + "x" + std::to_string(cols) + " is out of bounds for raster " +
                              std::to_string(raster.rows()) + "x" + std::to_string(raster.cols()));
    }
    TilePatch patch;
    patch.rows = rows;
    patch.cols = cols;
    patch.band_names = raster.band_names();
    const std::size_t n = patch.pixel_count();
    patch.values.assign(n * raster.band_count(), 0.0);
    patch.valid.assign(n, 1);

    for (std::size_t b = 0; b < raster.band_count(); ++b) {
        const Grid& band = raster.band(b);
        double* dst = patch.values.data() + b * n;
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) {
                const std::size_t src = band.index(row0 + r, col0 + c);
                const std::size_t p = static_cast<std::size_t>(r) * cols + c;
                if (band.is_valid(src)) {
                    dst[p] = band[src];
                } else {
                    patch.valid[p] = 0;
                }
            }
        }
    }
    // A pixel invalid in any band is zeroed in all bands.
    for (std::size_t p = 0; p < n; ++p) {
        if (patch.valid[p]) continue;
        for (std::size_t b = 0; b < raster.band_count(); ++b) patch.values[b * n + p] = 0.0;
    }
    return patch;
}

TilePatch extract_tile(const MultibandRaster& raster, const Tile& tile) {
    TilePatch patch = extract_window(raster, tile.row0, tile.col0, tile.size, tile.size);
    patch.tile = tile;
    return patch;
}

}  // namespace hota
