#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hota {

/// Georeferencing of a north-up raster. The origin is the top-left corner of
/// the top-left cell; rows run north to south, so cell_size_y is positive.
struct GeoRef {
    double origin_x = 0.0;
    double origin_y = 0.0;
    double cell_size_x = 1.0;
    double cell_size_y = 1.0;
    std::string crs_label;

    void validate() const;
    double cell_area() const { return cell_size_x * cell_size_y; }

    bool operator==(const GeoRef&) const = default;
};

/// Dimensions plus georeference: everything two rasters must share to be
/// co-registered.
struct GridFrame {
    int rows = 0;
    int cols = 0;
    GeoRef georef;

    void validate() const;
    std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }

    /// Map coordinates of the centre of cell (row, col).
    double cell_center_x(double col) const { return georef.origin_x + (col + 0.5) * georef.cell_size_x; }
    double cell_center_y(double row) const { return georef.origin_y - (row + 0.5) * georef.cell_size_y; }

    bool operator==(const GridFrame&) const = default;

    /// Co-registration ignores the CRS label.
    bool co_registered(const GridFrame& other) const;
};

struct Pixel {
    int row = 0;
    int col = 0;

    auto operator<=>(const Pixel&) const = default;
};

/// Single-band raster of doubles with optional nodata sentinel.
class Grid {
public:
    Grid() = default;
    explicit Grid(GridFrame frame, double fill = 0.0, std::optional<double> nodata = std::nullopt);
    Grid(GridFrame frame, std::vector<double> values, std::optional<double> nodata = std::nullopt);

    int rows() const { return frame_.rows; }
    int cols() const { return frame_.cols; }
    std::size_t size() const { return values_.size(); }
    const GridFrame& frame() const { return frame_; }
    const GeoRef& georef() const { return frame_.georef; }

    std::size_t index(int row, int col) const {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(frame_.cols) + static_cast<std::size_t>(col);
    }
    bool contains(int row, int col) const { return row >= 0 && col >= 0 && row < frame_.rows && col < frame_.cols; }

    double operator()(int row, int col) const { return values_[index(row, col)]; }
    double& operator()(int row, int col) { return values_[index(row, col)]; }
    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }

    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }

    const std::optional<double>& nodata() const { return nodata_; }
    void set_nodata(std::optional<double> nodata) { nodata_ = nodata; }

    bool is_valid(std::size_t i) const { return !nodata_ || values_[i] != *nodata_; }
    bool is_valid(int row, int col) const { return is_valid(index(row, col)); }

    /// Throws ValidationError if a non-nodata value is not finite.
    void validate() const;

    bool operator==(const Grid&) const = default;

private:
    GridFrame frame_;
    std::vector<double> values_;
    std::optional<double> nodata_;
};

class BinaryMask {
public:
    BinaryMask() = default;
    explicit BinaryMask(GridFrame frame, bool fill = false);

    int rows() const { return frame_.rows; }
    int cols() const { return frame_.cols; }
    std::size_t size() const { return bits_.size(); }
    const GridFrame& frame() const { return frame_; }
    const GeoRef& georef() const { return frame_.georef; }

    std::size_t index(int row, int col) const {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(frame_.cols) + static_cast<std::size_t>(col);
    }
    bool contains(int row, int col) const { return row >= 0 && col >= 0 && row < frame_.rows && col < frame_.cols; }

    bool operator()(int row, int col) const { return bits_[index(row, col)] != 0; }
    bool operator[](std::size_t i) const { return bits_[i] != 0; }
    bool at(Pixel p) const { return (*this)(p.row, p.col); }
    void set(int row, int col, bool value) { bits_[index(row, col)] = value ? 1 : 0; }
    void set(std::size_t i, bool value) { bits_[i] = value ? 1 : 0; }
    void set(Pixel p, bool value) { set(p.row, p.col, value); }

    std::size_t count() const;
    bool empty() const { return count() == 0; }

    bool operator==(const BinaryMask&) const = default;

private:
    GridFrame frame_;
    std::vector<std::uint8_t> bits_;
};

/// Co-registered stack of bands. Names default to the Sentinel-2 layout
/// used throughout: B2,B3,B4,B8,B5,B6,B7,B11,B12.
class MultibandRaster {
public:
    MultibandRaster() = default;
    MultibandRaster(std::vector<Grid> bands, std::vector<std::string> band_names);

    static const std::vector<std::string>& default_band_names();

    const GridFrame& frame() const { return bands_.front().frame(); }
    int rows() const { return frame().rows; }
    int cols() const { return frame().cols; }
    std::size_t band_count() const { return bands_.size(); }

    const std::vector<Grid>& bands() const { return bands_; }
    const std::vector<std::string>& band_names() const { return names_; }
    const Grid& band(std::size_t i) const { return bands_.at(i); }
    const Grid& band(const std::string& name) const;
    std::optional<std::size_t> band_index(const std::string& name) const;

private:
    std::vector<Grid> bands_;
    std::vector<std::string> names_;
};

enum class ResampleMethod { Nearest, Bilinear };

// ESRI ASCII grid I/O. A sidecar "<path>.prj" holds the CRS label when set.
Grid read_ascii_grid(const std::filesystem::path& path);
void write_ascii_grid(const Grid& grid, const std::filesystem::path& path);

/// Loads a JSON manifest {rows, cols, bands:[{name,file,dtype}], georef, nodata?}
/// with raw little-endian row-major band files resolved relative to it.
MultibandRaster read_multiband(const std::filesystem::path& manifest_path);

/// Writes bands as f32 files next to the manifest.
void write_multiband(const MultibandRaster& raster, const std::filesystem::path& manifest_path);

/// Resample onto `target`. Cells outside the source extent become nodata;
/// bilinear output is nodata when any contributing neighbour is nodata.
Grid resample(const Grid& grid, const GridFrame& target, ResampleMethod method);

/// True where the Sentinel-2 scene classification equals the water class.
BinaryMask scl_to_mask(const Grid& scl);

inline constexpr double kSclWaterClass = 6.0;

Grid mask_to_grid(const BinaryMask& mask);
/// Non-zero valid values become true.
BinaryMask grid_to_mask(const Grid& grid);

BinaryMask resample(const BinaryMask& mask, const GridFrame& target);

// Little-endian raw array helpers shared by the multiband and predictor
// exchange formats.
void write_f32_le(const std::filesystem::path& path, std::span<const float> values);
std::vector<float> read_f32_le(const std::filesystem::path& path, std::size_t expected_count);

}  // namespace hota
