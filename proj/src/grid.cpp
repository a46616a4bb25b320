#include "hota/grid.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

#include "hota/error.hpp"

namespace hota {

namespace fs = std::filesystem;

void GeoRef::validate() const {
    if (!(cell_size_x > 0.0) || !(cell_size_y > 0.0) || !std::isfinite(cell_size_x) ||
        !std::isfinite(cell_size_y)) {
        throw ValidationError("cell sizes must be positive and finite");
    }
    if (!std::isfinite(origin_x) || !std::isfinite(origin_y)) {
        throw ValidationError("georef origin must be finite");
    }
}

void GridFrame::validate() const {
    if (rows <= 0 || cols <= 0) {
        throw ValidationError("grid dimensions must be positive (rows=" + std::to_string(rows) +
                              ", cols=" + std::to_string(cols) + ")");
    }
    georef.validate();
}

bool GridFrame::co_registered(const GridFrame& other) const {
    return rows == other.rows && cols == other.cols && georef.origin_x == other.georef.origin_x &&
           georef.origin_y == other.georef.origin_y && georef.cell_size_x == other.georef.cell_size_x &&
           georef.cell_size_y == other.georef.cell_size_y;
}

Grid::Grid(GridFrame frame, double fill, std::optional<double> nodata)
    : frame_(std::move(frame)), nodata_(nodata) {
    frame_.validate();
    values_.assign(frame_.size(), fill);
}

Grid::Grid(GridFrame frame, std::vector<double> values, std::optional<double> nodata)
    : frame_(std::move(frame)), values_(std::move(values)), nodata_(nodata) {
    frame_.validate();
    if (values_.size() != frame_.size()) {
        throw ValidationError("value count " + std::to_string(values_.size()) + " does not match " +
                              std::to_string(frame_.rows) + "x" + std::to_string(frame_.cols));
    }
    validate();
}

void Grid::validate() const {
    if (nodata_ && !std::isfinite(*nodata_)) throw ValidationError("nodata sentinel must be finite");
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (is_valid(i) && !std::isfinite(values_[i])) {
            throw ValidationError("non-finite value at index " + std::to_string(i));
        }
    }
}

BinaryMask::BinaryMask(GridFrame frame, bool fill) : frame_(std::move(frame)) {
    frame_.validate();
    bits_.assign(frame_.size(), fill ? 1 : 0);
}

std::size_t BinaryMask::count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

// ---------------------------------------------------------------------------
// MultibandRaster

const std::vector<std::string>& MultibandRaster::default_band_names() {
    static const std::vector<std::string> names{"B2", "B3", "B4", "B8", "B5", "B6", "B7", "B11", "B12"};
    return names;
}

MultibandRaster::MultibandRaster(std::vector<Grid> bands, std::vector<std::string> band_names)
    : bands_(std::move(bands)), names_(std::move(band_names)) {
    if (bands_.empty()) throw ValidationError("multiband raster needs at least one band");
    if (names_.size() != bands_.size()) {
        throw ValidationError("band name count " + std::to_string(names_.size()) + " != band count " +
                              std::to_string(bands_.size()));
    }
    std::set<std::string> seen;
    for (const auto& name : names_) {
        if (!seen.insert(name).second) throw ValidationError("duplicate band \"" + name + "\"");
    }
    for (std::size_t i = 1; i < bands_.size(); ++i) {
        if (!bands_[i].frame().co_registered(bands_[0].frame())) {
            throw ValidationError("band \"" + names_[i] + "\" is not co-registered with \"" + names_[0] + "\"");
        }
    }
}

const Grid& MultibandRaster::band(const std::string& name) const {
    auto idx = band_index(name);
    if (!idx) throw ValidationError("missing band \"" + name + "\"");
    return bands_[*idx];
}

std::optional<std::size_t> MultibandRaster::band_index(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - names_.begin());
}

// ---------------------------------------------------------------------------
// ESRI ASCII grid

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

bool parse_double(std::string_view token, double& out) {
    if (!token.empty() && token.front() == '+') token.remove_prefix(1);
    const char* first = token.data();
    const char* last = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

std::string format_double(double v) {
    std::array<char, 64> buf{};
    // Shortest round-trip text; plain notation unless the magnitude is extreme.
    const double mag = std::abs(v);
    const bool plain = mag == 0.0 || (mag >= 1e-4 && mag < 1e15);
    auto [ptr, ec] = plain ? std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed)
                           : std::to_chars(buf.data(), buf.data() + buf.size(), v);
    (void)ec;
    return std::string(buf.data(), ptr);
}

std::string at_line(const fs::path& path, std::size_t line) {
    return path.string() + ":" + std::to_string(line) + ": ";
}

}  // namespace

Grid read_ascii_grid(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open ASCII grid " + path.string());

    std::map<std::string, double> header;
    std::vector<double> values;
    std::string line;
    std::size_t line_no = 0;
    bool in_body = false;
    long long expected = -1;
    std::optional<double> nodata;

    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ss(line);
        std::string first;
        if (!(ss >> first)) continue;

        if (!in_body && std::isalpha(static_cast<unsigned char>(first.front()))) {
            std::string value_token;
            if (!(ss >> value_token)) throw IoError(at_line(path, line_no) + "malformed header: missing value for " + first);
            double v = 0.0;
            if (!parse_double(value_token, v)) {
                throw IoError(at_line(path, line_no) + "malformed header: non-numeric value \"" + value_token + "\"");
            }
            std::string key = lower(first);
            static const std::set<std::string> known{"ncols", "nrows", "xllcorner", "yllcorner", "xllcenter",
                                                     "yllcenter", "cellsize", "dx", "dy", "nodata_value"};
            if (!known.contains(key)) throw IoError(at_line(path, line_no) + "malformed header: unknown key " + first);
            header[key] = v;
            continue;
        }

        if (!in_body) {
            in_body = true;
            for (const char* key : {"ncols", "nrows"}) {
                if (!header.contains(key)) throw IoError(at_line(path, line_no) + "malformed header: missing " + key);
            }
            if (!header.contains("cellsize") && !(header.contains("dx") && header.contains("dy"))) {
                throw IoError(at_line(path, line_no) + "malformed header: missing cellsize");
            }
            if (!(header.contains("xllcorner") || header.contains("xllcenter")) ||
                !(header.contains("yllcorner") || header.contains("yllcenter"))) {
                throw IoError(at_line(path, line_no) + "malformed header: missing lower-left corner");
            }
            double nc = header["ncols"], nr = header["nrows"];
            if (nc < 1 || nr < 1 || nc != std::floor(nc) || nr != std::floor(nr)) {
                throw IoError(at_line(path, line_no) + "malformed header: ncols/nrows must be positive integers");
            }
            expected = static_cast<long long>(nc) * static_cast<long long>(nr);
            values.reserve(static_cast<std::size_t>(expected));
            if (header.contains("nodata_value")) nodata = header["nodata_value"];
        }

        auto consume = [&](const std::string& token) {
            double v = 0.0;
            if (!parse_double(token, v)) {
                throw IoError(at_line(path, line_no) + "non-numeric token \"" + token + "\"");
            }
            if (static_cast<long long>(values.size()) >= expected) {
                throw IoError(at_line(path, line_no) + "value-count mismatch: more than " + std::to_string(expected) +
                              " values");
            }
            values.push_back(v);
        };
        consume(first);
        std::string token;
        while (ss >> token) consume(token);
    }

    if (!in_body) throw IoError(at_line(path, line_no) + "malformed header: no data body");
    if (static_cast<long long>(values.size()) != expected) {
        throw IoError(at_line(path, line_no) + "value-count mismatch: expected " + std::to_string(expected) + ", got " +
                      std::to_string(values.size()));
    }

    GridFrame frame;
    frame.cols = static_cast<int>(header["ncols"]);
    frame.rows = static_cast<int>(header["nrows"]);
    const double csx = header.contains("cellsize") ? header["cellsize"] : header["dx"];
    const double csy = header.contains("cellsize") ? header["cellsize"] : header["dy"];
    frame.georef.cell_size_x = csx;
    frame.georef.cell_size_y = csy;
    const double xll = header.contains("xllcorner") ? header["xllcorner"] : header["xllcenter"] - 0.5 * csx;
    const double yll = header.contains("yllcorner") ? header["yllcorner"] : header["yllcenter"] - 0.5 * csy;
    frame.georef.origin_x = xll;
    frame.georef.origin_y = yll + frame.rows * csy;

    fs::path prj = path;
    prj += ".prj";
    if (fs::exists(prj)) {
        std::ifstream p(prj);
        std::getline(p, frame.georef.crs_label);
    }

    try {
        return Grid(std::move(frame), std::move(values), nodata);
    } catch (const ValidationError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

void write_ascii_grid(const Grid& grid, const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write ASCII grid " + path.string());

    const auto& g = grid.georef();
    out << "ncols " << grid.cols() << '\n';
    out << "nrows " << grid.rows() << '\n';
    out << "xllcorner " << format_double(g.origin_x) << '\n';
    out << "yllcorner " << format_double(g.origin_y - grid.rows() * g.cell_size_y) << '\n';
    if (g.cell_size_x == g.cell_size_y) {
        out << "cellsize " << format_double(g.cell_size_x) << '\n';
    } else {
        out << "dx " << format_double(g.cell_size_x) << '\n';
        out << "dy " << format_double(g.cell_size_y) << '\n';
    }
    if (grid.nodata()) out << "NODATA_value " << format_double(*grid.nodata()) << '\n';

    std::string row_text;
    for (int r = 0; r < grid.rows(); ++r) {
        row_text.clear();
        for (int c = 0; c < grid.cols(); ++c) {
            if (c) row_text.push_back(' ');
            row_text += format_double(grid(r, c));
        }
        row_text.push_back('\n');
        out << row_text;
    }
    if (!out) throw IoError("failed writing ASCII grid " + path.string());

    fs::path prj = path;
    prj += ".prj";
    if (!g.crs_label.empty()) {
        std::ofstream p(prj, std::ios::binary | std::ios::trunc);
        p << g.crs_label << '\n';
    }
}

// ---------------------------------------------------------------------------
// Raw little-endian arrays and multiband manifests

namespace {

template <typename T>
T byteswap_value(T v) {
    std::array<unsigned char, sizeof(T)> bytes{};
    std::memcpy(bytes.data(), &v, sizeof(T));
    std::reverse(bytes.begin(), bytes.end());
    std::memcpy(&v, bytes.data(), sizeof(T));
    return v;
}

template <typename T>
std::vector<T> read_raw_le(const fs::path& path, std::size_t expected_count) {
    std::error_code ec;
    if (!fs::exists(path, ec)) throw IoError("missing band file " + path.string());
    const auto bytes = fs::file_size(path, ec);
    if (ec) throw IoError("cannot stat " + path.string());
    if (bytes != expected_count * sizeof(T)) {
        throw IoError("size mismatch: " + path.string() + " has " + std::to_string(bytes) + " bytes, expected " +
                      std::to_string(expected_count * sizeof(T)));
    }
    std::vector<T> out(expected_count);
    std::ifstream in(path, std::ios::binary);
    if (!in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(bytes))) {
        throw IoError("cannot read " + path.string());
    }
    if constexpr (std::endian::native == std::endian::big) {
        for (auto& v : out) v = byteswap_value(v);
    }
    return out;
}

template <typename T>
void write_raw_le(const fs::path& path, std::span<const T> values) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    if constexpr (std::endian::native == std::endian::big) {
        for (T v : values) {
            v = byteswap_value(v);
            out.write(reinterpret_cast<const char*>(&v), sizeof(T));
        }
    } else {
        out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
    }
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

void write_f32_le(const fs::path& path, std::span<const float> values) { write_raw_le<float>(path, values); }

std::vector<float> read_f32_le(const fs::path& path, std::size_t expected_count) {
    return read_raw_le<float>(path, expected_count);
}

MultibandRaster read_multiband(const fs::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw IoError("cannot open manifest " + manifest_path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed manifest " + manifest_path.string() + ": " + e.what());
    }

    GridFrame frame;
    try {
        frame.rows = doc.at("rows").get<int>();
        frame.cols = doc.at("cols").get<int>();
        if (doc.contains("georef")) {
            const auto& g = doc["georef"];
            frame.georef.origin_x = g.value("origin_x", 0.0);
            frame.georef.origin_y = g.value("origin_y", 0.0);
            frame.georef.cell_size_x = g.value("cell_size_x", 1.0);
            frame.georef.cell_size_y = g.value("cell_size_y", frame.georef.cell_size_x);
            frame.georef.crs_label = g.value("crs", std::string{});
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed manifest " + manifest_path.string() + ": " + e.what());
    }
    frame.validate();

    std::optional<double> nodata;
    if (doc.contains("nodata") && !doc["nodata"].is_null()) nodata = doc["nodata"].get<double>();

    const fs::path base = manifest_path.parent_path();
    std::vector<Grid> bands;
    std::vector<std::string> names;
    std::set<std::string> seen;
    if (!doc.contains("bands") || !doc["bands"].is_array()) {
        throw IoError("malformed manifest " + manifest_path.string() + ": missing bands array");
    }
    for (const auto& entry : doc["bands"]) {
        std::string name, file, dtype;
        try {
            name = entry.at("name").get<std::string>();
            file = entry.at("file").get<std::string>();
            dtype = entry.value("dtype", std::string{"f32"});
        } catch (const nlohmann::json::exception& e) {
            throw IoError("malformed band entry in " + manifest_path.string() + ": " + e.what());
        }
        if (!seen.insert(name).second) throw ValidationError("duplicate band \"" + name + "\"");
        const fs::path band_path = base / file;
        std::vector<double> values;
        if (dtype == "f32") {
            auto raw = read_raw_le<float>(band_path, frame.size());
            values.assign(raw.begin(), raw.end());
        } else if (dtype == "f64") {
            values = read_raw_le<double>(band_path, frame.size());
        } else {
            throw IoError("unknown dtype \"" + dtype + "\" for band \"" + name + "\"");
        }
        bands.emplace_back(frame, std::move(values), nodata);
        names.push_back(std::move(name));
    }
    return MultibandRaster(std::move(bands), std::move(names));
}

void write_multiband(const MultibandRaster& raster, const fs::path& manifest_path) {
    const fs::path base = manifest_path.parent_path();
    const auto& frame = raster.frame();
    nlohmann::ordered_json doc;
    doc["rows"] = frame.rows;
    doc["cols"] = frame.cols;
    doc["georef"] = {{"origin_x", frame.georef.origin_x},
                     {"origin_y", frame.georef.origin_y},
                     {"cell_size_x", frame.georef.cell_size_x},
                     {"cell_size_y", frame.georef.cell_size_y},
                     {"crs", frame.georef.crs_label}};
    const auto& nodata = raster.band(0).nodata();
    doc["nodata"] = nodata ? nlohmann::ordered_json(*nodata) : nlohmann::ordered_json(nullptr);
    doc["bands"] = nlohmann::ordered_json::array();

    std::vector<float> buffer(frame.size());
    for (std::size_t b = 0; b < raster.band_count(); ++b) {
        const auto& name = raster.band_names()[b];
        const std::string file = "band_" + name + ".bin";
        const auto values = raster.band(b).values();
        std::transform(values.begin(), values.end(), buffer.begin(), [](double v) { return static_cast<float>(v); });
        write_f32_le(base / file, buffer);
        doc["bands"].push_back({{"name", name}, {"file", file}, {"dtype", "f32"}});
    }
    std::ofstream out(manifest_path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write manifest " + manifest_path.string());
    out << doc.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Resampling

namespace {

constexpr double kDefaultNodata = -9999.0;

// Source-grid fractional coordinate of a target cell centre, measured in
// source cells from the centre of source cell 0.
struct SourceAxis {
    double offset;  // target origin relative to source origin, in source cells
    double scale;   // target cell size in source cells

    double at(int i) const { return offset + (i + 0.5) * scale - 0.5; }
};

bool overlaps(const GridFrame& a, const GridFrame& b) {
    const double ax0 = a.georef.origin_x, ax1 = ax0 + a.cols * a.georef.cell_size_x;
    const double ay1 = a.georef.origin_y, ay0 = ay1 - a.rows * a.georef.cell_size_y;
    const double bx0 = b.georef.origin_x, bx1 = bx0 + b.cols * b.georef.cell_size_x;
    const double by1 = b.georef.origin_y, by0 = by1 - b.rows * b.georef.cell_size_y;
    return ax0 < bx1 && bx0 < ax1 && ay0 < by1 && by0 < ay1;
}

double snap(double v) {
    const double r = std::round(v);
    return std::abs(v - r) < 1e-9 ? r : v;
}

}  // namespace

Grid resample(const Grid& grid, const GridFrame& target, ResampleMethod method) {
    target.validate();
    if (grid.frame().co_registered(target)) {
        return Grid(target, std::vector<double>(grid.values().begin(), grid.values().end()), grid.nodata());
    }
    if (!overlaps(grid.frame(), target)) throw ValidationError("no spatial overlap between source and target extents");

    const auto& sg = grid.georef();
    const auto& tg = target.georef;
    const SourceAxis ax{(tg.origin_x - sg.origin_x) / sg.cell_size_x, tg.cell_size_x / sg.cell_size_x};
    const SourceAxis ay{(sg.origin_y - tg.origin_y) / sg.cell_size_y, tg.cell_size_y / sg.cell_size_y};

    const double nodata = grid.nodata().value_or(kDefaultNodata);
    bool used_nodata = grid.nodata().has_value();
    std::vector<double> out(target.size(), nodata);

    for (int r = 0; r < target.rows; ++r) {
        const double fy = snap(ay.at(r));
        for (int c = 0; c < target.cols; ++c) {
            const double fx = snap(ax.at(c));
            const std::size_t oi = static_cast<std::size_t>(r) * target.cols + c;
            // Cell containing the target centre (extent test uses cell edges).
            const double ex = fx + 0.5, ey = fy + 0.5;
            if (ex < 0.0 || ey < 0.0 || ex >= grid.cols() || ey >= grid.rows()) {
                used_nodata = true;
                continue;
            }
            if (method == ResampleMethod::Nearest) {
                out[oi] = grid(static_cast<int>(std::floor(ey)), static_cast<int>(std::floor(ex)));
                continue;
            }
            // Bilinear between cell centres, clamped at the outer half-cells.
            const double cx = std::clamp(fx, 0.0, static_cast<double>(grid.cols() - 1));
            const double cy = std::clamp(fy, 0.0, static_cast<double>(grid.rows() - 1));
            const int c0 = static_cast<int>(std::floor(cx));
            const int r0 = static_cast<int>(std::floor(cy));
            const double tx = cx - c0, ty = cy - r0;
            const int c1 = tx > 0.0 ? c0 + 1 : c0;
            const int r1 = ty > 0.0 ? r0 + 1 : r0;
            if (!grid.is_valid(r0, c0) || !grid.is_valid(r0, c1) || !grid.is_valid(r1, c0) || !grid.is_valid(r1, c1)) {
                used_nodata = true;
                continue;
            }
            const double top = grid(r0, c0) + tx * (grid(r0, c1) - grid(r0, c0));
            const double bottom = grid(r1, c0) + tx * (grid(r1, c1) - grid(r1, c0));
            out[oi] = top + ty * (bottom - top);
        }
    }
    return Grid(target, std::move(out), used_nodata ? std::optional<double>(nodata) : std::nullopt);
}

BinaryMask resample(const BinaryMask& mask, const GridFrame& target) {
    const Grid as_grid = mask_to_grid(mask);
    const Grid out = resample(as_grid, target, ResampleMethod::Nearest);
    return grid_to_mask(out);
}

BinaryMask scl_to_mask(const Grid& scl) {
    BinaryMask mask(scl.frame());
    for (std::size_t i = 0; i < scl.size(); ++i) {
        mask.set(i, scl.is_valid(i) && scl[i] == kSclWaterClass);
    }
    return mask;
}

Grid mask_to_grid(const BinaryMask& mask) {
    Grid grid(mask.frame());
    for (std::size_t i = 0; i < mask.size(); ++i) grid[i] = mask[i] ? 1.0 : 0.0;
    return grid;
}

BinaryMask grid_to_mask(const Grid& grid) {
    BinaryMask mask(grid.frame());
    for (std::size_t i = 0; i < grid.size(); ++i) mask.set(i, grid.is_valid(i) && grid[i] != 0.0);
    return mask;
}

}  // namespace hota
