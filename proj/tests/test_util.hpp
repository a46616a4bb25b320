#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "hota/grid.hpp"

namespace hota::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("hota_" + tag + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline GridFrame make_frame(int rows, int cols, double cell = 1.0, double x0 = 0.0, double y_top = 0.0) {
    GridFrame f;
    f.rows = rows;
    f.cols = cols;
    f.georef.origin_x = x0;
    f.georef.origin_y = y_top == 0.0 ? rows * cell : y_top;
    f.georef.cell_size_x = cell;
    f.georef.cell_size_y = cell;
    return f;
}

inline BinaryMask random_mask(int rows, int cols, double p, std::mt19937_64& rng) {
    BinaryMask m(make_frame(rows, cols));
    std::bernoulli_distribution coin(p);
    for (std::size_t i = 0; i < m.size(); ++i) m.set(i, coin(rng));
    return m;
}

inline BinaryMask mask_from_rows(const std::vector<std::string>& rows) {
    BinaryMask m(make_frame(static_cast<int>(rows.size()), static_cast<int>(rows.front().size())));
    for (int r = 0; r < m.rows(); ++r) {
        for (int c = 0; c < m.cols(); ++c) m.set(r, c, rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] == '#');
    }
    return m;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

}  // namespace hota::testing
