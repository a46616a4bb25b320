#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "hota/grid.hpp"

namespace hota {

enum class BasinProfile { Gaussian, Paraboloid };

std::string to_string(BasinProfile profile);
BasinProfile parse_basin_profile(const std::string& text);

/// A depression carved into the base plane and filled to `fill_level`.
/// Centres are map coordinates. Paraboloid: depth * (1 - r^2/R^2) inside R.
/// Gaussian: depth * exp(-2 r^2 / R^2).
struct Basin {
    double center_x = 0.0;
    double center_y = 0.0;
    double radius = 1.0;
    double depth = 1.0;
    BasinProfile profile = BasinProfile::Paraboloid;
    double fill_level = 0.0;
};

struct SceneSpec {
    int rows = 0;
    int cols = 0;
    double cell_size = 5.0;
    /// Map coordinates of the lower-left corner; the plane is anchored there.
    double origin_x = 0.0;
    double origin_y = 0.0;
    double base_elevation = 10.0;
    double slope_x = 0.0;  // metres per metre, eastward
    double slope_y = 0.0;  // metres per metre, northward
    std::vector<Basin> basins;
    double noise_sigma = 0.0;  // DEM noise, metres
    std::uint64_t seed = 0;

    // Spectral synthesis.
    double speckle_fraction = 0.0;  // share of pixels given the other class signature
    double spectral_noise_sigma = 0.0;

    void validate() const;
    GridFrame frame() const;
};

SceneSpec parse_scene_spec(const std::string& json_text);
std::string scene_spec_to_json(const SceneSpec& spec);

struct SyntheticScene {
    Grid dem;
    BinaryMask truth_mask;
    Grid truth_depth;
    std::vector<double> truth_volume;  // per basin, m^3
    MultibandRaster spectra;
};

/// Noise-free terrain at map coordinates (x, y).
double terrain_elevation(const SceneSpec& spec, double x, double y);

SyntheticScene generate(const SceneSpec& spec);

/// Largest elevation jump across the waterline: max |E(in) - E(out)| over
/// 4-adjacent pairs with `in` on the mask and `out` off it. This is the
/// vertical resolution at which the grid can place a shoreline.
double waterline_step(const Grid& dem, const BinaryMask& mask);

enum class PerturbMode { Erode, Dilate, Speckle };

struct Perturbation {
    PerturbMode mode = PerturbMode::Erode;
    int rings = 0;          // erode/dilate: 4-neighbour rings
    double fraction = 0.0;  // speckle: share of pixels flipped
};

std::string to_string(PerturbMode mode);

BinaryMask perturb_mask(const BinaryMask& mask, const Perturbation& perturbation, std::uint64_t seed);

// Reflectance signatures in default band order (B2,B3,B4,B8,B5,B6,B7,B11,B12).
const std::vector<double>& water_signature();
const std::vector<double>& land_signature();

/// Standard normals via Box-Muller over the raw mt19937_64 sequence, so the
/// stream does not depend on the standard library's distributions.
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed);
    double next();
    double uniform();

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace hota
