#include "hota/synth.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>

#include "json.hpp"

#include "hota/error.hpp"
#include "hota/morpho.hpp"

namespace hota {

std::string to_string(BasinProfile profile) {
    return profile == BasinProfile::Gaussian ? "gaussian" : "paraboloid";
}

BasinProfile parse_basin_profile(const std::string& text) {
    if (text == "gaussian") return BasinProfile::Gaussian;
    if (text == "paraboloid") return BasinProfile::Paraboloid;
    throw ValidationError("unknown basin profile \"" + text + "\"");
}

std::string to_string(PerturbMode mode) {
    switch (mode) {
        case PerturbMode::Erode: return "erode";
        case PerturbMode::Dilate: return "dilate";
        case PerturbMode::Speckle: return "speckle";
    }
    return "unknown";
}

void SceneSpec::validate() const {
    if (rows <= 0 || cols <= 0) throw ValidationError("scene rows and cols must be positive");
    if (!(cell_size > 0.0)) throw ValidationError("scene cell size must be positive");
    if (!(noise_sigma >= 0.0) || !(spectral_noise_sigma >= 0.0)) throw ValidationError("noise sigmas must be >= 0");
    if (!(speckle_fraction >= 0.0 && speckle_fraction <= 1.0)) throw ValidationError("speckle fraction must lie in [0, 1]");
    for (const auto& b : basins) {
        if (!(b.radius > 0.0)) throw ValidationError("basin radius must be positive");
        if (!(b.depth > 0.0)) throw ValidationError("basin depth must be positive");
        if (!std::isfinite(b.fill_level)) throw ValidationError("basin fill level must be finite");
    }
}

GridFrame SceneSpec::frame() const {
    GridFrame f;
    f.rows = rows;
    f.cols = cols;
    f.georef.origin_x = origin_x;
    f.georef.origin_y = origin_y + rows * cell_size;
    f.georef.cell_size_x = cell_size;
    f.georef.cell_size_y = cell_size;
    f.georef.crs_label = "local";
    return f;
}

SceneSpec parse_scene_spec(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("invalid scene spec JSON: ") + e.what());
    }
    SceneSpec spec;
    try {
        spec.rows = doc.at("rows").get<int>();
        spec.cols = doc.at("cols").get<int>();
        spec.cell_size = doc.value("cell_size", spec.cell_size);
        spec.origin_x = doc.value("origin_x", spec.origin_x);
        spec.origin_y = doc.value("origin_y", spec.origin_y);
        if (doc.contains("base_plane")) {
            const auto& p = doc["base_plane"];
            spec.base_elevation = p.value("elevation", spec.base_elevation);
            spec.slope_x = p.value("slope_x", spec.slope_x);
            spec.slope_y = p.value("slope_y", spec.slope_y);
        }
        if (doc.contains("basins")) {
            for (const auto& b : doc["basins"]) {
                Basin basin;
                basin.center_x = b.at("center").at(0).get<double>();
                basin.center_y = b.at("center").at(1).get<double>();
                basin.radius = b.at("radius").get<double>();
                basin.depth = b.at("depth").get<double>();
                basin.profile = parse_basin_profile(b.value("profile", std::string{"paraboloid"}));
                basin.fill_level = b.at("fill_level").get<double>();
                spec.basins.push_back(basin);
            }
        }
        spec.noise_sigma = doc.value("noise_sigma", spec.noise_sigma);
        spec.seed = doc.value("seed", spec.seed);
        spec.speckle_fraction = doc.value("speckle_fraction", spec.speckle_fraction);
        spec.spectral_noise_sigma = doc.value("spectral_noise_sigma", spec.spectral_noise_sigma);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("invalid scene spec: ") + e.what());
    }
    spec.validate();
    return spec;
}

std::string scene_spec_to_json(const SceneSpec& spec) {
    nlohmann::ordered_json doc;
    doc["rows"] = spec.rows;
    doc["cols"] = spec.cols;
    doc["cell_size"] = spec.cell_size;
    doc["origin_x"] = spec.origin_x;
    doc["origin_y"] = spec.origin_y;
    doc["base_plane"] = {{"elevation", spec.base_elevation}, {"slope_x", spec.slope_x}, {"slope_y", spec.slope_y}};
    doc["basins"] = nlohmann::ordered_json::array();
    for (const auto& b : spec.basins) {
        doc["basins"].push_back({{"center", {b.center_x, b.center_y}},
                                 {"radius", b.radius},
                                 {"depth", b.depth},
                                 {"profile", to_string(b.profile)},
                                 {"fill_level", b.fill_level}});
    }
    doc["noise_sigma"] = spec.noise_sigma;
    doc["seed"] = spec.seed;
    doc["speckle_fraction"] = spec.speckle_fraction;
    doc["spectral_noise_sigma"] = spec.spectral_noise_sigma;
    return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------

NormalStream::NormalStream(std::uint64_t seed) : engine_(seed) {}

double NormalStream::uniform() {
    // 53 random bits mapped into (0, 1).
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double NormalStream::next() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

const std::vector<double>& water_signature() {
    static const std::vector<double> sig{0.12, 0.10, 0.07, 0.02, 0.05, 0.03, 0.025, 0.01, 0.008};
    return sig;
}

const std::vector<double>& land_signature() {
    static const std::vector<double> sig{0.05, 0.08, 0.06, 0.30, 0.12, 0.25, 0.28, 0.20, 0.12};
    return sig;
}

double terrain_elevation(const SceneSpec& spec, double x, double y) {
    double e = spec.base_elevation + spec.slope_x * (x - spec.origin_x) + spec.slope_y * (y - spec.origin_y);
    for (const auto& b : spec.basins) {
        const double dx = x - b.center_x, dy = y - b.center_y;
        const double r2 = dx * dx + dy * dy;
        const double R2 = b.radius * b.radius;
        if (b.profile == BasinProfile::Paraboloid) {
            if (r2 < R2) e -= b.depth * (1.0 - r2 / R2);
        } else {
            e -= b.depth * std::exp(-2.0 * r2 / R2);
        }
    }
    return e;
}

SyntheticScene generate(const SceneSpec& spec) {
    spec.validate();
    const GridFrame frame = spec.frame();
    SyntheticScene scene;
    scene.dem = Grid(frame);

    NormalStream dem_noise(spec.seed);
    for (int r = 0; r < frame.rows; ++r) {
        for (int c = 0; c < frame.cols; ++c) {
            double e = terrain_elevation(spec, frame.cell_center_x(c), frame.cell_center_y(r));
            if (spec.noise_sigma > 0.0) e += spec.noise_sigma * dem_noise.next();
            scene.dem(r, c) = e;
        }
    }

    // Exact fill: 8-connected flood from each basin's lowest cell through
    // cells strictly below the fill level.
    scene.truth_mask = BinaryMask(frame);
    scene.truth_depth = Grid(frame);
    std::vector<int> owner(frame.size(), -1);
    for (std::size_t k = 0; k < spec.basins.size(); ++k) {
        const Basin& b = spec.basins[k];
        Pixel seed{-1, -1};
        double best = std::numeric_limits<double>::infinity();
        double nearest = std::numeric_limits<double>::infinity();
        Pixel nearest_px{0, 0};
        for (int r = 0; r < frame.rows; ++r) {
            for (int c = 0; c < frame.cols; ++c) {
                const double dx = frame.cell_center_x(c) - b.center_x;
                const double dy = frame.cell_center_y(r) - b.center_y;
                const double d = std::hypot(dx, dy);
                if (d < nearest) {
                    nearest = d;
                    nearest_px = {r, c};
                }
                if (d <= b.radius && scene.dem(r, c) < best) {
                    best = scene.dem(r, c);
                    seed = {r, c};
                }
            }
        }
        if (seed.row < 0) seed = nearest_px;

        double volume = 0.0;
        if (scene.dem(seed.row, seed.col) < b.fill_level) {
            std::vector<std::uint8_t> visited(frame.size(), 0);
            std::deque<Pixel> queue{seed};
            visited[scene.dem.index(seed.row, seed.col)] = 1;
            while (!queue.empty()) {
                const Pixel p = queue.front();
                queue.pop_front();
                const std::size_t i = scene.dem.index(p.row, p.col);
                if (owner[i] >= 0 && spec.basins[static_cast<std::size_t>(owner[i])].fill_level != b.fill_level) {
                    throw ValidationError("overlapping basins with inconsistent fill levels");
                }
                owner[i] = static_cast<int>(k);
                scene.truth_mask.set(i, true);
                const double depth = b.fill_level - scene.dem[i];
                scene.truth_depth[i] = depth;
                volume += depth;
                for (int dr = -1; dr <= 1; ++dr) {
                    for (int dc = -1; dc <= 1; ++dc) {
                        const int rr = p.row + dr, cc = p.col + dc;
                        if ((dr == 0 && dc == 0) || !scene.dem.contains(rr, cc)) continue;
                        const std::size_t j = scene.dem.index(rr, cc);
                        if (visited[j] || !(scene.dem[j] < b.fill_level)) continue;
                        visited[j] = 1;
                        queue.push_back({rr, cc});
                    }
                }
            }
        }
        scene.truth_volume.push_back(volume * frame.georef.cell_area());
    }

    // Spectra: class signature, optional class swap (speckle), Gaussian noise.
    NormalStream spectral(spec.seed ^ 0x9E3779B97F4A7C15ULL);
    const auto& names = MultibandRaster::default_band_names();
    std::vector<Grid> bands(names.size(), Grid(frame));
    for (std::size_t i = 0; i < frame.size(); ++i) {
        bool water = scene.truth_mask[i];
        if (spec.speckle_fraction > 0.0 && spectral.uniform() < spec.speckle_fraction) water = !water;
        const auto& sig = water ? water_signature() : land_signature();
        for (std::size_t b = 0; b < bands.size(); ++b) {
            double v = sig[b];
            if (spec.spectral_noise_sigma > 0.0) v += spec.spectral_noise_sigma * spectral.next();
            // Stored as f32 on disk; round here so in-memory and on-disk agree.
            bands[b][i] = static_cast<double>(static_cast<float>(std::max(0.0, v)));
        }
    }
    scene.spectra = MultibandRaster(std::move(bands), names);
    return scene;
}

double waterline_step(const Grid& dem, const BinaryMask& mask) {
    double step = 0.0;
    for (int r = 0; r < mask.rows(); ++r) {
        for (int c = 0; c < mask.cols(); ++c) {
            if (!mask(r, c) || !dem.is_valid(r, c)) continue;
            for (const auto& d : kNeighbors4) {
                const int rr = r + d[0], cc = c + d[1];
                if (!mask.contains(rr, cc) || mask(rr, cc) || !dem.is_valid(rr, cc)) continue;
                step = std::max(step, std::abs(dem(rr, cc) - dem(r, c)));
            }
        }
    }
    return step;
}

BinaryMask perturb_mask(const BinaryMask& mask, const Perturbation& perturbation, std::uint64_t seed) {
    if (mask.empty()) throw ValidationError("cannot perturb an empty mask");
    if (perturbation.rings < 0) throw ValidationError("perturbation rings must be >= 0");
    switch (perturbation.mode) {
        case PerturbMode::Dilate: {
            BinaryMask out = mask;
            for (int k = 0; k < perturbation.rings; ++k) out = dilate(out, StructuringElement::Cross3);
            return out;
        }
        case PerturbMode::Erode: {
            BinaryMask out = mask;
            for (int k = 0; k < perturbation.rings; ++k) out = erode(out, StructuringElement::Cross3);
            const RegionLabels regions = connected_components(mask, Connectivity::Eight);
            std::vector<std::uint8_t> alive(static_cast<std::size_t>(regions.n_regions) + 1, 0);
            for (std::size_t i = 0; i < out.size(); ++i) {
                if (out[i]) alive[static_cast<std::size_t>(regions.labels[i])] = 1;
            }
            for (int label = 1; label <= regions.n_regions; ++label) {
                if (!alive[static_cast<std::size_t>(label)]) {
                    throw ValidationError("erosion by " + std::to_string(perturbation.rings) +
                                          " rings exceeds the radius of region " + std::to_string(label));
                }
            }
            return out;
        }
        case PerturbMode::Speckle: {
            if (!(perturbation.fraction >= 0.0 && perturbation.fraction <= 1.0)) {
                throw ValidationError("speckle fraction must lie in [0, 1]");
            }
            NormalStream rng(seed);
            BinaryMask out = mask;
            for (std::size_t i = 0; i < out.size(); ++i) {
                if (rng.uniform() < perturbation.fraction) out.set(i, !out[i]);
            }
            return out;
        }
    }
    return mask;
}

}  // namespace hota
