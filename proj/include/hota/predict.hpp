#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hota/tiler.hpp"

namespace hota {

enum class PredictorKind { Ndwi, NdwiContext, Constant, External };

std::string to_string(PredictorKind kind);
PredictorKind parse_predictor_kind(const std::string& text);

struct PredictorConfig {
    PredictorKind kind = PredictorKind::Ndwi;

    // ndwi / ndwi_context
    double ndwi_threshold = 0.0;
    double ndwi_sharpness = 10.0;
    // ndwi_context: box radius = max(1, round(context_fraction * tile size)),
    // clipped to the tile.
    double context_fraction = 1.0 / 16.0;

    // constant
    double constant_value = 0.5;

    // external
    std::string external_command;
    std::filesystem::path exchange_dir;
    int batch_size = 16;
    double timeout_seconds = 600.0;

    void validate() const;
};

struct TilePrediction {
    Tile tile;
    int rows = 0;
    int cols = 0;
    std::vector<double> probs;
    std::vector<std::uint8_t> valid;
};

inline constexpr const char* kGreenBand = "B3";
inline constexpr const char* kNirBand = "B8";

double logistic(double x);

TilePrediction predict_ndwi(const TilePatch& patch, const PredictorConfig& cfg);
TilePrediction predict_ndwi_context(const TilePatch& patch, const PredictorConfig& cfg);
TilePrediction predict_constant(const TilePatch& patch, const PredictorConfig& cfg);

/// Runs the external command once per batch of cfg.batch_size tiles using the
/// file-exchange protocol (manifest.json, tile_<id>.bin in, prob_<id>.bin out).
std::vector<TilePrediction> predict_external(const std::vector<TilePatch>& patches, const PredictorConfig& cfg);

/// Dispatch for the built-in (in-process) predictors.
TilePrediction predict_builtin(const TilePatch& patch, const PredictorConfig& cfg);

// Exchange-protocol pieces, exposed for protocol tests and external tooling.
namespace exchange {

inline constexpr const char* kManifestName = "manifest.json";
std::string tile_file_name(std::size_t id);
std::string prob_file_name(std::size_t id);

/// Writes manifest.json plus one f32 tile file per patch. Ids are
/// `first_id + position in batch`.
void write_batch(const std::filesystem::path& dir, const std::vector<const TilePatch*>& batch, std::size_t first_id);

/// Reads one f32 tile file back as band-major doubles.
std::vector<float> read_tile(const std::filesystem::path& dir, std::size_t id, int bands, int size);

/// Reads and range-checks prob_<id>.bin; values within 1e-6 outside [0,1]
/// are clamped, anything further is an error.
std::vector<double> read_probs(const std::filesystem::path& dir, std::size_t id, int size);

}  // namespace exchange

}  // namespace hota
