#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "hota/depth.hpp"
#include "hota/predict.hpp"
#include "hota/tiler.hpp"

namespace hota::cli {

/// Everything a command needs. Loaded from a JSON config file, then
/// overridden by command-line flags.
struct PipelineConfig {
    // Inputs. Relative paths in a config file resolve against its directory.
    std::filesystem::path multiband;   // segment, attribution
    std::filesystem::path dem;         // depth
    std::filesystem::path mask;        // depth: binary mask grid (nonzero = water)
    std::filesystem::path scl;         // depth/segment: SCL grid, class 6 = water
    std::filesystem::path truth;       // segment/eval: binary truth mask grid
    std::filesystem::path prediction;  // eval
    std::filesystem::path compare;     // eval: second prediction for a delta column
    std::filesystem::path scene_spec;  // synth

    TileSpec tiling;
    PredictorConfig predictor;
    DepthConfig depth;

    std::filesystem::path output_dir = "run";
    int threads = 1;
    std::optional<std::uint64_t> seed;
    std::string log_level = "info";

    void validate() const;
};

PipelineConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);

/// Canonical JSON of the settings that determine a run's outputs. The output
/// directory and log level are excluded so reruns elsewhere hash equally.
nlohmann::ordered_json config_to_json(const PipelineConfig& cfg);

/// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string& data);

// Commands. Each writes into cfg.output_dir and throws hota::Error subclasses.
void cmd_segment(const PipelineConfig& cfg);
void cmd_depth(const PipelineConfig& cfg);
void cmd_eval(const PipelineConfig& cfg);
void cmd_synth(const PipelineConfig& cfg);
void cmd_attribution(const PipelineConfig& cfg);

/// Full command-line entry point; returns the process exit code
/// (0 ok, 2 validation, 3 I/O, 4 computation).
int run(const std::vector<std::string>& args);

}  // namespace hota::cli
