#include <functional>
#include <iostream>
#include <map>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"

#include "cli.hpp"
#include "hota/error.hpp"

namespace hota::cli {

namespace {

/// Flag values collected by CLI11; unset options leave the config value alone.
struct Overrides {
    std::string config;
    std::optional<std::string> out;
    std::optional<int> threads;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> log_level;

    std::optional<std::string> multiband, dem, mask, scl, truth, prediction, compare, scene_spec;
    std::optional<std::string> mode, predictor, command;
    std::optional<std::vector<int>> scales;
    std::optional<double> overlap;
};

void add_common(CLI::App* sub, Overrides& o) {
    sub->add_option("--config", o.config, "JSON config file");
    sub->add_option("--out", o.out, "Output run directory");
    sub->add_option("--threads", o.threads, "Worker cap; 1 is bit-reproducible");
    sub->add_option("--seed", o.seed, "Seed for stochastic steps");
    sub->add_option("--log-level", o.log_level, "trace|debug|info|warn|error|critical|off");
}

void add_tiling(CLI::App* sub, Overrides& o) {
    sub->add_option("--input", o.multiband, "Multiband manifest (JSON)");
    sub->add_option("--truth", o.truth, "Truth mask grid for metrics");
    sub->add_option("--scl", o.scl, "SCL grid used as truth");
    sub->add_option("--mode", o.mode, "conventional|overlap|hierarchical|hota");
    sub->add_option("--scales", o.scales, "Tile sizes in pixels");
    sub->add_option("--overlap", o.overlap, "Overlap fraction in [0, 1)");
    sub->add_option("--predictor", o.predictor, "ndwi|ndwi_context|constant|external");
    sub->add_option("--predictor-command", o.command, "External predictor command");
}

void apply(const Overrides& o, PipelineConfig& cfg) {
    if (o.out) cfg.output_dir = *o.out;
    if (o.threads) cfg.threads = *o.threads;
    if (o.seed) cfg.seed = *o.seed;
    if (o.log_level) cfg.log_level = *o.log_level;
    if (o.multiband) cfg.multiband = *o.multiband;
    if (o.dem) cfg.dem = *o.dem;
    if (o.mask) cfg.mask = *o.mask;
    if (o.scl) cfg.scl = *o.scl;
    if (o.truth) cfg.truth = *o.truth;
    if (o.prediction) cfg.prediction = *o.prediction;
    if (o.compare) cfg.compare = *o.compare;
    if (o.scene_spec) cfg.scene_spec = *o.scene_spec;
    if (o.mode) cfg.tiling.mode = parse_tiling_mode(*o.mode);
    if (o.scales) cfg.tiling.scales = *o.scales;
    if (o.overlap) cfg.tiling.overlap_fraction = *o.overlap;
    if (o.predictor) cfg.predictor.kind = parse_predictor_kind(*o.predictor);
    if (o.command) cfg.predictor.external_command = *o.command;
}

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Validation: return 2;
        case ErrorKind::Io: return 3;
        case ErrorKind::Computation: return 4;
    }
    return 4;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"Multi-scale overlap-tiling flood segmentation and DEM-based depth estimation", "hota"};
    app.require_subcommand(1);
    Overrides o;
    std::map<CLI::App*, std::function<void(const PipelineConfig&)>> commands;

    auto* segment = app.add_subcommand("segment", "Tile, predict and fuse a multiband scene into a water mask");
    add_common(segment, o);
    add_tiling(segment, o);
    commands[segment] = cmd_segment;

    auto* attribution = app.add_subcommand("attribution", "Segment and dump per-scale weight and attribution maps");
    add_common(attribution, o);
    add_tiling(attribution, o);
    commands[attribution] = cmd_attribution;

    auto* depth = app.add_subcommand("depth", "Flood depth by DEM differencing with joint boundary refinement");
    add_common(depth, o);
    depth->add_option("--dem", o.dem, "DEM grid");
    depth->add_option("--mask", o.mask, "Flood mask grid (nonzero = water)");
    depth->add_option("--scl", o.scl, "SCL grid (class 6 = water)");
    commands[depth] = cmd_depth;

    auto* eval = app.add_subcommand("eval", "Compare a predicted mask with truth");
    add_common(eval, o);
    eval->add_option("--pred", o.prediction, "Predicted mask grid");
    eval->add_option("--truth", o.truth, "Truth mask grid");
    eval->add_option("--scl", o.scl, "SCL grid used as truth");
    eval->add_option("--compare", o.compare, "Second predicted mask; adds a delta column");
    commands[eval] = cmd_eval;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic DEM, flood truth and spectra");
    add_common(synth, o);
    synth->add_option("--spec", o.scene_spec, "Scene spec JSON");
    commands[synth] = cmd_synth;

    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("hota");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        PipelineConfig cfg = o.config.empty() ? PipelineConfig{} : load_config(o.config);
        apply(o, cfg);
        cfg.validate();
        spdlog::set_level(spdlog::level::from_str(cfg.log_level));
        for (const auto& [sub, fn] : commands) {
            if (sub->parsed()) fn(cfg);
        }
    } catch (const Error& e) {
        spdlog::error("{}", e.what());
        return exit_code(e.kind());
    } catch (const std::filesystem::filesystem_error& e) {
        spdlog::error("{}", e.what());
        return 3;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 4;
    }
    return 0;
}

}  // namespace hota::cli
