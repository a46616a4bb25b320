#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "cli.hpp"
#include "hota/error.hpp"
#include "hota/fuse.hpp"
#include "hota/metrics.hpp"
#include "hota/pipeline.hpp"
#include "hota/synth.hpp"

namespace hota::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "1.0.0";

class Timings {
public:
    void start(std::string stage) {
        stage_ = std::move(stage);
        t0_ = std::chrono::steady_clock::now();
    }
    void stop() {
        const auto dt = std::chrono::steady_clock::now() - t0_;
        doc_[stage_] = std::chrono::duration<double, std::milli>(dt).count();
    }
    const ordered_json& json() const { return doc_; }

private:
    std::string stage_;
    std::chrono::steady_clock::time_point t0_;
    ordered_json doc_ = ordered_json::object();
};

void prepare_output_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("failed writing " + path.string());
}

void write_json(const fs::path& path, const ordered_json& doc) { write_text(path, doc.dump(2) + "\n"); }

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void require(const fs::path& path, const std::string& what, const std::string& command) {
    if (path.empty()) throw ValidationError(command + " requires " + what);
}

/// Manifest of a run. Everything in it is a function of the configuration
/// and inputs, so reruns write identical bytes; wall-clock times go to
/// timings.json instead.
void write_run_manifest(const PipelineConfig& cfg, const std::string& command, const std::vector<std::string>& outputs,
                        ordered_json extra = ordered_json::object()) {
    const ordered_json config = config_to_json(cfg);
    ordered_json doc;
    doc["command"] = command;
    doc["version"] = kVersion;
    doc["config"] = config;
    doc["config_hash"] = fnv1a_hex(config.dump());
    doc["threads"] = cfg.threads;
    for (auto& [key, value] : extra.items()) doc[key] = value;
    doc["outputs"] = outputs;
    write_json(cfg.output_dir / "run_manifest.json", doc);
}

void write_timings(const PipelineConfig& cfg, const Timings& timings) {
    write_json(cfg.output_dir / "timings.json", timings.json());
}

/// Water mask from a binary grid (nonzero = water) or an SCL grid.
BinaryMask load_mask(const fs::path& mask_path, const fs::path& scl_path) {
    if (!mask_path.empty()) return grid_to_mask(read_ascii_grid(mask_path));
    return scl_to_mask(read_ascii_grid(scl_path));
}

BinaryMask on_frame(const BinaryMask& mask, const GridFrame& frame) {
    if (mask.frame().co_registered(frame)) return mask;
    return resample(mask, frame);
}

std::optional<double> as_percent_value(const std::optional<double>& fraction) {
    if (!fraction) return std::nullopt;
    return std::stod(format_percent(fraction));
}

ordered_json metrics_json(const ConfusionCounts& counts) {
    const Metrics2D m = metrics_2d(counts);
    auto value = [](const std::optional<double>& f) {
        const auto v = as_percent_value(f);
        return v ? ordered_json(*v) : ordered_json(nullptr);
    };
    ordered_json doc;
    doc["counts"] = {{"tp", counts.tp}, {"fp", counts.fp}, {"fn", counts.fn}, {"tn", counts.tn}};
    doc["percent"] = {{"accuracy", value(m.accuracy)},
                      {"precision", value(m.precision)},
                      {"recall", value(m.recall)},
                      {"f1", value(m.f1)},
                      {"iou", value(m.iou)}};
    return doc;
}

PredictorConfig predictor_for(const PipelineConfig& cfg) {
    PredictorConfig p = cfg.predictor;
    if (p.kind == PredictorKind::External && p.exchange_dir.empty()) p.exchange_dir = cfg.output_dir / "exchange";
    return p;
}

ordered_json scale_share_json(const TileSpec& spec, const SegmentResult& result) {
    ordered_json scales = ordered_json::array();
    for (std::size_t s = 0; s < spec.scales.size(); ++s) {
        const bool active = std::find(result.plan.active_scale_ids.begin(), result.plan.active_scale_ids.end(),
                                      static_cast<int>(s)) != result.plan.active_scale_ids.end();
        scales.push_back({{"scale_id", s},
                          {"size", spec.scales[s]},
                          {"active", active},
                          {"share", result.fusion.scale_share[s]}});
    }
    return {{"water_pixels", result.fusion.water_pixels}, {"scales", scales}};
}

struct SegmentRun {
    SegmentResult result;
    std::vector<std::string> outputs;
    ordered_json extra = ordered_json::object();
};

SegmentRun run_segmentation(const PipelineConfig& cfg, const std::string& command, Timings& timings) {
    require(cfg.multiband, "inputs.multiband", command);
    prepare_output_dir(cfg.output_dir);

    timings.start("read_input");
    const MultibandRaster raster = read_multiband(cfg.multiband);
    timings.stop();

    timings.start("segment");
    SegmentRun run;
    run.result = segment(raster, cfg.tiling, predictor_for(cfg), cfg.threads);
    timings.stop();
    spdlog::info("{}: {} tiles over {} active scale(s), {} water pixels", command, run.result.plan.tiles.size(),
                 run.result.plan.active_scale_ids.size(), run.result.fusion.water_pixels);

    timings.start("write_outputs");
    write_ascii_grid(run.result.fusion.prob_map, cfg.output_dir / "prob.asc");
    write_ascii_grid(mask_to_grid(run.result.fusion.mask), cfg.output_dir / "mask.asc");
    write_ascii_grid(run.result.fusion.attribution, cfg.output_dir / "attribution.asc");
    write_json(cfg.output_dir / "scale_share.json", scale_share_json(cfg.tiling, run.result));
    run.outputs = {"prob.asc", "mask.asc", "attribution.asc", "scale_share.json"};
    timings.stop();

    if (!cfg.truth.empty() || !cfg.scl.empty()) {
        const BinaryMask truth = on_frame(load_mask(cfg.truth, cfg.scl), raster.frame());
        write_json(cfg.output_dir / "metrics.json", metrics_json(confusion(run.result.fusion.mask, truth)));
        run.outputs.push_back("metrics.json");
    }

    run.extra["plan"] = {{"tiles", run.result.plan.tiles.size()},
                         {"active_scale_ids", run.result.plan.active_scale_ids},
                         {"skipped_scale_ids", run.result.plan.skipped_scale_ids}};
    return run;
}

// Fixed palette for attribution images, indexed by scale id.
constexpr unsigned char kPalette[][3] = {{230, 159, 0},  {86, 180, 233}, {0, 158, 115},  {240, 228, 66},
                                         {0, 114, 178},  {213, 94, 0},   {204, 121, 167}, {120, 120, 120}};

void write_attribution_ppm(const Grid& attribution, const BinaryMask& water, const fs::path& path) {
    std::ostringstream out;
    out << "P6\n" << attribution.cols() << ' ' << attribution.rows() << "\n255\n";
    for (std::size_t i = 0; i < attribution.size(); ++i) {
        unsigned char rgb[3] = {0, 0, 0};
        if (attribution.is_valid(i)) {
            const auto& c = kPalette[static_cast<std::size_t>(attribution[i]) % std::size(kPalette)];
            // Dry pixels are drawn at half intensity.
            const int scale = water[i] ? 1 : 2;
            for (int k = 0; k < 3; ++k) rgb[k] = static_cast<unsigned char>(c[k] / scale);
        }
        out.write(reinterpret_cast<const char*>(rgb), 3);
    }
    write_text(path, out.str());
}

ordered_json region_json(const RegionResult& r) {
    ordered_json trace = ordered_json::array();
    for (const auto& it : r.trace) {
        trace.push_back({{"iteration", it.iteration},
                         {"water_surface", it.water_surface},
                         {"boundary_mae", it.boundary_mae},
                         {"volume_reference", it.volume_reference},
                         {"volume_candidate", it.volume_candidate},
                         {"added", it.added},
                         {"removed", it.removed},
                         {"step_proposed", it.step_proposed},
                         {"accepted", it.accepted}});
    }
    return {{"label", r.label},
            {"water_surface", r.water_surface},
            {"volume", r.volume},
            {"iterations", r.iterations},
            {"termination", to_string(r.termination)},
            {"boundary_mae_initial", r.boundary_mae_initial},
            {"boundary_mae_final", r.boundary_mae_final},
            {"n_boundary_initial", r.n_boundary_initial},
            {"n_boundary_final", r.n_boundary_final},
            {"pixels_initial", r.pixels_initial},
            {"pixels_final", r.pixels_final},
            {"trace", trace}};
}

}  // namespace

void cmd_segment(const PipelineConfig& cfg) {
    Timings timings;
    SegmentRun run = run_segmentation(cfg, "segment", timings);
    run.outputs.push_back("timings.json");
    write_run_manifest(cfg, "segment", run.outputs, run.extra);
    write_timings(cfg, timings);
}

void cmd_attribution(const PipelineConfig& cfg) {
    Timings timings;
    SegmentRun run = run_segmentation(cfg, "attribution", timings);
    const FusionResult& fusion = run.result.fusion;

    timings.start("write_attribution");
    for (int s : run.result.plan.active_scale_ids) {
        const std::string name = "weight_scale_" + std::to_string(cfg.tiling.scales[static_cast<std::size_t>(s)]) + ".asc";
        write_ascii_grid(fusion.per_scale_weight[static_cast<std::size_t>(s)], cfg.output_dir / name);
        run.outputs.push_back(name);
    }
    std::ostringstream csv;
    csv << "scale_id,size,active,share\n";
    for (std::size_t s = 0; s < cfg.tiling.scales.size(); ++s) {
        const bool active = std::find(run.result.plan.active_scale_ids.begin(), run.result.plan.active_scale_ids.end(),
                                      static_cast<int>(s)) != run.result.plan.active_scale_ids.end();
        char share[32];
        std::snprintf(share, sizeof share, "%.6f", fusion.scale_share[s]);
        csv << s << ',' << cfg.tiling.scales[s] << ',' << (active ? 1 : 0) << ',' << share << '\n';
    }
    write_text(cfg.output_dir / "scale_share.csv", csv.str());
    write_attribution_ppm(fusion.attribution, fusion.mask, cfg.output_dir / "attribution.ppm");
    run.outputs.insert(run.outputs.end(), {"scale_share.csv", "attribution.ppm", "timings.json"});
    timings.stop();

    write_run_manifest(cfg, "attribution", run.outputs, run.extra);
    write_timings(cfg, timings);
}

void cmd_depth(const PipelineConfig& cfg) {
    require(cfg.dem, "inputs.dem", "depth");
    if (cfg.mask.empty() && cfg.scl.empty()) throw ValidationError("depth requires inputs.mask or inputs.scl");
    prepare_output_dir(cfg.output_dir);
    Timings timings;

    timings.start("read_input");
    const Grid dem = read_ascii_grid(cfg.dem);
    const BinaryMask mask = align_to_dem(load_mask(cfg.mask, cfg.scl), dem);
    timings.stop();
    if (mask.empty()) throw ComputationError("empty mask: no water pixels overlap the DEM");

    timings.start("differencing");
    const FloodSurface initial = differencing_surface(mask, dem, cfg.depth);
    timings.stop();
    timings.start("joint_optimize");
    const FloodSurface refined = joint_optimize(mask, dem, cfg.depth);
    timings.stop();

    timings.start("write_outputs");
    write_ascii_grid(refined.depth, cfg.output_dir / "depth.asc");
    write_ascii_grid(mask_to_grid(refined.mask), cfg.output_dir / "mask_refined.asc");
    write_ascii_grid(initial.depth, cfg.output_dir / "depth_differencing.asc");

    ordered_json regions = ordered_json::array();
    for (const auto& r : refined.regions) regions.push_back(region_json(r));
    ordered_json doc;
    doc["volume"] = refined.volume;
    doc["volume_differencing"] = initial.volume;
    doc["iterations_used"] = refined.iterations_used;
    doc["nodata_pixels"] = refined.nodata_pixels;
    doc["warnings"] = refined.warnings;
    doc["regions"] = regions;
    write_json(cfg.output_dir / "regions.json", doc);

    const BeforeAfterTable table = before_after_report(initial, refined);
    write_text(cfg.output_dir / "before_after.csv", table.to_csv());
    write_text(cfg.output_dir / "before_after.json", table.to_json());
    timings.stop();

    spdlog::info("depth: {} region(s), boundary MAE {:.4f} -> {:.4f} m", refined.regions.size(),
                 table.pooled.mae_before, table.pooled.mae_after);
    write_run_manifest(cfg, "depth",
                       {"depth.asc", "mask_refined.asc", "depth_differencing.asc", "regions.json", "before_after.csv",
                        "before_after.json", "timings.json"});
    write_timings(cfg, timings);
}

void cmd_eval(const PipelineConfig& cfg) {
    require(cfg.prediction, "inputs.prediction", "eval");
    if (cfg.truth.empty() && cfg.scl.empty()) throw ValidationError("eval requires inputs.truth or inputs.scl");
    prepare_output_dir(cfg.output_dir);
    Timings timings;
    timings.start("evaluate");

    const Grid truth_grid = read_ascii_grid(!cfg.truth.empty() ? cfg.truth : cfg.scl);
    const BinaryMask truth = !cfg.truth.empty() ? grid_to_mask(truth_grid) : scl_to_mask(truth_grid);

    auto evaluate = [&](const fs::path& path) {
        const Grid pred_grid = read_ascii_grid(path);
        if (pred_grid.rows() != truth_grid.rows() || pred_grid.cols() != truth_grid.cols()) {
            throw ValidationError("dimension mismatch: prediction " + std::to_string(pred_grid.rows()) + "x" +
                                  std::to_string(pred_grid.cols()) + " vs truth " + std::to_string(truth_grid.rows()) +
                                  "x" + std::to_string(truth_grid.cols()));
        }
        BinaryMask valid(truth.frame());
        for (std::size_t i = 0; i < valid.size(); ++i) valid.set(i, pred_grid.is_valid(i) && truth_grid.is_valid(i));
        return confusion(grid_to_mask(pred_grid), truth, &valid);
    };

    const ConfusionCounts counts = evaluate(cfg.prediction);
    ordered_json doc = metrics_json(counts);
    std::optional<ordered_json> compare_doc;
    if (!cfg.compare.empty()) {
        compare_doc = metrics_json(evaluate(cfg.compare));
        doc["compare"] = *compare_doc;
    }

    static const char* kNames[] = {"accuracy", "precision", "recall", "f1", "iou"};
    std::ostringstream csv;
    csv << "metric,value";
    if (compare_doc) csv << ",compare,delta";
    csv << '\n';
    ordered_json delta = ordered_json::object();
    for (const char* name : kNames) {
        const ordered_json& v = doc["percent"][name];
        auto fmt = [](const ordered_json& x) {
            if (x.is_null()) return std::string("undefined");
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.2f", x.get<double>());
            return std::string(buf);
        };
        csv << name << ',' << fmt(v);
        if (compare_doc) {
            const ordered_json& w = (*compare_doc)["percent"][name];
            ordered_json d = nullptr;
            if (!v.is_null() && !w.is_null()) d = std::stod(fmt(w.get<double>() - v.get<double>()));
            csv << ',' << fmt(w) << ',' << fmt(d);
            delta[name] = d;
        }
        csv << '\n';
    }
    if (compare_doc) doc["delta"] = delta;
    write_json(cfg.output_dir / "metrics.json", doc);
    write_text(cfg.output_dir / "metrics.csv", csv.str());
    timings.stop();

    write_run_manifest(cfg, "eval", {"metrics.json", "metrics.csv", "timings.json"});
    write_timings(cfg, timings);
}

void cmd_synth(const PipelineConfig& cfg) {
    require(cfg.scene_spec, "inputs.scene_spec", "synth");
    SceneSpec spec = parse_scene_spec(read_text(cfg.scene_spec));
    if (cfg.seed) spec.seed = *cfg.seed;
    prepare_output_dir(cfg.output_dir);
    Timings timings;

    timings.start("generate");
    const SyntheticScene scene = generate(spec);
    timings.stop();

    timings.start("write_outputs");
    write_ascii_grid(scene.dem, cfg.output_dir / "dem.asc");
    write_ascii_grid(mask_to_grid(scene.truth_mask), cfg.output_dir / "truth_mask.asc");
    write_ascii_grid(scene.truth_depth, cfg.output_dir / "truth_depth.asc");
    fs::create_directories(cfg.output_dir / "bands");
    write_multiband(scene.spectra, cfg.output_dir / "bands" / "manifest.json");
    write_text(cfg.output_dir / "scene_spec.json", scene_spec_to_json(spec));

    ordered_json summary;
    summary["rows"] = spec.rows;
    summary["cols"] = spec.cols;
    summary["seed"] = spec.seed;
    summary["water_pixels"] = scene.truth_mask.count();
    summary["truth_volume"] = scene.truth_volume;
    summary["waterline_step"] = scene.truth_mask.empty() ? 0.0 : waterline_step(scene.dem, scene.truth_mask);
    write_json(cfg.output_dir / "summary.json", summary);
    timings.stop();

    write_run_manifest(cfg, "synth",
                       {"dem.asc", "truth_mask.asc", "truth_depth.asc", "bands/manifest.json", "scene_spec.json",
                        "summary.json", "timings.json"});
    write_timings(cfg, timings);
}

}  // namespace hota::cli
