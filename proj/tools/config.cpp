#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "cli.hpp"
#include "hota/error.hpp"

namespace hota::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
    if (!obj.is_object()) throw ValidationError(where + " must be a JSON object");
    for (const auto& [key, value] : obj.items()) {
        if (!known.contains(key)) throw ValidationError("unknown key \"" + key + "\" in " + where);
    }
}

fs::path resolve(const fs::path& base, const std::string& value) {
    const fs::path p(value);
    if (p.empty() || p.is_absolute() || base.empty()) return p;
    return base / p;
}

template <typename T>
void read_if(const json& obj, const char* key, T& target) {
    if (obj.contains(key)) target = obj.at(key).get<T>();
}

}  // namespace

void PipelineConfig::validate() const {
    tiling.validate();
    PredictorConfig effective = predictor;
    if (effective.kind == PredictorKind::External && effective.exchange_dir.empty()) {
        effective.exchange_dir = output_dir / "exchange";
    }
    effective.validate();
    depth.validate();
    if (threads < 1) throw ValidationError("threads must be >= 1");
    static const std::set<std::string> levels{"trace", "debug", "info", "warn", "error", "critical", "off"};
    if (!levels.contains(log_level)) throw ValidationError("unknown log level \"" + log_level + "\"");
    if (output_dir.empty()) throw ValidationError("output directory must be set");
}

PipelineConfig parse_config(const json& doc, const fs::path& base_dir) {
    PipelineConfig cfg;
    try {
        reject_unknown(doc, {"inputs", "tiling", "predictor", "depth", "output_dir", "threads", "seed", "log_level"},
                       "config");
        if (doc.contains("inputs")) {
            const json& in = doc["inputs"];
            reject_unknown(in, {"multiband", "dem", "mask", "scl", "truth", "prediction", "compare", "scene_spec"},
                           "inputs");
            auto path_of = [&](const char* key, fs::path& target) {
                if (in.contains(key)) target = resolve(base_dir, in.at(key).get<std::string>());
            };
            path_of("multiband", cfg.multiband);
            path_of("dem", cfg.dem);
            path_of("mask", cfg.mask);
            path_of("scl", cfg.scl);
            path_of("truth", cfg.truth);
            path_of("prediction", cfg.prediction);
            path_of("compare", cfg.compare);
            path_of("scene_spec", cfg.scene_spec);
        }
        if (doc.contains("tiling")) {
            const json& t = doc["tiling"];
            reject_unknown(t, {"scales", "overlap", "mode"}, "tiling");
            read_if(t, "scales", cfg.tiling.scales);
            read_if(t, "overlap", cfg.tiling.overlap_fraction);
            if (t.contains("mode")) cfg.tiling.mode = parse_tiling_mode(t["mode"].get<std::string>());
        }
        if (doc.contains("predictor")) {
            const json& p = doc["predictor"];
            reject_unknown(p,
                           {"kind", "ndwi_threshold", "ndwi_sharpness", "context_fraction", "constant_value",
                            "command", "exchange_dir", "batch_size", "timeout_seconds"},
                           "predictor");
            if (p.contains("kind")) cfg.predictor.kind = parse_predictor_kind(p["kind"].get<std::string>());
            read_if(p, "ndwi_threshold", cfg.predictor.ndwi_threshold);
            read_if(p, "ndwi_sharpness", cfg.predictor.ndwi_sharpness);
            read_if(p, "context_fraction", cfg.predictor.context_fraction);
            read_if(p, "constant_value", cfg.predictor.constant_value);
            read_if(p, "command", cfg.predictor.external_command);
            if (p.contains("exchange_dir")) cfg.predictor.exchange_dir = resolve(base_dir, p["exchange_dir"].get<std::string>());
            read_if(p, "batch_size", cfg.predictor.batch_size);
            read_if(p, "timeout_seconds", cfg.predictor.timeout_seconds);
        }
        if (doc.contains("depth")) {
            const json& d = doc["depth"];
            reject_unknown(d,
                           {"volume_tolerance", "boundary_depth_tolerance", "max_iterations", "surface_estimator",
                            "connectivity"},
                           "depth");
            read_if(d, "volume_tolerance", cfg.depth.volume_tolerance);
            read_if(d, "boundary_depth_tolerance", cfg.depth.boundary_depth_tolerance);
            read_if(d, "max_iterations", cfg.depth.max_iterations);
            if (d.contains("surface_estimator")) {
                cfg.depth.surface_estimator = parse_surface_estimator(d["surface_estimator"].get<std::string>());
            }
            if (d.contains("connectivity")) {
                const int conn = d["connectivity"].get<int>();
                if (conn != 4 && conn != 8) throw ValidationError("connectivity must be 4 or 8");
                cfg.depth.connectivity = conn == 4 ? Connectivity::Four : Connectivity::Eight;
            }
        }
        if (doc.contains("output_dir")) cfg.output_dir = resolve(base_dir, doc["output_dir"].get<std::string>());
        read_if(doc, "threads", cfg.threads);
        if (doc.contains("seed")) cfg.seed = doc["seed"].get<std::uint64_t>();
        read_if(doc, "log_level", cfg.log_level);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("invalid config: ") + e.what());
    }
    return cfg;
}

PipelineConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    json doc;
    try {
        doc = json::parse(buffer.str());
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": invalid JSON: " + e.what());
    }
    return parse_config(doc, path.parent_path());
}

ordered_json config_to_json(const PipelineConfig& cfg) {
    ordered_json doc;
    doc["inputs"] = {{"multiband", cfg.multiband.string()},   {"dem", cfg.dem.string()},
                     {"mask", cfg.mask.string()},             {"scl", cfg.scl.string()},
                     {"truth", cfg.truth.string()},           {"prediction", cfg.prediction.string()},
                     {"compare", cfg.compare.string()},       {"scene_spec", cfg.scene_spec.string()}};
    doc["tiling"] = {{"scales", cfg.tiling.scales},
                     {"overlap", cfg.tiling.overlap_fraction},
                     {"mode", to_string(cfg.tiling.mode)}};
    doc["predictor"] = {{"kind", to_string(cfg.predictor.kind)},
                        {"ndwi_threshold", cfg.predictor.ndwi_threshold},
                        {"ndwi_sharpness", cfg.predictor.ndwi_sharpness},
                        {"context_fraction", cfg.predictor.context_fraction},
                        {"constant_value", cfg.predictor.constant_value},
                        {"command", cfg.predictor.external_command},
                        {"batch_size", cfg.predictor.batch_size},
                        {"timeout_seconds", cfg.predictor.timeout_seconds}};
    doc["depth"] = {{"volume_tolerance", cfg.depth.volume_tolerance},
                    {"boundary_depth_tolerance", cfg.depth.boundary_depth_tolerance},
                    {"max_iterations", cfg.depth.max_iterations},
                    {"surface_estimator", to_string(cfg.depth.surface_estimator)},
                    {"connectivity", static_cast<int>(cfg.depth.connectivity)}};
    doc["seed"] = cfg.seed ? ordered_json(*cfg.seed) : ordered_json(nullptr);
    return doc;
}

std::string fnv1a_hex(const std::string& data) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char ch : data) {
        hash ^= ch;
        hash *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

}  // namespace hota::cli
