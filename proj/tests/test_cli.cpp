#include <gtest/gtest.h>

#include "json.hpp"

#include "cli.hpp"
#include "hota/error.hpp"
#include "hota/grid.hpp"
#include "hota/synth.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace hota;
using hota::testing::read_file;
using hota::testing::TempDir;
using hota::testing::write_file;

namespace {

const fs::path kSource = HOTA_SOURCE_DIR;

int hota_run(std::vector<std::string> args) {
    args.push_back("--log-level");
    args.push_back("off");
    return cli::run(args);
}

nlohmann::json load_json(const fs::path& p) { return nlohmann::json::parse(read_file(p)); }

/// Synthesizes the bundled example scene into `dir`.
void synth_example(const fs::path& dir) {
    ASSERT_EQ(hota_run({"synth", "--spec", (kSource / "data/example_scene.json").string(), "--out", dir.string()}), 0);
}

}  // namespace

TEST(Cli, ParseErrorsAndHelp) {
    EXPECT_EQ(cli::run({}), 2);
    EXPECT_EQ(cli::run({"unknown"}), 2);
    EXPECT_EQ(cli::run({"segment", "--bogus", "1"}), 2);
    EXPECT_EQ(cli::run({"segment", "--threads", "x"}), 2);
    EXPECT_EQ(cli::run({"--help"}), 0);
}

TEST(Cli, MissingInputsAndBadValues) {
    TempDir dir("cli");
    EXPECT_EQ(hota_run({"segment", "--out", (dir / "a").string()}), 2);
    EXPECT_EQ(hota_run({"segment", "--input", (dir / "missing.json").string(), "--out", (dir / "b").string()}), 3);
    EXPECT_EQ(hota_run({"segment", "--input", "x.json", "--mode", "pyramid", "--out", (dir / "c").string()}), 2);
    EXPECT_EQ(hota_run({"segment", "--input", "x.json", "--threads", "0", "--out", (dir / "d").string()}), 2);
    EXPECT_EQ(hota_run({"depth", "--out", (dir / "e").string()}), 2);
    EXPECT_EQ(hota_run({"eval", "--out", (dir / "f").string()}), 2);
}

TEST(Cli, SynthMatchesGoldenFiles) {
    TempDir dir("cli");
    synth_example(dir.path());
    const fs::path golden = kSource / "tests/golden/example_scene";
    std::size_t compared = 0;
    for (const auto& entry : fs::recursive_directory_iterator(golden)) {
        if (!entry.is_regular_file()) continue;
        const fs::path rel = fs::relative(entry.path(), golden);
        ASSERT_TRUE(fs::exists(dir.path() / rel)) << rel;
        EXPECT_EQ(read_file(dir.path() / rel), read_file(entry.path())) << rel;
        ++compared;
    }
    EXPECT_GE(compared, 15u);
    const auto manifest = load_json(dir / "run_manifest.json");
    EXPECT_EQ(manifest["command"], "synth");
    EXPECT_EQ(manifest["config_hash"].get<std::string>().size(), 16u);
    EXPECT_TRUE(fs::exists(dir / "timings.json"));
}

TEST(Cli, SynthSeedOverride) {
    TempDir dir("cli");
    SceneSpec spec = parse_scene_spec(read_file(kSource / "data/example_scene.json"));
    spec.noise_sigma = 0.0;
    write_file(dir / "spec.json", scene_spec_to_json(spec));
    ASSERT_EQ(hota_run({"synth", "--spec", (dir / "spec.json").string(), "--out", (dir / "a").string()}), 0);
    ASSERT_EQ(hota_run({"synth", "--spec", (dir / "spec.json").string(), "--seed", "99", "--out", (dir / "b").string()}),
              0);
    EXPECT_EQ(read_file(dir / "a/dem.asc"), read_file(dir / "b/dem.asc"));
    EXPECT_NE(read_file(dir / "a/bands/band_B3.bin"), read_file(dir / "b/bands/band_B3.bin"));
    EXPECT_EQ(load_json(dir / "b/summary.json")["seed"], 99);
}

TEST(Cli, SynthRejectsInvalidSpec) {
    TempDir dir("cli");
    write_file(dir / "bad.json", R"({"rows": 0, "cols": 10})");
    EXPECT_EQ(hota_run({"synth", "--spec", (dir / "bad.json").string(), "--out", (dir / "o").string()}), 2);
    write_file(dir / "broken.json", "{");
    EXPECT_EQ(hota_run({"synth", "--spec", (dir / "broken.json").string(), "--out", (dir / "o").string()}), 2);
}

TEST(Cli, SegmentAndAttributionOutputs) {
    TempDir dir("cli");
    synth_example(dir / "scene");
    const std::string input = (dir / "scene/bands/manifest.json").string();
    const std::string truth = (dir / "scene/truth_mask.asc").string();
    ASSERT_EQ(hota_run({"segment", "--input", input, "--truth", truth, "--scales", "16", "32", "--out",
                        (dir / "seg").string()}),
              0);
    for (const char* f : {"prob.asc", "mask.asc", "attribution.asc", "scale_share.json", "metrics.json",
                          "run_manifest.json", "timings.json"}) {
        EXPECT_TRUE(fs::exists(dir / "seg" / f)) << f;
    }
    const auto share = load_json(dir / "seg/scale_share.json");
    double total = 0.0;
    for (const auto& s : share["scales"]) total += s["share"].get<double>();
    EXPECT_NEAR(total, 1.0, 1e-9);
    const Grid pred = read_ascii_grid(dir / "seg/mask.asc");
    const Grid ref = read_ascii_grid(truth);
    ASSERT_EQ(pred.rows(), 48);
    double inter = 0.0, uni = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        inter += (pred[i] != 0.0 && ref[i] != 0.0) ? 1.0 : 0.0;
        uni += (pred[i] != 0.0 || ref[i] != 0.0) ? 1.0 : 0.0;
    }
    EXPECT_NEAR(load_json(dir / "seg/metrics.json")["percent"]["iou"].get<double>(), 100.0 * inter / uni, 0.005);

    ASSERT_EQ(hota_run({"attribution", "--input", input, "--scales", "16", "32", "128", "--out", (dir / "att").string()}),
              0);
    EXPECT_TRUE(fs::exists(dir / "att/weight_scale_16.asc"));
    EXPECT_TRUE(fs::exists(dir / "att/weight_scale_32.asc"));
    EXPECT_FALSE(fs::exists(dir / "att/weight_scale_128.asc"));
    EXPECT_EQ(read_file(dir / "att/scale_share.csv").substr(0, 26), "scale_id,size,active,share");
    const std::string ppm = read_file(dir / "att/attribution.ppm");
    EXPECT_EQ(ppm.substr(0, 3), "P6\n");
    EXPECT_EQ(ppm.size(), std::string("P6\n64 48\n255\n").size() + 48u * 64u * 3u);
}

TEST(Cli, ExternalPredictorDefaultsExchangeDirUnderRun) {
    TempDir dir("cli");
    synth_example(dir / "scene");
    ASSERT_EQ(hota_run({"segment", "--input", (dir / "scene/bands/manifest.json").string(), "--predictor", "external",
                        "--predictor-command", std::string(HOTA_ECHO_PREDICTOR) + " --band 1", "--scales", "32",
                        "--out", (dir / "seg").string()}),
              0);
    EXPECT_TRUE(fs::is_directory(dir / "seg/exchange"));
    const Grid prob = read_ascii_grid(dir / "seg/prob.asc");
    const MultibandRaster bands = read_multiband(dir / "scene/bands/manifest.json");
    double worst = 0.0;
    for (std::size_t i = 0; i < prob.size(); ++i) worst = std::max(worst, std::abs(prob[i] - bands.band("B3")[i]));
    EXPECT_LT(worst, 1e-6);
}

TEST(Cli, SegmentMissingBandFileNamesTheFile) {
    TempDir dir("cli");
    synth_example(dir / "scene");
    fs::remove(dir / "scene/bands/band_B8.bin");
    cli::PipelineConfig cfg;
    cfg.multiband = dir / "scene/bands/manifest.json";
    cfg.output_dir = dir / "seg";
    try {
        cli::cmd_segment(cfg);
        FAIL() << "expected failure";
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("band_B8.bin"), std::string::npos) << e.what();
    }
    EXPECT_EQ(hota_run({"segment", "--input", cfg.multiband.string(), "--out", cfg.output_dir.string()}), 3);
}

TEST(Cli, EvalPerfectAndCompare) {
    TempDir dir("cli");
    synth_example(dir / "scene");
    const std::string truth = (dir / "scene/truth_mask.asc").string();
    ASSERT_EQ(hota_run({"eval", "--pred", truth, "--truth", truth, "--out", (dir / "e1").string()}), 0);
    const auto m = load_json(dir / "e1/metrics.json");
    for (const char* k : {"accuracy", "precision", "recall", "f1", "iou"}) EXPECT_EQ(m["percent"][k], 100.0) << k;
    EXPECT_EQ(read_file(dir / "e1/metrics.csv"),
              "metric,value\naccuracy,100.00\nprecision,100.00\nrecall,100.00\nf1,100.00\niou,100.00\n");

    Grid half = read_ascii_grid(truth);
    std::size_t dropped = 0, water = 0;
    for (std::size_t i = 0; i < half.size(); ++i) {
        if (half[i] == 0.0) continue;
        ++water;
        if (water % 2 == 0) {
            half[i] = 0.0;
            ++dropped;
        }
    }
    write_ascii_grid(half, dir / "half.asc");
    ASSERT_EQ(hota_run({"eval", "--pred", truth, "--truth", truth, "--compare", (dir / "half.asc").string(), "--out",
                        (dir / "e2").string()}),
              0);
    const auto c = load_json(dir / "e2/metrics.json");
    const double recall = 100.0 * static_cast<double>(water - dropped) / static_cast<double>(water);
    EXPECT_NEAR(c["compare"]["percent"]["recall"].get<double>(), std::round(recall * 100.0) / 100.0, 1e-9);
    EXPECT_NEAR(c["delta"]["recall"].get<double>(), std::round((recall - 100.0) * 100.0) / 100.0, 1e-9);
    EXPECT_EQ(c["delta"]["precision"], 0.0);
}

TEST(Cli, EvalUndefinedAndDimensionMismatch) {
    TempDir dir("cli");
    const GridFrame f = hota::testing::make_frame(3, 4);
    write_ascii_grid(Grid(f, 0.0), dir / "dry.asc");
    ASSERT_EQ(hota_run({"eval", "--pred", (dir / "dry.asc").string(), "--truth", (dir / "dry.asc").string(), "--out",
                        (dir / "e").string()}),
              0);
    const auto m = load_json(dir / "e/metrics.json");
    EXPECT_TRUE(m["percent"]["iou"].is_null());
    EXPECT_EQ(m["percent"]["accuracy"], 100.0);
    EXPECT_NE(read_file(dir / "e/metrics.csv").find("iou,undefined"), std::string::npos);

    write_ascii_grid(Grid(hota::testing::make_frame(3, 5), 0.0), dir / "wide.asc");
    EXPECT_EQ(hota_run({"eval", "--pred", (dir / "wide.asc").string(), "--truth", (dir / "dry.asc").string(), "--out",
                        (dir / "e2").string()}),
              2);
}

TEST(Cli, DepthOutputsAndErrors) {
    TempDir dir("cli");
    synth_example(dir / "scene");
    const std::string dem = (dir / "scene/dem.asc").string();
    ASSERT_EQ(hota_run({"depth", "--dem", dem, "--mask", (dir / "scene/truth_mask.asc").string(), "--out",
                        (dir / "d").string()}),
              0);
    for (const char* f : {"depth.asc", "mask_refined.asc", "depth_differencing.asc", "regions.json", "before_after.csv",
                          "before_after.json", "run_manifest.json"}) {
        EXPECT_TRUE(fs::exists(dir / "d" / f)) << f;
    }
    const auto regions = load_json(dir / "d/regions.json");
    EXPECT_EQ(regions["regions"].size(), 2u);
    EXPECT_GT(regions["volume"].get<double>(), 0.0);

    const Grid dem_grid = read_ascii_grid(dem);
    write_ascii_grid(Grid(dem_grid.frame(), 0.0), dir / "empty.asc");
    EXPECT_EQ(hota_run({"depth", "--dem", dem, "--mask", (dir / "empty.asc").string(), "--out", (dir / "d2").string()}),
              4);

    GridFrame far = dem_grid.frame();
    far.georef.origin_x += 1e6;
    write_ascii_grid(Grid(far, 1.0), dir / "far.asc");
    cli::PipelineConfig cfg;
    cfg.dem = dem;
    cfg.mask = dir / "far.asc";
    cfg.output_dir = dir / "d3";
    try {
        cli::cmd_depth(cfg);
        FAIL() << "expected failure";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("no spatial overlap"), std::string::npos) << e.what();
    }
}

TEST(Config, ParsesSectionsAndResolvesPaths) {
    const auto doc = nlohmann::json::parse(R"({
        "inputs": {"multiband": "scene/manifest.json", "truth": "/abs/truth.asc"},
        "tiling": {"scales": [32, 64], "overlap": 0.25, "mode": "overlap"},
        "predictor": {"kind": "ndwi_context", "context_fraction": 0.125},
        "depth": {"volume_tolerance": 0.1, "connectivity": 4, "surface_estimator": "mean"},
        "threads": 3, "seed": 5, "log_level": "warn"
    })");
    const cli::PipelineConfig cfg = cli::parse_config(doc, "/base/dir");
    EXPECT_EQ(cfg.multiband, fs::path("/base/dir/scene/manifest.json"));
    EXPECT_EQ(cfg.truth, fs::path("/abs/truth.asc"));
    EXPECT_EQ(cfg.tiling.scales, (std::vector<int>{32, 64}));
    EXPECT_EQ(cfg.tiling.overlap_fraction, 0.25);
    EXPECT_EQ(cfg.tiling.mode, TilingMode::Overlap);
    EXPECT_EQ(cfg.predictor.kind, PredictorKind::NdwiContext);
    EXPECT_EQ(cfg.predictor.context_fraction, 0.125);
    EXPECT_EQ(cfg.depth.volume_tolerance, 0.1);
    EXPECT_EQ(cfg.depth.connectivity, Connectivity::Four);
    EXPECT_EQ(cfg.depth.surface_estimator, SurfaceEstimator::Mean);
    EXPECT_EQ(cfg.threads, 3);
    EXPECT_EQ(cfg.seed, 5u);
    EXPECT_EQ(cfg.log_level, "warn");
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
    EXPECT_THROW(cli::parse_config(nlohmann::json::parse(R"({"tilling": {}})"), "."), ValidationError);
    EXPECT_THROW(cli::parse_config(nlohmann::json::parse(R"({"tiling": {"size": 3}})"), "."), ValidationError);
    EXPECT_THROW(cli::parse_config(nlohmann::json::parse(R"({"depth": {"connectivity": 6}})"), "."), ValidationError);
    EXPECT_THROW(cli::parse_config(nlohmann::json::parse(R"({"threads": "many"})"), "."), ValidationError);
    EXPECT_THROW(cli::load_config("/nonexistent/config.json"), IoError);
    TempDir dir("cfg");
    write_file(dir / "c.json", "{ nope");
    EXPECT_THROW(cli::load_config(dir / "c.json"), ValidationError);
}

TEST(Config, FlagsOverrideConfigFile) {
    TempDir dir("cfg");
    synth_example(dir / "scene");
    write_file(dir / "c.json", R"({"inputs": {"multiband": "scene/bands/manifest.json"},
                                   "tiling": {"scales": [16], "mode": "conventional"}})");
    ASSERT_EQ(hota_run({"segment", "--config", (dir / "c.json").string(), "--mode", "overlap", "--out",
                        (dir / "o").string()}),
              0);
    const auto manifest = load_json(dir / "o/run_manifest.json");
    EXPECT_EQ(manifest["config"]["tiling"]["mode"], "overlap");
    EXPECT_EQ(manifest["config"]["tiling"]["scales"], nlohmann::json::array({16}));
}

TEST(Config, HashIsStableFnv1a) {
    EXPECT_EQ(cli::fnv1a_hex(""), "cbf29ce484222325");
    EXPECT_EQ(cli::fnv1a_hex("a"), "af63dc4c8601ec8c");
    cli::PipelineConfig a, b;
    b.output_dir = "elsewhere";
    b.log_level = "debug";
    EXPECT_EQ(cli::config_to_json(a).dump(), cli::config_to_json(b).dump());
    b.tiling.overlap_fraction = 0.25;
    EXPECT_NE(cli::config_to_json(a).dump(), cli::config_to_json(b).dump());
}
