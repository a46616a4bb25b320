#include "hota/pipeline.hpp"

#include <algorithm>
#include <exception>
#include <thread>

#include <spdlog/spdlog.h>

#include "hota/error.hpp"

namespace hota {

namespace {

TilePrediction predict_tile(const MultibandRaster& raster, const Tile& tile, std::size_t tile_index,
                            const PredictorConfig& predictor) {
    try {
        return predict_builtin(extract_tile(raster, tile), predictor);
    } catch (const Error& e) {
        rethrow_with_prefix(e, "tile " + std::to_string(tile_index) + ": ");
    }
}

}  // namespace

SegmentResult segment(const MultibandRaster& raster, const TileSpec& spec, const PredictorConfig& predictor,
                      int threads) {
    predictor.validate();
    SegmentResult result;
    result.plan = plan_tiles(raster.rows(), raster.cols(), spec);
    const auto& tiles = result.plan.tiles;
    spdlog::debug("{} tiling: {} tiles over {} scale(s)", to_string(spec.mode), tiles.size(),
                 result.plan.active_scale_ids.size());

    std::vector<TilePrediction> external;
    if (predictor.kind == PredictorKind::External) {
        std::vector<TilePatch> patches;
        patches.reserve(tiles.size());
        for (const auto& t : tiles) patches.push_back(extract_tile(raster, t));
        external = predict_external(patches, predictor);
    }

    const std::size_t shard_count =
        std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1, threads)), 1, std::max<std::size_t>(1, tiles.size()));
    std::vector<FusionAccumulator> shards(shard_count, FusionAccumulator(raster.frame(), spec.scales.size()));
    std::vector<std::exception_ptr> errors(shard_count);

    auto run_shard = [&](std::size_t s) {
        try {
            const std::size_t begin = tiles.size() * s / shard_count;
            const std::size_t end = tiles.size() * (s + 1) / shard_count;
            for (std::size_t i = begin; i < end; ++i) {
                if (predictor.kind == PredictorKind::External) {
                    shards[s].accumulate(external[i]);
                } else {
                    shards[s].accumulate(predict_tile(raster, tiles[i], i, predictor));
                }
            }
        } catch (...) {
            errors[s] = std::current_exception();
        }
    };

    if (shard_count == 1) {
        run_shard(0);
    } else {
        std::vector<std::jthread> workers;
        workers.reserve(shard_count);
        for (std::size_t s = 0; s < shard_count; ++s) workers.emplace_back(run_shard, s);
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    for (std::size_t s = 1; s < shard_count; ++s) shards[0].merge(shards[s]);

    result.fusion = finalize(shards[0]);
    return result;
}

Grid predict_whole_image(const MultibandRaster& raster, const PredictorConfig& predictor) {
    TilePatch patch = extract_window(raster, 0, 0, raster.rows(), raster.cols());
    TilePrediction pred = predict_builtin(patch, predictor);
    Grid out(raster.frame());
    bool any_invalid = false;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = pred.valid[i] ? pred.probs[i] : kFusionNodata;
        any_invalid = any_invalid || !pred.valid[i];
    }
    if (any_invalid) out.set_nodata(kFusionNodata);
    return out;
}

}  // namespace hota
