#pragma once

#include "hota/fuse.hpp"
#include "hota/predict.hpp"
#include "hota/tiler.hpp"

namespace hota {

struct SegmentResult {
    TilePlan plan;
    FusionResult fusion;
};

/// plan -> extract -> predict -> fuse. With threads > 1 the tile list is cut
/// into contiguous shards, each fused into a private accumulator; shards are
/// merged in shard order. threads == 1 is bit-reproducible.
SegmentResult segment(const MultibandRaster& raster, const TileSpec& spec, const PredictorConfig& predictor,
                      int threads = 1);

/// Probability map from one prediction over the whole raster, no tiling.
Grid predict_whole_image(const MultibandRaster& raster, const PredictorConfig& predictor);

}  // namespace hota
