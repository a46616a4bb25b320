#pragma once

#include <cstdint>
#include <vector>

#include "hota/grid.hpp"
#include "hota/predict.hpp"

namespace hota {

/// w = 2|p - 0.5|. Throws ValidationError for p outside [0, 1].
double confidence_weight(double p);

inline constexpr double kWaterThreshold = 0.5;

/// Per-pixel running sums for confidence-weighted fusion of overlapping
/// tile predictions. Accumulators over disjoint tile subsets combine with
/// merge(); merging in a fixed order keeps results reproducible.
class FusionAccumulator {
public:
    FusionAccumulator(GridFrame frame, std::size_t scale_count);

    void accumulate(const TilePrediction& pred);
    void merge(const FusionAccumulator& other);

    const GridFrame& frame() const { return frame_; }
    std::size_t scale_count() const { return per_scale_weight_.size(); }

    const Grid& weighted_sum() const { return weighted_sum_; }
    const Grid& weight_sum() const { return weight_sum_; }
    const Grid& plain_sum() const { return plain_sum_; }
    const Grid& count() const { return count_; }
    /// Tiles covering each pixel, valid or not.
    const Grid& coverage() const { return coverage_; }
    const Grid& per_scale_weight(std::size_t scale_id) const { return per_scale_weight_.at(scale_id); }
    const Grid& min_prob() const { return min_prob_; }
    const Grid& max_prob() const { return max_prob_; }
    /// Scale ids that received at least one prediction.
    const std::vector<std::uint8_t>& scale_seen() const { return scale_seen_; }

private:
    GridFrame frame_;
    Grid weighted_sum_;
    Grid weight_sum_;
    Grid plain_sum_;
    Grid count_;
    Grid coverage_;
    Grid min_prob_;
    Grid max_prob_;
    std::vector<Grid> per_scale_weight_;
    std::vector<std::uint8_t> scale_seen_;
};

struct FusionResult {
    Grid prob_map;
    BinaryMask mask;
    /// Scale id owning the largest fused weight per pixel.
    Grid attribution;
    /// Fraction of water pixels attributed to each scale id (all zero when
    /// no pixel is water).
    std::vector<double> scale_share;
    std::size_t water_pixels = 0;
    std::vector<Grid> per_scale_weight;
    std::vector<int> active_scale_ids;
};

inline constexpr double kFusionNodata = -9999.0;

/// Weighted mean where total weight is positive, plain mean of contributing
/// probabilities otherwise, and exactly p where every contribution was p.
/// Pixels covered only by invalid (nodata) input become nodata in the
/// probability and attribution maps. Throws ComputationError if a pixel is
/// not covered by any tile.
FusionResult finalize(const FusionAccumulator& acc);

}  // namespace hota
