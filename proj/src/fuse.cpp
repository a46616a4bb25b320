#include "hota/fuse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hota/error.hpp"

namespace hota {

double confidence_weight(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("probability outside [0, 1]");
    return 2.0 * std::abs(p - 0.5);
}

FusionAccumulator::FusionAccumulator(GridFrame frame, std::size_t scale_count)
    : frame_(frame),
      weighted_sum_(frame),
      weight_sum_(frame),
      plain_sum_(frame),
      count_(frame),
      coverage_(frame),
      min_prob_(frame, std::numeric_limits<double>::max()),
      max_prob_(frame, std::numeric_limits<double>::lowest()),
      per_scale_weight_(scale_count, Grid(frame)),
      scale_seen_(scale_count, 0) {
    if (scale_count == 0) throw ValidationError("fusion needs at least one scale");
}

void FusionAccumulator::accumulate(const TilePrediction& pred) {
    const Tile& t = pred.tile;
    if (pred.rows != t.size || pred.cols != t.size ||
        pred.probs.size() != static_cast<std::size_t>(t.size) * static_cast<std::size_t>(t.size) ||
        pred.valid.size() != pred.probs.size()) {
        throw ValidationError("prediction dimensions do not match tile size " + std::to_string(t.size));
    }
    if (t.row0 < 0 || t.col0 < 0 || t.row0 + t.size > frame_.rows || t.col0 + t.size > frame_.cols) {
        throw ValidationError("prediction tile exceeds accumulator bounds");
    }
    if (t.scale_id < 0 || static_cast<std::size_t>(t.scale_id) >= per_scale_weight_.size()) {
        throw ValidationError("prediction scale id " + std::to_string(t.scale_id) + " out of range");
    }
    Grid& scale_weight = per_scale_weight_[static_cast<std::size_t>(t.scale_id)];
    scale_seen_[static_cast<std::size_t>(t.scale_id)] = 1;

    for (int r = 0; r < t.size; ++r) {
        for (int c = 0; c < t.size; ++c) {
            const std::size_t p = static_cast<std::size_t>(r) * t.size + c;
            const std::size_t i = weighted_sum_.index(t.row0 + r, t.col0 + c);
            coverage_[i] += 1.0;
            if (!pred.valid[p]) continue;
            const double prob = pred.probs[p];
            const double w = confidence_weight(prob);
            weighted_sum_[i] += w * prob;
            weight_sum_[i] += w;
            plain_sum_[i] += prob;
            count_[i] += 1.0;
            scale_weight[i] += w;
            min_prob_[i] = std::min(min_prob_[i], prob);
            max_prob_[i] = std::max(max_prob_[i], prob);
        }
    }
}

void FusionAccumulator::merge(const FusionAccumulator& other) {
    if (!frame_.co_registered(other.frame_) || other.scale_count() != scale_count()) {
        throw ValidationError("cannot merge accumulators with different frames or scale counts");
    }
    auto add = [](Grid& dst, const Grid& src) {
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    };
    add(weighted_sum_, other.weighted_sum_);
    add(weight_sum_, other.weight_sum_);
    add(plain_sum_, other.plain_sum_);
    add(count_, other.count_);
    add(coverage_, other.coverage_);
    for (std::size_t s = 0; s < per_scale_weight_.size(); ++s) {
        add(per_scale_weight_[s], other.per_scale_weight_[s]);
        scale_seen_[s] = scale_seen_[s] || other.scale_seen_[s];
    }
    for (std::size_t i = 0; i < min_prob_.size(); ++i) {
        min_prob_[i] = std::min(min_prob_[i], other.min_prob_[i]);
        max_prob_[i] = std::max(max_prob_[i], other.max_prob_[i]);
    }
}

FusionResult finalize(const FusionAccumulator& acc) {
    const GridFrame& frame = acc.frame();
    FusionResult result;
    result.prob_map = Grid(frame);
    result.mask = BinaryMask(frame);
    result.attribution = Grid(frame);
    result.scale_share.assign(acc.scale_count(), 0.0);

    std::vector<std::size_t> seen_ids;
    for (std::size_t s = 0; s < acc.scale_count(); ++s) {
        if (acc.scale_seen()[s]) {
            seen_ids.push_back(s);
            result.active_scale_ids.push_back(static_cast<int>(s));
        }
    }
    if (seen_ids.empty()) throw ComputationError("no predictions were accumulated");

    std::vector<std::size_t> water_by_scale(acc.scale_count(), 0);
    bool any_nodata = false;
    for (std::size_t i = 0; i < frame.size(); ++i) {
        const double n = acc.count()[i];
        if (acc.coverage()[i] < 1.0) {
            const int row = static_cast<int>(i / static_cast<std::size_t>(frame.cols));
            const int col = static_cast<int>(i % static_cast<std::size_t>(frame.cols));
            throw ComputationError("pixel (" + std::to_string(row) + "," + std::to_string(col) +
                                   ") is not covered by any tile");
        }
        if (n < 1.0) {
            result.prob_map[i] = kFusionNodata;
            result.attribution[i] = kFusionNodata;
            any_nodata = true;
            continue;
        }
        double prob = 0.0;
        if (acc.min_prob()[i] == acc.max_prob()[i]) {
            prob = acc.min_prob()[i];
        } else if (acc.weight_sum()[i] > 0.0) {
            prob = acc.weighted_sum()[i] / acc.weight_sum()[i];
        } else {
            prob = acc.plain_sum()[i] / n;
        }
        prob = std::clamp(prob, 0.0, 1.0);
        result.prob_map[i] = prob;
        const bool water = prob >= kWaterThreshold;
        result.mask.set(i, water);

        // Strict > keeps the smallest scale on ties.
        std::size_t best = seen_ids.front();
        for (std::size_t s : seen_ids) {
            if (acc.per_scale_weight(s)[i] > acc.per_scale_weight(best)[i]) best = s;
        }
        result.attribution[i] = static_cast<double>(best);
        if (water) {
            ++water_by_scale[best];
            ++result.water_pixels;
        }
    }
    if (any_nodata) {
        result.prob_map.set_nodata(kFusionNodata);
        result.attribution.set_nodata(kFusionNodata);
    }
    if (result.water_pixels > 0) {
        for (std::size_t s = 0; s < acc.scale_count(); ++s) {
            result.scale_share[s] = static_cast<double>(water_by_scale[s]) / static_cast<double>(result.water_pixels);
        }
    }
    result.per_scale_weight.reserve(acc.scale_count());
    for (std::size_t s = 0; s < acc.scale_count(); ++s) result.per_scale_weight.push_back(acc.per_scale_weight(s));
    return result;
}

}  // namespace hota
