#include <gtest/gtest.h>

#include <cmath>

#include "hota/depth.hpp"
#include "hota/error.hpp"
#include "hota/metrics.hpp"
#include "hota/synth.hpp"
#include "scenarios.hpp"
#include "test_util.hpp"

using namespace hota;
using hota::testing::make_frame;
using hota::testing::mask_from_rows;

namespace {

Grid plane_dem(int rows, int cols, double cell, double base, double gx, double gy) {
    Grid dem(make_frame(rows, cols, cell));
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            dem(r, c) = base + gx * dem.frame().cell_center_x(c) + gy * dem.frame().cell_center_y(r);
        }
    }
    return dem;
}

}  // namespace

TEST(EstimateSurface, MedianMeanAndNodata) {
    Grid dem(make_frame(1, 5), std::vector<double>{1.0, 4.0, 2.0, -9999.0, 10.0}, -9999.0);
    const std::vector<Pixel> odd{{0, 0}, {0, 1}, {0, 2}};
    const std::vector<Pixel> even{{0, 0}, {0, 1}, {0, 2}, {0, 4}};
    const std::vector<Pixel> with_nodata{{0, 0}, {0, 3}, {0, 1}};
    EXPECT_EQ(estimate_surface(dem, odd, SurfaceEstimator::Median), 2.0);
    EXPECT_EQ(estimate_surface(dem, even, SurfaceEstimator::Median), 3.0);
    EXPECT_NEAR(estimate_surface(dem, odd, SurfaceEstimator::Mean), 7.0 / 3.0, 1e-15);
    EXPECT_EQ(estimate_surface(dem, with_nodata, SurfaceEstimator::Median), 2.5);
    const std::vector<Pixel> only_nodata{{0, 3}};
    EXPECT_THROW(estimate_surface(dem, only_nodata, SurfaceEstimator::Median), ComputationError);
    EXPECT_EQ(parse_surface_estimator("mean"), SurfaceEstimator::Mean);
    EXPECT_THROW(parse_surface_estimator("mode"), ValidationError);
}

TEST(DepthFromSurface, FlatAndValley) {
    const BinaryMask m = mask_from_rows({".###.", ".###."});
    const RegionLabels labels = connected_components(m);
    Grid flat(m.frame(), 10.0);
    const std::vector<double> w{10.5};
    const Grid d = depth_from_surface(flat, labels, w);
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 5; ++c) EXPECT_EQ(d(r, c), m(r, c) ? 0.5 : 0.0);
    }
    Grid valley(m.frame(), std::vector<double>{12, 11, 9, 11, 12, 12, 11, 9, 11, 12});
    const std::vector<double> w2{10.0};
    const Grid dv = depth_from_surface(valley, labels, w2);
    EXPECT_EQ(dv(0, 1), 0.0);
    EXPECT_EQ(dv(0, 2), 1.0);
    EXPECT_EQ(dv(1, 3), 0.0);
    EXPECT_THROW(depth_from_surface(valley, labels, std::vector<double>{}), ValidationError);
}

TEST(DepthFromSurface, NodataCellsAreCounted) {
    const BinaryMask m = mask_from_rows({"##"});
    Grid dem(m.frame(), std::vector<double>{1.0, -9999.0}, -9999.0);
    std::size_t missing = 0;
    const Grid d = depth_from_surface(dem, connected_components(m), std::vector<double>{2.0}, &missing);
    EXPECT_EQ(missing, 1u);
    EXPECT_EQ(d(0, 0), 1.0);
    EXPECT_EQ(d(0, 1), 0.0);
}

TEST(FloodVolume, DepthTimesCellArea) {
    const Grid d(make_frame(10, 10, 5.0), 0.2);
    EXPECT_NEAR(flood_volume(d), 500.0, 1e-9);
}

TEST(AlignToDem, CopiesOrResamples) {
    const BinaryMask m = mask_from_rows({"#.", ".#"});
    const Grid dem(m.frame(), 1.0);
    EXPECT_EQ(align_to_dem(m, dem), m);
    const Grid fine(make_frame(4, 4, 0.5, 0.0, 2.0), 1.0);
    const BinaryMask up = align_to_dem(m, fine);
    EXPECT_EQ(up, [] {
        BinaryMask e = mask_from_rows({"##..", "##..", "..##", "..##"});
        BinaryMask out(make_frame(4, 4, 0.5, 0.0, 2.0));
        for (std::size_t i = 0; i < e.size(); ++i) out.set(i, e[i]);
        return out;
    }());
}

TEST(OutwardSlope, PlaneFlatAndBowl) {
    const BinaryMask m = mask_from_rows({".....", ".###.", ".###.", ".###.", "....."});
    const Grid east = plane_dem(5, 5, 1.0, 0.0, 0.3, 0.0);
    EXPECT_NEAR(outward_slope(east, m, Pixel{2, 3}), 0.3, 1e-12);
    EXPECT_NEAR(outward_slope(east, m, Pixel{2, 1}), -0.3, 1e-12);
    EXPECT_NEAR(outward_slope(east, m, Pixel{1, 2}), 0.0, 1e-12);
    const Grid north = plane_dem(5, 5, 1.0, 0.0, 0.0, 0.2);
    EXPECT_NEAR(outward_slope(north, m, Pixel{1, 2}), 0.2, 1e-12);
    EXPECT_NEAR(outward_slope(north, m, Pixel{1, 3}), 0.2 / std::sqrt(2.0), 1e-12);
    EXPECT_EQ(outward_slope(Grid(m.frame(), 4.0), m, Pixel{1, 1}), 0.0);
    Grid bowl(m.frame());
    for (int r = 0; r < 5; ++r) {
        for (int c = 0; c < 5; ++c) bowl(r, c) = (r - 2) * (r - 2) + (c - 2) * (c - 2);
    }
    for (const Pixel& p : boundary(m)) EXPECT_GT(outward_slope(bowl, m, p), 0.0);
    EXPECT_THROW(outward_slope(bowl, m, Pixel{2, 2}), ValidationError);
}

TEST(SlopeField, CentralAndOneSidedDifferences) {
    const Grid dem = plane_dem(4, 6, 2.0, 1.0, 0.25, -0.5);
    const SlopeField f = slope_field(dem);
    for (std::size_t i = 0; i < dem.size(); ++i) {
        EXPECT_NEAR(f.gx[i], 0.25, 1e-12);
        EXPECT_NEAR(f.gy[i], -0.5, 1e-12);
    }
}

TEST(DepthConfig, Validation) {
    DepthConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    cfg.volume_tolerance = 0.0;
    EXPECT_THROW(cfg.validate(), ValidationError);
    cfg = DepthConfig{};
    cfg.max_iterations = 0;
    EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(JointOptimize, TruthMaskConvergesImmediately) {
    const auto pc = hota::testing::paraboloid_case();
    const SyntheticScene scene = generate(pc.spec);
    const FloodSurface s = joint_optimize(scene.truth_mask, scene.dem, DepthConfig{});
    ASSERT_EQ(s.regions.size(), 1u);
    const RegionResult& r = s.regions[0];
    EXPECT_EQ(r.termination, Termination::Converged);
    EXPECT_EQ(r.iterations, 1);
    EXPECT_LT(r.boundary_mae_final, 0.05);
    EXPECT_LE(std::abs(r.water_surface - pc.level), waterline_step(scene.dem, scene.truth_mask));
    EXPECT_EQ(s.mask, scene.truth_mask);
}

TEST(JointOptimize, TiltedScenesLowerBoundaryErrorWithinVolumeBudget) {
    for (int index : {0, 1}) {
        const SyntheticScene scene = generate(hota::testing::tilted_compound_scene(index));
        const BinaryMask start = perturb_mask(scene.truth_mask, hota::testing::ring_perturbation(index), 1);
        DepthConfig cfg;
        const FloodSurface before = differencing_surface(start, scene.dem, cfg);
        const FloodSurface after = joint_optimize(start, scene.dem, cfg);
        const BeforeAfterTable table = before_after_report(before, after);
        EXPECT_LT(table.pooled.mae_after, table.pooled.mae_before) << "scene " << index;
        for (const auto& region : after.regions) {
            for (const auto& it : region.trace) {
                if (it.accepted) {
                    EXPECT_LE(std::abs(it.volume_candidate - it.volume_reference), cfg.volume_tolerance * it.volume_reference);
                }
            }
        }
    }
}

namespace {

// Steep noise-free bowl: 30 m deep paraboloid filled to half depth.
hota::testing::ParaboloidCase steep_bowl() {
    auto pc = hota::testing::paraboloid_case();
    pc.bowl_depth = 30.0;
    pc.level = pc.spec.base_elevation - 15.0;
    pc.spec.basins[0].depth = pc.bowl_depth;
    pc.spec.basins[0].fill_level = pc.level;
    return pc;
}

}  // namespace

TEST(JointOptimize, UnderSegmentedBowlReachesBoundaryTolerance) {
    const auto pc = steep_bowl();
    const SyntheticScene scene = generate(pc.spec);
    const BinaryMask start = perturb_mask(scene.truth_mask, Perturbation{PerturbMode::Erode, 2, 0.0}, 1);
    DepthConfig cfg;
    const FloodSurface before = differencing_surface(start, scene.dem, cfg);
    const FloodSurface after = joint_optimize(start, scene.dem, cfg);
    ASSERT_EQ(after.regions.size(), 1u);
    const RegionResult& r = after.regions[0];
    EXPECT_GE(before.regions[0].boundary_mae_final, cfg.boundary_depth_tolerance);
    EXPECT_LT(r.boundary_mae_final, r.boundary_mae_initial);
    EXPECT_EQ(r.termination, Termination::Converged);
    EXPECT_LT(r.boundary_mae_final, cfg.boundary_depth_tolerance);
}

TEST(JointOptimize, OverSegmentedBowlDropsDryRimPixels) {
    const auto pc = steep_bowl();
    const SyntheticScene scene = generate(pc.spec);
    const BinaryMask start = perturb_mask(scene.truth_mask, Perturbation{PerturbMode::Dilate, 2, 0.0}, 1);
    DepthConfig cfg;
    const FloodSurface before = differencing_surface(start, scene.dem, cfg);
    const FloodSurface after = joint_optimize(start, scene.dem, cfg);
    ASSERT_EQ(after.regions.size(), 1u);
    const RegionResult& r = after.regions[0];
    EXPECT_LT(r.pixels_final, r.pixels_initial);
    EXPECT_GT(*metrics_2d(confusion(after.mask, scene.truth_mask)).iou,
              *metrics_2d(confusion(before.mask, scene.truth_mask)).iou);

    // First step: on the bowl wall the terrain rises outward everywhere, so
    // exactly the rim pixels at or above the surface estimate are removed.
    const std::vector<Pixel> rim = boundary(smooth(start));
    const double w = estimate_surface(scene.dem, rim, SurfaceEstimator::Median);
    std::size_t dry = 0;
    for (const Pixel& p : rim) dry += scene.dem(p.row, p.col) >= w ? 1 : 0;
    ASSERT_FALSE(r.trace.empty());
    EXPECT_EQ(r.trace[0].water_surface, w);
    EXPECT_EQ(r.trace[0].removed, dry);
}

TEST(JointOptimize, DescendingTerrainExpandsRingByRing) {
    Grid cone(make_frame(41, 41));
    for (int r = 0; r < 41; ++r) {
        for (int c = 0; c < 41; ++c) cone(r, c) = 10.0 - 0.5 * std::hypot(r - 20.0, c - 20.0);
    }
    BinaryMask m(cone.frame());
    for (int r = 18; r <= 22; ++r) {
        for (int c = 18; c <= 22; ++c) m.set(r, c, true);
    }
    DepthConfig cfg;
    cfg.volume_tolerance = 0.99;
    cfg.max_iterations = 4;
    const FloodSurface s = joint_optimize(m, cone, cfg);
    ASSERT_EQ(s.regions.size(), 1u);
    const RegionResult& r = s.regions[0];
    ASSERT_FALSE(r.trace.empty());
    EXPECT_TRUE(r.trace[0].accepted);
    for (const auto& it : r.trace) {
        if (!it.accepted) continue;
        EXPECT_GT(it.added, 0u);
        EXPECT_EQ(it.removed, 0u);
    }
    EXPECT_GT(r.pixels_final, r.pixels_initial);
}

TEST(JointOptimize, VolumeBreakRevertsTheStep) {
    const SceneSpec spec = hota::testing::tilted_compound_scene(1);
    const SyntheticScene scene = generate(spec);
    const BinaryMask start = perturb_mask(scene.truth_mask, hota::testing::ring_perturbation(1), 1);
    DepthConfig cfg;
    cfg.volume_tolerance = 1e-4;
    const FloodSurface s = joint_optimize(start, scene.dem, cfg);
    ASSERT_EQ(s.regions.size(), 1u);
    const RegionResult& r = s.regions[0];
    EXPECT_EQ(r.termination, Termination::VolumeBreak);
    ASSERT_FALSE(r.trace.empty());
    EXPECT_FALSE(r.trace.back().accepted);
    EXPECT_EQ(r.iterations, static_cast<int>(r.trace.size()));
    EXPECT_EQ(r.volume, r.trace.back().volume_reference);
}

TEST(JointOptimize, MaxIterationsCapsTheLoop) {
    const SceneSpec spec = hota::testing::tilted_compound_scene(1);
    const SyntheticScene scene = generate(spec);
    const BinaryMask start = perturb_mask(scene.truth_mask, hota::testing::ring_perturbation(1), 1);
    DepthConfig cfg;
    cfg.max_iterations = 1;
    const FloodSurface s = joint_optimize(start, scene.dem, cfg);
    EXPECT_EQ(s.iterations_used, 1);
    EXPECT_LE(s.regions[0].trace.size(), 1u);
}

TEST(JointOptimize, EmptyMaskAndMisalignment) {
    const Grid dem(make_frame(8, 8), 1.0);
    EXPECT_THROW(joint_optimize(BinaryMask(dem.frame()), dem, DepthConfig{}), ComputationError);
    EXPECT_THROW(joint_optimize(BinaryMask(make_frame(8, 9), true), dem, DepthConfig{}), ValidationError);
}

TEST(JointOptimize, RegionWithoutElevationIsDropped) {
    Grid dem(make_frame(20, 20), 5.0, -9999.0);
    BinaryMask m(dem.frame());
    for (int r = 2; r < 7; ++r) {
        for (int c = 2; c < 7; ++c) {
            m.set(r, c, true);
            dem(r, c) = -9999.0;
        }
    }
    for (int r = 12; r < 17; ++r) {
        for (int c = 12; c < 17; ++c) m.set(r, c, true);
    }
    for (int r = 13; r < 16; ++r) {
        for (int c = 13; c < 16; ++c) dem(r, c) = 4.0;
    }
    const FloodSurface s = joint_optimize(m, dem, DepthConfig{});
    ASSERT_EQ(s.regions.size(), 1u);
    EXPECT_EQ(s.regions[0].label, 2);
    ASSERT_EQ(s.warnings.size(), 1u);
    EXPECT_NE(s.warnings[0].find("region 1 dropped"), std::string::npos);
    EXPECT_FALSE(s.mask(4, 4));
}

TEST(Differencing, MatchesDirectFormula) {
    const auto pc = hota::testing::paraboloid_case();
    const SyntheticScene scene = generate(pc.spec);
    const FloodSurface s = differencing_surface(scene.truth_mask, scene.dem, DepthConfig{});
    ASSERT_EQ(s.regions.size(), 1u);
    EXPECT_EQ(s.regions[0].iterations, 0);
    const std::vector<Pixel> ring = boundary(smooth(scene.truth_mask));
    const double w = estimate_surface(scene.dem, ring, SurfaceEstimator::Median);
    EXPECT_EQ(s.regions[0].water_surface, w);
    for (std::size_t i = 0; i < s.depth.size(); ++i) {
        EXPECT_EQ(s.depth[i], s.mask[i] ? std::max(0.0, w - scene.dem[i]) : 0.0);
    }
}
