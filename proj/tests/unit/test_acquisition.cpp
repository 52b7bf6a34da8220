#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "mcam/acquisition.hpp"
#include "mcam/parallel.hpp"
#include "mcam/presets.hpp"

namespace mcam {
namespace {

// Prototype proportions shrunk 16x: 12 zero-overlap positions, fast renders.
ArrayConfig small_tiled() {
    ArrayConfig c = prototype_config(1.0);
    c.sensor.pixels_x = 263;
    c.sensor.pixels_y = 195;
    c.layout.rows = c.layout.cols = 2;
    c.layout.pitch_x = c.layout.pitch_y = Length::um(843.75);
    c.lens.outer_diameter = Length::um(800.0);
    return c;
}

Image bars(int w, int h, int period) {
    Image img(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) img.at(x, y) = (x / (period / 2)) % 2 ? 0.9f : 0.1f;
    }
    return img;
}

CameraFrame frame_of(Image img, CameraIndex cam = {0, 0}) {
    CameraFrame f;
    f.pixels = std::move(img);
    f.camera = cam;
    f.window = {0, 0, f.pixels.width(), f.pixels.height()};
    return f;
}

TEST(ScanPlan, PrototypeCounts) {
    const ArrayConfig c = prototype_config(1.0);
    const ScanPlan uniform = plan_tiled_scan(c, 0.10, true, StepConvention::UniformShortAxis);
    EXPECT_EQ(uniform.lateral_offsets_um.size(), 25u);
    const ScanPlan per_axis = plan_tiled_scan(c, 0.0, true, StepConvention::PerAxis);
    EXPECT_EQ(per_axis.lateral_offsets_um.size(), 12u);
    EXPECT_EQ(per_axis.counts.nx, 3);
    EXPECT_EQ(per_axis.counts.ny, 4);
}

TEST(ScanPlan, TravelUniqueAndCentred) {
    const ArrayConfig c = prototype_config(1.0);
    for (StepConvention conv : {StepConvention::PerAxis, StepConvention::UniformShortAxis}) {
        for (double ov : {0.0, 0.1, 0.25, 0.5}) {
            const ScanPlan p = plan_tiled_scan(c, ov, true, conv);
            const Vec2 ext = p.lateral_extent_um();
            EXPECT_LE(ext.x, c.layout.pitch_x.in_um());
            EXPECT_LE(ext.y, c.layout.pitch_y.in_um());
            std::set<std::pair<double, double>> seen;
            Vec2 sum;
            for (Vec2 o : p.lateral_offsets_um) {
                EXPECT_TRUE(seen.insert({o.x, o.y}).second);
                sum = sum + o;
            }
            EXPECT_NEAR(sum.x, 0.0, 1e-6);
            EXPECT_NEAR(sum.y, 0.0, 1e-6);
        }
    }
}

TEST(ScanPlan, SerpentineMovesOneStepAtATime) {
    const ScanPlan p = plan_tiled_scan(prototype_config(1.0), 0.1, true, StepConvention::UniformShortAxis);
    for (std::size_t i = 1; i < p.lateral_offsets_um.size(); ++i) {
        const Vec2 d = p.lateral_offsets_um[i] - p.lateral_offsets_um[i - 1];
        EXPECT_NEAR(std::hypot(d.x, d.y), p.step_um.x, 1e-6);
    }
    const ScanPlan rm = plan_tiled_scan(prototype_config(1.0), 0.1, false, StepConvention::UniformShortAxis);
    std::set<std::pair<double, double>> a, b;
    for (Vec2 o : p.lateral_offsets_um) a.insert({o.x, o.y});
    for (Vec2 o : rm.lateral_offsets_um) b.insert({o.x, o.y});
    EXPECT_EQ(a, b);
    EXPECT_LT(rm.lateral_offsets_um[5].x, rm.lateral_offsets_um[4].x);  // row-major restarts the row
}

TEST(ScanPlan, RejectsGapFreeConfigs) {
    EXPECT_THROW(plan_tiled_scan(prototype_config(0.2), 0.1), DomainError);
    EXPECT_THROW(plan_tiled_scan(prototype_config(1.0), 0.6), DomainError);
    EXPECT_THROW(plan_tiled_scan(prototype_config(1.0), 0.1, true, StepConvention::PerAxis, {0.0, 0.0}), DomainError);
}

TEST(ScanPlan, CsvHasOneRowPerSnapshot) {
    const ScanPlan p = plan_tiled_scan(prototype_config(1.0), 0.0, true, StepConvention::PerAxis, {-10.0, 0.0, 10.0});
    EXPECT_EQ(p.snapshot_count(), 36u);
    const std::string csv = p.to_csv();
    EXPECT_EQ(csv.rfind("index,dx_um,dy_um,dz_um\n", 0), 0u);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 37);
}

TEST(Coverage, PrototypePlansCoverAtHalfResolution) {
    const ArrayConfig c = prototype_config(1.0);
    for (auto [ov, conv] : {std::pair{0.1, StepConvention::UniformShortAxis}, std::pair{0.0, StepConvention::PerAxis}}) {
        const CoverageReport r = check_scan_coverage(c, plan_tiled_scan(c, ov, true, conv));
        EXPECT_DOUBLE_EQ(r.spacing_um, 1.1);
        EXPECT_GT(r.samples, 6'000'000'000LL);
        EXPECT_TRUE(r.complete()) << r.uncovered;
    }
}

TEST(Coverage, MissingPositionLeavesHoles) {
    const ArrayConfig c = prototype_config(1.0);
    ScanPlan p = plan_tiled_scan(c, 0.0, true, StepConvention::PerAxis);
    p.lateral_offsets_um.erase(p.lateral_offsets_um.begin() + 5);
    const CoverageReport r = check_scan_coverage(c, p, 5.0);
    EXPECT_FALSE(r.complete());
}

TEST(Coverage, RandomTiledConfigsAgreeWithPointSampling) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int tested = 0;
    for (int trial = 0; trial < 60 && tested < 25; ++trial) {
        ArrayConfig c = prototype_config(1.0);
        c.sensor.pixels_x = 200 + static_cast<int>(400 * u(rng));
        c.sensor.pixels_y = 150 + static_cast<int>(300 * u(rng));
        c.layout.rows = 1 + static_cast<int>(3 * u(rng));
        c.layout.cols = 1 + static_cast<int>(3 * u(rng));
        c.layout.pitch_x = Length::um(c.sensor.width().in_um() * (1.05 + 2.0 * u(rng)));
        c.layout.pitch_y = Length::um(c.sensor.height().in_um() * (1.05 + 2.0 * u(rng)));
        c.lens.outer_diameter = Length::um(std::min(c.layout.pitch_x.in_um(), c.layout.pitch_y.in_um()));
        c.magnification = 0.3 + 0.7 * u(rng);
        const double ov = 0.5 * u(rng);
        const auto conv = u(rng) < 0.5 ? StepConvention::PerAxis : StepConvention::UniformShortAxis;
        ScanPlan p;
        try {
            p = plan_tiled_scan(c, ov, true, conv);
        } catch (const DomainError&) {
            continue;  // gap-free draw
        }
        ++tested;
        const CoverageReport r = check_scan_coverage(c, p);
        EXPECT_TRUE(r.complete());
        // Brute-force point-in-rectangle oracle on random footprint points.
        const FovPair fov = camera_object_fov(c);
        for (int k = 0; k < 300; ++k) {
            const Vec2 q{r.min_um.x + (r.max_um.x - r.min_um.x) * u(rng), r.min_um.y + (r.max_um.y - r.min_um.y) * u(rng)};
            bool hit = false;
            for (CameraIndex cam : c.cameras()) {
                for (Vec2 o : p.lateral_offsets_um) {
                    const Vec2 d = q - (c.camera_axis(cam) + o);
                    hit = hit || (std::abs(d.x) <= fov.x.in_um() / 2.0 && std::abs(d.y) <= fov.y.in_um() / 2.0);
                }
            }
            EXPECT_TRUE(hit);
        }
    }
    EXPECT_GE(tested, 10);
}

TEST(FocusMetric, UniformIsZero) {
    EXPECT_EQ(laplacian_focus_metric(frame_of(Image(64, 64, 0.37f))), 0.0);
}

TEST(FocusMetric, MatchesDirectLaplacianVariance) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    Image img(40, 30);
    for (float& v : img.pixels()) v = u(rng);
    const PixelRegion r{5, 4, 20, 18};
    std::vector<double> lap;
    for (int y = r.y0; y < r.y0 + r.height; ++y) {
        for (int x = r.x0; x < r.x0 + r.width; ++x) {
            double l = -4.0 * img.at(x, y);
            for (auto [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) l += img.at(x + dx, y + dy);
            lap.push_back(l);
        }
    }
    double mean = 0.0;
    for (double l : lap) mean += l / lap.size();
    double var = 0.0;
    for (double l : lap) var += (l - mean) * (l - mean) / lap.size();
    EXPECT_NEAR(laplacian_focus_metric(img, r), var, 1e-9);
}

TEST(FocusMetric, SharpBeatsBlurred) {
    const Image sharp = bars(96, 96, 8);
    EXPECT_GT(laplacian_focus_metric(frame_of(sharp)), laplacian_focus_metric(frame_of(gaussian_blur(sharp, 2.0))));
}

TEST(FocusMetric, ScalesWithSquareOfGain) {
    const Image img = gaussian_blur(bars(96, 96, 10), 1.0);
    Image scaled = img;
    for (float& v : scaled.pixels()) v *= 3.0f;
    EXPECT_NEAR(laplacian_focus_metric(frame_of(scaled)), 9.0 * laplacian_focus_metric(frame_of(img)),
                1e-5 * laplacian_focus_metric(frame_of(scaled)));
}

TEST(FocusMetric, RegionLimits) {
    const Image img(64, 64, 0.5f);
    EXPECT_THROW(laplacian_focus_metric(img, {0, 0, 15, 40}), DomainError);
    EXPECT_THROW(laplacian_focus_metric(img, {50, 0, 20, 20}), DomainError);
    EXPECT_THROW(laplacian_focus_metric(frame_of(Image(30, 30, 0.5f))), DomainError);  // central 15x15
    const PixelRegion r = central_region(64, 48);
    EXPECT_EQ(r.x0, 16);
    EXPECT_EQ(r.y0, 12);
    EXPECT_EQ(r.width, 32);
    EXPECT_EQ(r.height, 24);
}

TEST(SelectFocus, RenderedStackFindsTrueSlice) {
    const ArrayConfig c = prototype_config(1.0);
    TextureSpec tex;
    tex.feature_um = 6.0;
    Scene s = make_texture_scene({{220.0, 220.0}, 0.25, c.camera_axis({0, 0})}, tex);
    set_uniform_height(s, 60.0);  // slice 6 of 0, 10, ..., 90
    std::vector<double> z;
    for (int i = 0; i < 10; ++i) z.push_back(10.0 * i);
    RenderOptions o;
    o.window = SensorWindow{2104 - 64, 1560 - 64, 128, 128};
    const auto stack = render_focal_stack(s, c, z, {}, 3, o);
    std::vector<FrameSet> one_cam;
    for (const FrameSet& fs : stack) {
        FrameSet f;
        f.config = fs.config;
        f.stage_offset = fs.stage_offset;
        f.frames = {fs.frame({0, 0})};
        one_cam.push_back(std::move(f));
    }
    const std::vector<FocusDecision> d = select_focus(one_cam);
    ASSERT_EQ(d.size(), 1u);
    EXPECT_EQ(d[0].chosen, 6u);
    EXPECT_FALSE(d[0].featureless);
    const FrameSet fused = apply_focus(one_cam, d);
    EXPECT_EQ(fused.frames[0].pixels, one_cam[6].frames[0].pixels);
}

TEST(SelectFocus, TieBreaksTowardsCentre) {
    const CameraFrame f = frame_of(bars(64, 64, 8));
    EXPECT_EQ(select_focus(std::vector<CameraFrame>{f, f}).chosen, 0u);
    const CameraFrame soft = frame_of(gaussian_blur(f.pixels, 1.5));
    EXPECT_EQ(select_focus(std::vector<CameraFrame>{f, soft, soft, f, soft}).chosen, 3u);
    EXPECT_EQ(select_focus(std::vector<CameraFrame>{soft, f, soft, f, soft}).chosen, 1u);
}

TEST(SelectFocus, MonotoneBlurPicksLeastBlurred) {
    const Image base = bars(80, 80, 6);
    std::vector<CameraFrame> stack;
    const std::vector<double> sigma{2.5, 1.8, 1.2, 0.7, 0.3, 0.9, 1.6};
    for (double s : sigma) stack.push_back(frame_of(gaussian_blur(base, s)));
    EXPECT_EQ(select_focus(stack).chosen, 4u);
}

TEST(SelectFocus, FeaturelessDefaultsToCentre) {
    std::vector<CameraFrame> stack(10, frame_of(Image(64, 64, 0.2f)));
    const FocusDecision d = select_focus(stack);
    EXPECT_TRUE(d.featureless);
    EXPECT_EQ(d.chosen, 4u);
    EXPECT_THROW(select_focus(std::vector<CameraFrame>{stack[0]}), DomainError);
}

TEST(SelectFocus, AffineIntensityInvariance) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Image base = bars(72, 72, 6);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<CameraFrame> stack, mapped;
        const double a = 0.2 + 3.0 * u(rng), b = u(rng) - 0.5;
        for (int i = 0; i < 10; ++i) {
            Image img = gaussian_blur(base, 0.3 + 2.0 * u(rng));
            stack.push_back(frame_of(img));
            for (float& v : img.pixels()) v = static_cast<float>(a * v + b);
            mapped.push_back(frame_of(std::move(img)));
        }
        EXPECT_EQ(select_focus(stack).chosen, select_focus(mapped).chosen);
    }
}

struct TiledRun {
    ArrayConfig config;
    Scene scene;
    ScanPlan plan;
    std::vector<FrameSet> scans;
};

TiledRun render_tiled(bool skip_one) {
    TiledRun t{small_tiled(), {}, {}, {}};
    TextureSpec tex;
    tex.feature_um = 12.0;
    t.scene = make_texture_scene({{1300.0, 1250.0}, 0.55, {}}, tex);
    t.plan = plan_tiled_scan(t.config, 0.0, true, StepConvention::PerAxis);
    for (std::size_t i = 0; i < t.plan.lateral_offsets_um.size(); ++i) {
        if (skip_one && i == 4) continue;
        const Vec2 o = t.plan.lateral_offsets_um[i];
        RenderOptions ro;
        ro.exposure_id = static_cast<int>(i);
        t.scans.push_back(render_array(t.scene, t.config, {o.x, o.y, 0.0}, 5, ro));
    }
    return t;
}

TEST(TiledComposite, ZeroOverlapPlanReproducesScene) {
    const TiledRun t = render_tiled(false);
    ASSERT_EQ(t.scans.size(), 12u);
    EXPECT_TRUE(check_scan_coverage(t.config, t.plan).complete());
    const TiledComposite tc = assemble_tiled_composite(t.scans, nominal_calibrations(t.scans));
    EXPECT_TRUE(tc.complete()) << tc.gap_pixels;
    EXPECT_GT(tc.footprint_pixels, 900'000);
    const Composite& c = tc.composite;
    const Image truth = downsample_scene(t.scene, c.origin_um, c.pixel_um, c.raster.width(), c.raster.height());
    const FovExtent ext = total_fov_extent(t.config);
    double ss = 0.0;
    std::int64_t n = 0;
    for (int y = 0; y < c.raster.height(); ++y) {
        for (int x = 0; x < c.raster.width(); ++x) {
            const Vec2 q = c.origin_um + Vec2{(x + 0.5) * c.pixel_um, (y + 0.5) * c.pixel_um};
            if (std::abs(q.x) > ext.x.in_um() / 2.0 - 3.0 || std::abs(q.y) > ext.y.in_um() / 2.0 - 3.0) continue;
            const double d = c.raster.at(x, y) - truth.at(x, y);
            ss += d * d;
            ++n;
        }
    }
    // Texture range is [0.1, 0.9].
    EXPECT_LT(std::sqrt(ss / n) / 0.8, 0.02);
}

TEST(TiledComposite, SkippedPositionIsReportedAsGap) {
    const TiledRun t = render_tiled(true);
    const TiledComposite tc = assemble_tiled_composite(t.scans, nominal_calibrations(t.scans));
    EXPECT_FALSE(tc.complete());
    EXPECT_GT(tc.gap_pixels, 4 * 263 * 195 / 2);
}

TEST(TiledComposite, SingleFrameIsPlacedAtItsAnchor) {
    ArrayConfig c = small_tiled();
    c.layout.rows = c.layout.cols = 1;
    TextureSpec tex;
    tex.feature_um = 12.0;
    const Scene s = make_texture_scene({{400.0, 400.0}, 0.55, {}}, tex);
    const std::vector<FrameSet> scans{render_array(s, c, {}, 1)};
    const TiledComposite tc = assemble_tiled_composite(scans, nominal_calibrations(scans));
    EXPECT_TRUE(tc.complete());
    EXPECT_EQ(tc.composite.raster, scans[0].frames[0].pixels);
    const Vec2 o = frame_origin_um(scans[0].frames[0], c);
    EXPECT_NEAR(tc.composite.origin_um.x, o.x, 1e-9);
    EXPECT_NEAR(tc.composite.origin_um.y, o.y, 1e-9);
    EXPECT_THROW(assemble_tiled_composite(scans, {}), DomainError);
}

TEST(Throughput, PrototypeFrameSizes) {
    const SensorSpec s = prototype_config(0.1).sensor;
    EXPECT_EQ(frame_bytes(s, 54), 708'963'840);
    EXPECT_EQ(frame_bytes(s, 54, 2), 177'240'960);
    EXPECT_EQ(frame_bytes(s, 54, 1, std::pair{3072, 3072}), 509'607'936);
    EXPECT_EQ(frame_bytes(s, 54), 54LL * 3120 * 4208);
}

TEST(Throughput, FrameRates) {
    const SensorSpec s = prototype_config(0.1).sensor;
    EXPECT_NEAR(max_frame_rate(frame_bytes(s, 54), 5e9), 7.05, 0.005);
    EXPECT_NEAR(max_frame_rate(frame_bytes(s, 54, 2), 5e9), 28.2, 0.05);
    EXPECT_NEAR(max_frame_rate(frame_bytes(s, 54, 1, std::pair{3072, 3072}), 5e9), 9.8, 0.05);
    EXPECT_DOUBLE_EQ(max_frame_rate(708'963'840, 5e9), 5e9 / 708'963'840.0);
}

TEST(Throughput, BinningScalesRateBySquare) {
    const SensorSpec s = prototype_config(0.1).sensor;
    const double base = max_frame_rate(frame_bytes(s, 54), 5e9);
    for (int b : {2, 4, 8, 16}) {
        EXPECT_NEAR(max_frame_rate(frame_bytes(s, 54, b), 5e9) / base, b * b, 1e-9 * b * b);
    }
    // Frame interval is linear in camera count.
    const double t1 = 1.0 / max_frame_rate(frame_bytes(s, 1), 5e9);
    EXPECT_NEAR(1.0 / max_frame_rate(frame_bytes(s, 54), 5e9), 54.0 * t1, 1e-12);
}

TEST(Throughput, InvalidInputs) {
    const SensorSpec s = prototype_config(0.1).sensor;
    EXPECT_THROW(frame_bytes(s, 54, 5), DomainError);
    EXPECT_THROW(frame_bytes(s, 54, 1, std::pair{5000, 100}), DomainError);
    EXPECT_THROW(frame_bytes(s, 0), DomainError);
    EXPECT_THROW(max_frame_rate(0, 5e9), DomainError);
    EXPECT_THROW(recording_capacity(100, 0.0, 1e9), DomainError);
}

TEST(Throughput, RecordingCapacity) {
    const RecordingCapacity r = recording_capacity(708'963'840, 7.0, 128e9);
    EXPECT_EQ(r.frames, 180);  // floor(128e9 / 708963840) = floor(180.54)
    EXPECT_DOUBLE_EQ(r.seconds, 180.0 / 7.0);
}

TEST(Throughput, ReportAndEfficiency) {
    const ArrayConfig c = prototype_config(0.2);
    ThroughputOptions o;
    o.binning = 2;
    const ThroughputReport r = throughput_report(c, o);
    EXPECT_EQ(r.frame_bytes, 177'240'960);
    EXPECT_NEAR(r.max_fps, 28.2, 0.05);
    EXPECT_EQ(r.buffer_frames, static_cast<std::int64_t>(128e9 / 177'240'960.0));
    o.binning = 1;
    o.efficiency = 0.5;
    const ThroughputReport half = throughput_report(c, o);
    EXPECT_NEAR(half.max_fps, 5e9 / 708'963'840.0 / 2.0, 1e-12);
    EXPECT_DOUBLE_EQ(half.effective_frame_bytes, 2.0 * 708'963'840.0);
    o.efficiency = 0.0;
    EXPECT_THROW(throughput_report(c, o), DomainError);
    EXPECT_NE(r.to_csv().find("max_fps,"), std::string::npos);
}

}  // namespace
}  // namespace mcam
