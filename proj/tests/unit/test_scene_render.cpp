#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "mcam/parallel.hpp"
#include "mcam/presets.hpp"
#include "mcam/render.hpp"
#include "mcam/scene.hpp"

namespace mcam {
namespace {

using namespace mcam::literals;

ArrayConfig single_camera(double m) {
    ArrayConfig c = prototype_config(m);
    c.layout.rows = c.layout.cols = 1;
    return c;
}

// Window of w x h native pixels centred on the pixel that sees object point p
// (focal plane, ideal geometry).
SensorWindow window_around(const ArrayConfig& c, CameraIndex cam, Vec2 p, int w, int h) {
    const Vec2 center = sensor_center_px(c.sensor);
    const Vec2 px = center + (p - c.camera_axis(cam)) / c.object_pixel().in_um();
    return {static_cast<int>(std::floor(px.x)) - w / 2, static_cast<int>(std::floor(px.y)) - h / 2, w, h};
}

Vec2 centroid(const Image& img) {
    double s = 0.0, sx = 0.0, sy = 0.0;
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const double v = img.at(x, y);
            s += v;
            sx += v * (x + 0.5);
            sy += v * (y + 0.5);
        }
    }
    return {sx / s, sy / s};
}

double michelson(const std::vector<double>& profile) {
    const auto [lo, hi] = std::minmax_element(profile.begin(), profile.end());
    return (*hi - *lo) / (*hi + *lo);
}

TEST(ResolutionTarget, SinglePairIsTwoTexelBars) {
    ResolutionTargetSpec spec;
    spec.spacings_um = {4.0};
    spec.bars_per_group = 1;
    const ResolutionTarget t = make_resolution_target(spec, {{8.0, 8.0}, 1.0, {4.0, 4.0}}, {{2.0, 2.0}});
    ASSERT_EQ(t.scene.intensity.width(), 8);
    ASSERT_EQ(t.layout.groups.size(), 1u);
    const float expected_row[8] = {1, 1, 0, 0, 1, 1, 1, 1};
    for (int j = 2; j < 6; ++j) {
        for (int i = 0; i < 8; ++i) EXPECT_EQ(t.scene.intensity.at(i, j), expected_row[i]) << i << "," << j;
    }
    for (int i = 0; i < 8; ++i) {
        EXPECT_EQ(t.scene.intensity.at(i, 0), 1.0f);
        EXPECT_EQ(t.scene.intensity.at(i, 7), 1.0f);
    }
    EXPECT_TRUE(t.scene.flat());
    EXPECT_EQ(t.scene.height_um.fill(), 0.0f);
}

TEST(ResolutionTarget, Errors) {
    ResolutionTargetSpec spec;
    spec.spacings_um = {10.0, 20.0};
    EXPECT_THROW(make_resolution_target(spec, {{1000.0, 1000.0}, 1.0, {}}), DomainError);
    spec.spacings_um = {3.0};
    EXPECT_THROW(make_resolution_target(spec, {{1000.0, 1000.0}, 2.0, {}}), DomainError);
    spec.spacings_um = {100.0};
    spec.bars_per_group = 20;
    EXPECT_THROW(make_resolution_target(spec, {{1000.0, 1000.0}, 1.0, {}}), DomainError);
}

TEST(ResolutionTarget, GroundTruthKeepsFullContrast) {
    ResolutionTargetSpec spec;
    spec.spacings_um = {16.0, 4.0};
    const ResolutionTarget t = make_resolution_target(spec, {{200.0, 200.0}, 1.0, {}});
    for (const TargetGroup& g : t.layout.groups) {
        std::vector<double> profile;
        const Vec2 tmin = t.scene.to_texel(g.min_um);
        const auto j = static_cast<std::int64_t>(t.scene.to_texel((g.min_um + g.max_um) / 2.0).y);
        for (std::int64_t i = static_cast<std::int64_t>(std::ceil(tmin.x));
             i < static_cast<std::int64_t>(t.scene.to_texel(g.max_um).x); ++i) {
            profile.push_back(t.scene.intensity.at(i, j));
        }
        EXPECT_DOUBLE_EQ(michelson(profile), 1.0) << g.spacing_um;
    }
}

TEST(Render, UniformSceneGivesUniformFrame) {
    for (double m : {0.1, 0.2, 1.0}) {
        const ArrayConfig c = single_camera(m);
        const double pitch = c.object_pixel().in_um() / 4.0;
        const Scene s = make_blank_scene({{400.0, 400.0}, pitch, {}}, 0.37f);
        RenderOptions o;
        o.window = window_around(c, {0, 0}, {}, 16, 12);
        const CameraFrame f = render_camera(s, c, {0, 0}, {}, 1, o);
        ASSERT_EQ(f.pixels.width(), 16);
        ASSERT_EQ(f.pixels.height(), 12);
        for (float v : f.pixels.pixels()) EXPECT_NEAR(v, 0.37f, 1e-6);
    }
}

TEST(Render, AliasingGuard) {
    const ArrayConfig c = single_camera(0.1);  // back-projected pixel 11 µm
    const Scene coarse = make_blank_scene({{400.0, 400.0}, 6.0, {}}, 0.5f);
    EXPECT_THROW(render_camera(coarse, c, {0, 0}, {}, 1), DomainError);
}

TEST(Render, OutsideSceneIsZero) {
    const ArrayConfig c = single_camera(0.2);
    const Scene s = make_blank_scene({{100.0, 100.0}, 1.0, {5000.0, 0.0}}, 1.0f);
    RenderOptions o;
    o.window = window_around(c, {0, 0}, {}, 8, 8);
    const CameraFrame f = render_camera(s, c, {0, 0}, {}, 1, o);
    for (float v : f.pixels.pixels()) EXPECT_EQ(v, 0.0f);
}

// Bars at 2 r_pix against the analytic box average of the square wave over
// each pixel footprint.
TEST(Render, BarGroupMatchesBoxAverageOracle) {
    const ArrayConfig c = single_camera(0.1);
    const double pix = c.object_pixel().in_um();  // 11 µm
    const double spacing = 2.0 * pixel_limited_resolution(c.sensor.pixel_pitch, c.magnification).in_um();
    ResolutionTargetSpec spec;
    spec.spacings_um = {spacing};
    spec.bars_per_group = 6;
    // 300 texels of 2.75 µm put the scene origin at -412.5 µm; the group
    // starts on a texel edge but half a pixel off the 11 µm pixel grid.
    const Vec2 gmin{-137.5, -137.5};
    const ResolutionTarget t = make_resolution_target(spec, {{825.0, 825.0}, 2.75, {}}, {gmin});
    RenderOptions o;
    o.window = window_around(c, {0, 0}, {}, 40, 40);
    const CameraFrame f = render_camera(t.scene, c, {0, 0}, {}, 1, o);
    const Vec2 origin = frame_origin_um(f, c);

    // Dark-bar length inside [a, b) for bars [g + k s, g + k s + s/2), k in [0, n).
    const auto dark_length = [&](double a, double b) {
        double len = 0.0;
        for (int k = 0; k < spec.bars_per_group; ++k) {
            const double lo = gmin.x + k * spacing;
            len += std::max(0.0, std::min(b, lo + spacing / 2.0) - std::max(a, lo));
        }
        return len;
    };
    const int y = 20;
    std::vector<double> profile;
    for (int x = 0; x < 40; ++x) {
        const double a = origin.x + x * pix;
        const double expected = 1.0 - dark_length(a, a + pix) / pix;
        EXPECT_NEAR(f.pixels.at(x, y), expected, 1e-5) << x;
        if (a >= gmin.x && a + pix <= gmin.x + spacing * spec.bars_per_group) profile.push_back(f.pixels.at(x, y));
    }
    ASSERT_GE(profile.size(), 8u);
    EXPECT_GE(michelson(profile), 0.8);
}

// Image position of a point from the intersection of the chief ray (object
// point through lens centre) with the sensor plane, then flipped upright.
double ray_trace_image_x_px(const ArrayConfig& c, double axis_x, double point_x, double h) {
    const double od = c.object_distance().in_um();
    const double id = c.image_distance().in_um();
    // Line through (point_x, h) and (axis_x, od); sensor plane at z = od + id.
    const double t = (od + id - h) / (od - h);
    const double sensor_x = point_x + t * (axis_x - point_x);
    const double upright = -(sensor_x - axis_x);
    return sensor_center_px(c.sensor).x + upright / c.sensor.pixel_pitch.in_um();
}

TEST(Render, ParallaxMatchesRayTrace) {
    const ArrayConfig c = single_camera(0.1);
    const Vec2 point{6750.0, 0.0};  // camera axis 6.75 mm to the left
    RenderOptions o;
    o.window = window_around(c, {0, 0}, point, 48, 48);
    double measured[2];
    double predicted[2];
    const double heights[2] = {0.0, 1000.0};
    for (int k = 0; k < 2; ++k) {
        Scene s = make_blank_scene({{1200.0, 1200.0}, 2.0, point}, 0.0f);
        add_gaussian_spot(s, point, 30.0, 1.0f);
        set_uniform_height(s, heights[k]);
        const CameraFrame f = render_camera(s, c, {0, 0}, {}, 1, o);
        measured[k] = centroid(f.pixels).x + o.window->x0;
        predicted[k] = ray_trace_image_x_px(c, 0.0, point.x, heights[k]);
    }
    EXPECT_NEAR(measured[0], predicted[0], 0.01);
    EXPECT_NEAR(measured[1], predicted[1], 0.01);
    const double parallax = measured[1] - measured[0];
    EXPECT_NEAR(parallax, predicted[1] - predicted[0], 0.01);
    EXPECT_NEAR(std::abs(parallax), 2.235, 0.01);
}

TEST(Render, AdjacentCamerasDifferByPureTranslation) {
    ArrayConfig c = prototype_config(0.1);
    c.layout.rows = 1;
    c.layout.cols = 2;
    const double expected = c.layout.pitch_x.in_um() * c.image_distance().in_um() /
                            c.object_distance().in_um() / c.sensor.pixel_pitch.in_um();
    Scene s = make_blank_scene({{3000.0, 3000.0}, 2.5, {}}, 0.0f);
    const Vec2 spots[3] = {{-700.0, 300.0}, {0.0, 0.0}, {650.0, -420.0}};
    for (Vec2 p : spots) add_gaussian_spot(s, p, 25.0, 1.0f);
    for (Vec2 p : spots) {
        RenderOptions o;
        o.camera_windows[{0, 0}] = window_around(c, {0, 0}, p, 40, 40);
        o.camera_windows[{0, 1}] = window_around(c, {0, 1}, p, 40, 40);
        const CameraFrame a = render_camera(s, c, {0, 0}, {}, 1, o);
        const CameraFrame b = render_camera(s, c, {0, 1}, {}, 1, o);
        const Vec2 ca = centroid(a.pixels) + Vec2{1.0 * a.window.x0, 1.0 * a.window.y0};
        const Vec2 cb = centroid(b.pixels) + Vec2{1.0 * b.window.x0, 1.0 * b.window.y0};
        EXPECT_NEAR(ca.x - cb.x, expected, 0.05);
        EXPECT_NEAR(ca.y - cb.y, 0.0, 0.05);
    }
}

TEST(Render, MultiViewCentralPointSeenByAllFour) {
    ArrayConfig c = prototype_config(0.1);
    c.layout.rows = c.layout.cols = 2;
    Scene s = make_blank_scene({{2000.0, 2000.0}, 2.5, {}}, 0.0f);
    add_gaussian_spot(s, {}, 30.0, 1.0f);
    ASSERT_EQ(cameras_covering(c, {}), 4);
    RenderOptions o;
    for (CameraIndex cam : c.cameras()) o.camera_windows[cam] = window_around(c, cam, {}, 24, 24);
    const FrameSet fs = render_array(s, c, {}, 3, o);
    ASSERT_EQ(fs.frames.size(), 4u);
    for (const CameraFrame& f : fs.frames) {
        EXPECT_GT(f.pixels.at(12, 12), 0.5f) << to_string(f.camera);
        EXPECT_LT(f.pixels.at(0, 0), 0.01f);
    }
}

TEST(Render, SingleCameraArrayMatchesRenderCamera) {
    const ArrayConfig c = single_camera(0.2);
    const Scene s = make_texture_scene({{600.0, 600.0}, 1.25, {}}, {});
    RenderOptions o;
    o.window = window_around(c, {0, 0}, {}, 32, 32);
    o.noise_std = 0.01;
    const FrameSet fs = render_array(s, c, {}, 9, o);
    ASSERT_EQ(fs.frames.size(), 1u);
    EXPECT_EQ(fs.frames[0].pixels, render_camera(s, c, {0, 0}, {}, 9, o).pixels);
}

TEST(Render, DeterministicAcrossSeedsAndThreads) {
    ArrayConfig c = prototype_config(0.2);
    c.layout.rows = c.layout.cols = 2;
    Scene s = make_texture_scene({{1500.0, 1500.0}, 1.25, {}}, {});
    set_height_field(s, [](Vec2 p) { return 0.05 * p.x; });
    RenderOptions o;
    for (CameraIndex cam : c.cameras()) o.camera_windows[cam] = window_around(c, cam, {}, 24, 20);
    o.noise_std = 0.02;
    set_thread_count(1);
    const FrameSet a = render_array(s, c, {0.0, 0.0, 10.0}, 42, o);
    set_thread_count(8);
    const FrameSet b = render_array(s, c, {0.0, 0.0, 10.0}, 42, o);
    const FrameSet d = render_array(s, c, {0.0, 0.0, 10.0}, 43, o);
    set_thread_count(0);
    for (std::size_t i = 0; i < a.frames.size(); ++i) {
        EXPECT_EQ(a.frames[i].pixels, b.frames[i].pixels);
        EXPECT_FALSE(a.frames[i].pixels == d.frames[i].pixels);
    }
}

TEST(Render, DefocusSigmaSymmetricAndMinimalAtFocus) {
    const ArrayConfig c = prototype_config(0.1);
    EXPECT_EQ(defocus_sigma_px(c, 0.0), 0.0);
    for (double d = 10.0; d < 3000.0; d *= 1.7) {
        EXPECT_EQ(defocus_sigma_px(c, d), defocus_sigma_px(c, -d));
        EXPECT_LT(defocus_sigma_px(c, d), defocus_sigma_px(c, d * 1.7));
    }
    // CoC = (f/N) M |dh| / O_d on the sensor, sigma = CoC / 2 in pixels.
    EXPECT_NEAR(defocus_sigma_px(c, 1000.0), 6262.5 * 0.1 * 1000.0 / 275550.0 / 2.0 / 1.1, 1e-12);
}

TEST(Render, DefocusRasterSymmetry) {
    // The in-focus plane moves with z, so magnification changes by 2*dz/O_d
    // between +dz and -dz. Centre the window on the axis to keep that below
    // the comparison tolerance, and compare the blur only.
    const ArrayConfig c = single_camera(0.2);
    const Scene s = make_texture_scene({{800.0, 800.0}, 1.25, {}}, {20.0, 2, 5});
    RenderOptions o;
    o.window = window_around(c, {0, 0}, {}, 24, 24);
    const double dz = 150.0;
    const Image plus = render_camera(s, c, {0, 0}, {0, 0, dz}, 1, o).pixels;
    const Image minus = render_camera(s, c, {0, 0}, {0, 0, -dz}, 1, o).pixels;
    const Image focus = render_camera(s, c, {0, 0}, {}, 1, o).pixels;
    double diff_pm = 0.0, diff_focus = 0.0;
    for (std::size_t i = 0; i < plus.size(); ++i) {
        diff_pm = std::max(diff_pm, std::abs(double(plus.pixels()[i]) - minus.pixels()[i]));
        diff_focus = std::max(diff_focus, std::abs(double(plus.pixels()[i]) - focus.pixels()[i]));
    }
    EXPECT_LT(diff_pm, 0.1 * diff_focus);
}

TEST(Render, FocalStackBlurMinimalAtSceneHeight) {
    const ArrayConfig c = single_camera(0.2);
    Scene s = make_texture_scene({{800.0, 800.0}, 1.25, {}}, {20.0, 2, 5});
    set_uniform_height(s, 400.0);
    RenderOptions o;
    o.window = window_around(c, {0, 0}, {}, 32, 32);
    std::vector<double> z;
    for (int k = 0; k < 9; ++k) z.push_back(k * 100.0);
    const std::vector<FrameSet> stack = render_focal_stack(s, c, z, {}, 1, o);
    ASSERT_EQ(stack.size(), z.size());
    std::vector<double> energy;
    for (std::size_t k = 0; k < stack.size(); ++k) {
        EXPECT_EQ(stack[k].frames[0].exposure_id, static_cast<int>(k));
        EXPECT_EQ(stack[k].frames[0].z_offset_um(), z[k]);
        const Image& img = stack[k].frames[0].pixels;
        double e = 0.0;
        for (int y = 0; y < img.height(); ++y) {
            for (int x = 1; x < img.width(); ++x) e += std::pow(img.at(x, y) - img.at(x - 1, y), 2);
        }
        energy.push_back(e);
    }
    EXPECT_EQ(std::max_element(energy.begin(), energy.end()) - energy.begin(), 4);
    for (int k = 0; k < 4; ++k) {
        EXPECT_LT(energy[static_cast<std::size_t>(k)], energy[static_cast<std::size_t>(k + 1)]);
        EXPECT_GT(energy[static_cast<std::size_t>(k + 4)], energy[static_cast<std::size_t>(k + 5)]);
    }
    EXPECT_THROW(render_focal_stack(s, c, {std::nan("")}, {}, 1, o), DomainError);
}

TEST(Binning, DimensionsAndMean) {
    CameraFrame f;
    f.pixels = Image(4208, 3120);
    std::uint32_t state = 1;
    for (float& v : f.pixels.pixels()) {
        state = state * 1664525u + 1013904223u;
        v = static_cast<float>(state >> 8) / 16777216.0f;
    }
    const CameraFrame b = apply_binning(f, 2);
    EXPECT_EQ(b.pixels.width(), 2104);
    EXPECT_EQ(b.pixels.height(), 1560);
    EXPECT_EQ(b.binning, 2);
    EXPECT_NEAR(b.pixels.mean(), f.pixels.mean(), 1e-6);
    EXPECT_EQ(apply_binning(f, 1).pixels, f.pixels);
    EXPECT_THROW(apply_binning(f, 3), DomainError);  // 4208 is not divisible by 3
    EXPECT_THROW(apply_binning(f, 0), DomainError);

    CameraFrame u;
    u.pixels = Image(8, 6, 0.25f);
    const CameraFrame ub = apply_binning(u, 2);
    for (float v : ub.pixels.pixels()) EXPECT_EQ(v, 0.25f);
}

TEST(Scene, AreaAverageExactCoverage) {
    Scene s = make_blank_scene({{4.0, 4.0}, 1.0, {2.0, 2.0}}, 0.0f);
    s.intensity.set(1, 1, 1.0f);
    EXPECT_DOUBLE_EQ(area_average(s, {1.0, 1.0}, {2.0, 2.0}), 1.0);
    EXPECT_DOUBLE_EQ(area_average(s, {0.5, 0.5}, {1.5, 1.5}), 0.25);
    EXPECT_DOUBLE_EQ(area_average(s, {-2.0, 0.0}, {2.0, 2.0}), 1.0 / 8.0);
}

TEST(Scene, TextureAgreesAcrossScenes) {
    const TextureSpec tex{30.0, 3, 17};
    const Scene a = make_texture_scene({{200.0, 200.0}, 1.0, {}}, tex);
    const Scene b = make_texture_scene({{100.0, 100.0}, 1.0, {50.0, 50.0}}, tex);
    for (int k = 0; k < 50; ++k) {
        const std::int64_t i = k % 10, j = k / 10;
        const Vec2 p = b.texel_center(i, j);
        const Vec2 ta = a.to_texel(p);
        EXPECT_EQ(b.intensity.at(i, j), a.intensity.at(static_cast<std::int64_t>(ta.x), static_cast<std::int64_t>(ta.y)));
    }
}

TEST(TiledRaster, SparseStorage) {
    TiledRaster r(100000, 100000, 0.5f, 0.0f);
    EXPECT_TRUE(r.uniform());
    EXPECT_EQ(r.at(99999, 5), 0.5f);
    EXPECT_EQ(r.at(-1, 5), 0.0f);
    r.set(70000, 80000, 2.0f);
    EXPECT_EQ(r.allocated_tiles(), 1u);
    EXPECT_EQ(r.at(70000, 80000), 2.0f);
    EXPECT_EQ(r.at(70001, 80000), 0.5f);
    const auto [lo, hi] = r.min_max();
    EXPECT_LE(lo, 0.5f);
    EXPECT_GE(hi, 2.0f);
    const TiledRaster copy = r;
    EXPECT_EQ(copy.at(70000, 80000), 2.0f);
}

}  // namespace
}  // namespace mcam
