// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
//   mcam_acceptance [--only N[,N...]] [--work DIR]

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mcam/acquisition.hpp"
#include "mcam/array_model.hpp"
#include "mcam/config.hpp"
#include "mcam/depth3d.hpp"
#include "mcam/pipeline.hpp"
#include "mcam/presets.hpp"
#include "mcam/registration.hpp"
#include "mcam/render.hpp"

using namespace mcam;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string title;
    double limit_s;
    std::function<Outcome()> check;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

bool within(double value, double nominal, double rel) { return std::abs(value - nominal) <= rel * std::abs(nominal); }

fs::path g_work;

// ---------------------------------------------------------------- 1

Outcome design_values() {
    struct Row {
        const char* preset;
        double m;
        double paper_res_um;
        double paper_fov_mm;
    };
    const Row rows[] = {{"multi_view", 0.1, 20.0, 32.0}, {"continuous", 0.2, 10.0, 16.0}, {"tiled", 1.0, 2.0, 3.5}};
    Outcome o{true, ""};
    for (const Row& r : rows) {
        const ArrayConfig c = find_preset(r.preset).config;
        std::istringstream csv(design_report_csv(c));
        std::string line;
        std::getline(csv, line);
        std::map<std::string, std::pair<double, double>> axis;  // fov_mm, r_pix_um
        while (std::getline(csv, line)) {
            std::vector<std::string> f;
            std::stringstream ss(line);
            for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
            if (f.size() == 5) axis[f[0]] = {std::stod(f[3]), std::stod(f[4])};
        }
        // 2 * delta / M and the short-axis FOV pixels_y * delta / M.
        const double r_expect = 2.0 * 1.1 / r.m;
        const double fov_expect = 3120 * 1.1 / r.m / 1000.0;
        const double r_pix = axis["y"].second, fov = axis["y"].first;
        const bool ok = std::abs(r_pix - r_expect) < 1e-3 && std::abs(fov - fov_expect) < 1e-3 &&
                        within(r_pix, r.paper_res_um, 0.15) && within(fov, r.paper_fov_mm, 0.15) &&
                        axis["x"].second == r_pix;
        o.pass = o.pass && ok;
        o.detail += std::string(o.detail.empty() ? "" : "; ") + r.preset + " r_pix " + fmt("%.4g", r_pix) + " um, FOV " +
                    fmt("%.4g", fov) + " mm";
    }
    return o;
}

// ---------------------------------------------------------------- 2

Outcome regime_boundaries() {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int bad = 0, samples = 0;
    auto check_axis = [&](const AxisRegime& a, double s, double p, double m) {
        const double fov = s / m;
        // Regime from the FOV-to-pitch ratio.
        const Regime expect = fov >= 2 * p ? Regime::MultiView : fov >= p ? Regime::Continuous : Regime::Tiled;
        bool ok = a.regime == expect;
        ok = ok && ((a.overlap_fraction < 0.0) == (a.regime == Regime::Tiled));
        ok = ok && std::abs(a.overlap_fraction - (1.0 - p / fov)) < 1e-9 * std::max(1.0, p / fov);
        ok = ok && (a.regime == Regime::MultiView) == (a.views_per_point >= 2);
        ok = ok && (a.regime == Regime::Continuous) == (a.views_per_point == 1);
        ok = ok && (a.regime == Regime::Tiled) == (a.views_per_point == 0);
        // Views per point from an infinite row of cameras at k * p.
        std::int64_t lo = std::numeric_limits<std::int64_t>::max(), hi = 0;
        for (int j = 0; j < 2000; ++j) {
            const double x = p * j / 2000.0;
            const auto first = static_cast<std::int64_t>(std::ceil((x - fov / 2) / p));
            const auto last = static_cast<std::int64_t>(std::floor((x + fov / 2) / p));
            const std::int64_t n = std::max<std::int64_t>(0, last - first + 1);
            lo = std::min(lo, n);
            hi = std::max(hi, n);
        }
        const double frac = fov / p - std::floor(fov / p);
        ok = ok && (frac < 0.999 ? lo == a.views_per_point : (lo == a.views_per_point || lo == a.views_per_point + 1));
        ok = ok && hi <= a.views_per_point + 1;
        return ok;
    };
    for (int i = 0; i < 1000; ++i) {
        ArrayConfig c;
        c.sensor = {Length::um(0.8 + 5.0 * u(rng)), 500 + static_cast<int>(4000 * u(rng)),
                    500 + static_cast<int>(4000 * u(rng)), 8};
        const double px = c.sensor.width().in_um() * (1.0 + 3.0 * u(rng));
        const double py = c.sensor.height().in_um() * (1.0 + 3.0 * u(rng));
        c.layout = {3, 3, Length::um(px), Length::um(py)};
        c.lens = {Length::um(20000.0), 4.0, Length::um(0.9 * std::min(px, py))};
        c.magnification = std::exp(std::log(0.02) + (std::log(3.0) - std::log(0.02)) * u(rng));
        const RegimeReport r = classify_regime(c);
        ++samples;
        if (!check_axis(r.x, c.sensor.width().in_um(), px, c.magnification) ||
            !check_axis(r.y, c.sensor.height().in_um(), py, c.magnification)) {
            ++bad;
        }
        // Boundaries: M = s/p abuts, the next representable M leaves a gap;
        // M = s/2p is the last multi-view magnification.
        const double abut = continuous_magnification(c.sensor.height(), c.layout.pitch_y);
        c.magnification = abut;
        const AxisRegime at = classify_regime(c).y;
        c.magnification = std::nextafter(abut, 10.0);
        const AxisRegime above = classify_regime(c).y;
        c.magnification = abut / 2.0;
        const AxisRegime half = classify_regime(c).y;
        c.magnification = std::nextafter(abut / 2.0, 10.0);
        const AxisRegime above_half = classify_regime(c).y;
        if (!(at.regime == Regime::Continuous && at.overlap_fraction == 0.0 && at.views_per_point == 1 &&
              above.regime == Regime::Tiled && above.overlap_fraction < 0.0 && above.views_per_point == 0 &&
              half.regime == Regime::MultiView && half.views_per_point == 2 &&
              above_half.regime == Regime::Continuous && above_half.views_per_point == 1)) {
            ++bad;
        }
    }
    return {bad == 0, std::to_string(samples) + " random samples, " + std::to_string(bad) + " inconsistent"};
}

// ---------------------------------------------------------------- 3

Outcome resolution_pipeline() {
    Outcome o{true, ""};
    auto judge = [&](const std::string& name, double pix, const std::vector<GroupContrast>& groups, double res) {
        bool coarse_ok = true, fine_fails = true, seen_coarse = false, seen_fine = false;
        double c2 = 1.0, c1 = 0.0;
        for (const GroupContrast& g : groups) {
            if (std::abs(g.spacing_um - 2 * pix) < 1e-6) {
                seen_coarse = true;
                coarse_ok = coarse_ok && g.contrast >= kContrastThreshold;
                c2 = std::min(c2, g.contrast);
            }
            if (std::abs(g.spacing_um - pix) < 1e-6) {
                seen_fine = true;
                fine_fails = fine_fails && g.contrast < kContrastThreshold;
                c1 = std::max(c1, g.contrast);
            }
        }
        const bool ok = seen_coarse && seen_fine && coarse_ok && fine_fails && std::abs(res - 2 * pix) < 1e-6;
        o.pass = o.pass && ok;
        o.detail += std::string(o.detail.empty() ? "" : "; ") + name + " resolves " + fmt("%.3g", 2 * pix) +
                    " um (C=" + fmt("%.2f", c2) + "), fails " + fmt("%.3g", pix) + " um (C=" + fmt("%.2f", c1) + ")";
    };
    for (const char* preset : {"multi_view", "continuous"}) {
        const RunConfig c = validate_config(std::string(R"({"mode": "stitch", "seed": 7, "preset": ")") + preset + "\"}");
        const DeskStitch s = desk_stitch(c);
        judge(std::string("M=") + fmt("%.1f", c.array.magnification), c.array.object_pixel().in_um(), s.contrast,
              s.resolution_um);
    }
    const RunConfig t = validate_config(R"({"mode": "tiled", "seed": 7, "preset": "tiled"})");
    const DeskTiled d = desk_tiled(t);
    judge("M=1", t.array.object_pixel().in_um(), d.contrast, d.resolution_um);
    return o;
}

// ---------------------------------------------------------------- 4

Outcome stitching_accuracy() {
    Outcome o{true, ""};
    std::mt19937_64 rng(44);
    std::uniform_real_distribution<double> u(-25.0, 25.0);
    for (double m : {0.1, 0.2}) {
        ArrayConfig c = subarray(prototype_config(m), 2, 2);
        for (int i = 0; i < 4; ++i) c.axis_offsets_um.push_back(i == 0 ? Vec2{} : Vec2{u(rng), u(rng)});
        const double pix = c.object_pixel().in_um();
        const int w = 160, h = 128;
        TextureSpec tex;
        tex.feature_um = 6 * pix;
        tex.seed = 9;
        const Scene scene = make_texture_scene({{2.4 * w * pix, 2.4 * w * pix}, pix / 4, {}}, tex);
        RenderOptions ro;
        ro.camera_windows = mosaic_windows(c, {}, w, h, 0.4);
        const FrameSet frames = render_array(scene, c, {}, 3, ro);
        const StitchCalibration cal = calibrate(frames, c);

        double sq = 0.0;
        for (CameraIndex cam : c.cameras()) {
            const Vec2 e = cal.anchor(cam) - (c.true_camera_axis(cam) - c.true_camera_axis({0, 0})) / pix;
            sq += dot(e, e);
        }
        const double anchor_rms = std::sqrt(sq / 4.0);

        const Composite comp = composite(frames, cal);
        const Image truth =
            downsample_scene(scene, comp.origin_um + (c.true_camera_axis({0, 0}) - c.camera_axis({0, 0})), comp.pixel_um,
                             comp.raster.width(), comp.raster.height());
        double se = 0.0, lo = 1e9, hi = -1e9;
        long n = 0;
        for (int y = 2; y < comp.raster.height() - 2; ++y) {
            for (int x = 2; x < comp.raster.width() - 2; ++x) {
                if (comp.weight_sum.at(x, y) <= 0.0f) continue;
                const double t = truth.at(x, y);
                se += std::pow(comp.raster.at(x, y) - t, 2);
                lo = std::min(lo, t);
                hi = std::max(hi, t);
                ++n;
            }
        }
        const double rel = std::sqrt(se / static_cast<double>(n)) / (hi - lo);

        const Image total = blend_weight_total(place_frames(frames, cal), cal);
        double pu = 0.0;
        for (std::size_t i = 0; i < total.size(); ++i) {
            if (comp.weight_sum.pixels()[i] > 0.0f) pu = std::max(pu, std::abs(total.pixels()[i] - 1.0));
            else pu = std::max(pu, std::abs(static_cast<double>(total.pixels()[i])));
        }
        const bool ok = anchor_rms < 0.2 && rel < 0.02 && pu < 1e-6 && n > 10000;
        o.pass = o.pass && ok;
        o.detail += std::string(o.detail.empty() ? "" : "; ") + "M=" + fmt("%.1f", m) + " anchors " +
                    fmt("%.3f", anchor_rms) + " px RMS, composite " + fmt("%.2f", 100 * rel) + "% RMS, weight sum err " +
                    fmt("%.1e", pu);
    }
    return o;
}

// ---------------------------------------------------------------- 5

Outcome depth_sweep() {
    const ArrayConfig c = find_preset("multi_view").config;
    const CameraIndex a{0, 0}, b{0, 1};
    const double delta = c.sensor.pixel_pitch.in_um();
    const double pitch = c.layout.pitch_x.in_um();
    const double od = c.object_distance().in_um(), id = c.image_distance().in_um();

    // Height change per pixel of disparity, closed form and by finite difference.
    const double per_px = od * od * delta / (pitch * id);
    const double fd = triangulate(Length::um(pitch * id / od), Length::um(0.0), Length::um(pitch), Length::um(id)).in_um() -
                      triangulate(Length::um(pitch * id / od + delta), Length::um(0.0), Length::um(pitch), Length::um(id))
                          .in_um();

    const Vec2 mid = 0.5 * (c.camera_axis(a) + c.camera_axis(b));
    TextureSpec tex;
    tex.feature_um = 100.0;
    tex.seed = 5;
    const double half = 0.75 * 200 * c.object_pixel().in_um();
    const Scene scene = make_texture_scene({{2 * half, 2 * half}, c.object_pixel().in_um() / 4, mid}, tex);
    DepthSweepOptions opt;
    opt.seed = 11;
    const DepthExperimentReport rep = run_depth_sweep(c, -3000.0, 3000.0, 100.0, scene, opt);
    const DepthExperimentReport exact = run_analytic_depth_sweep(c, -3000.0, 3000.0, 100.0, a, b);

    // Matcher precision: measured disparity sums against the forward model.
    RenderOptions ro;
    for (CameraIndex cam : {a, b}) {
        const Vec2 px = object_to_pixel(c, cam, mid);
        ro.camera_windows[cam] = {static_cast<int>(std::lround(px.x - 100)), static_cast<int>(std::lround(px.y - 100)),
                                  200, 200};
    }
    Scene s = scene;
    const StitchCalibration cal = calibrate_pair(render_camera(s, c, a, {}, 1, ro), render_camera(s, c, b, {}, 1, ro), c);
    double se = 0.0;
    long n = 0, inliers = 0, outliers = 0;
    for (double z : {-3000.0, -1500.0, 0.0, 1500.0, 3000.0}) {
        set_uniform_height(s, z);
        const MatchSet set = match_features(render_camera(s, c, a, {}, 1, ro), render_camera(s, c, b, {}, 1, ro), cal, c);
        const Disparities d = analytic_disparities(c, a, b, mid, z);
        const double expect = (d.d1 + d.d2).in_um() / delta;
        for (const Match& m : set.matches) {
            const double e = m.disparity_sum_px() - expect;
            ++n;
            // False matches are a separate failure mode; the per-plane median absorbs them.
            if (std::abs(e) > 1.0) {
                ++outliers;
                continue;
            }
            se += e * e;
            ++inliers;
        }
    }
    const double precision = inliers ? std::sqrt(se / static_cast<double>(inliers)) : INFINITY;
    const double outlier_fraction = n ? static_cast<double>(outliers) / static_cast<double>(n) : 1.0;

    const bool ok = rep.planes.size() == 61 && rep.failed_planes == 0 && rep.rmse_um <= 50.0 && precision <= 0.2 &&
                    outlier_fraction < 0.05 && n >= 100 && exact.rmse_um < 1e-9 && std::abs(per_px - 220.0) < 10.0 &&
                    within(fd, per_px, 0.01);
    return {ok, "61 planes RMSE " + fmt("%.2f", rep.rmse_um) + " um, matcher " + fmt("%.3f", precision) +
                    " px RMS over " + std::to_string(inliers) + " matches (" + std::to_string(outliers) +
                    " false matches > 1 px), " + fmt("%.1f", per_px) + " um/px, analytic RMSE " +
                    fmt("%.1e", exact.rmse_um) + " um"};
}

// ---------------------------------------------------------------- 6

Outcome tiled_coverage() {
    const ArrayConfig c = find_preset("tiled").config;
    const double p = c.layout.pitch_x.in_um();
    const FovPair fov = camera_object_fov(c);
    // Positions per axis: the pitch divided into steps, rounded up.
    auto needed = [&](double, double step) { return static_cast<int>(std::ceil(p / step - 1e-12)); };
    const double short_step = std::min(fov.x.in_um(), fov.y.in_um()) * 0.9;
    const int uniform_expect = needed(fov.x.in_um(), short_step) * needed(fov.y.in_um(), short_step);
    const int per_axis_expect = needed(fov.x.in_um(), fov.x.in_um()) * needed(fov.y.in_um(), fov.y.in_um());

    const ScanPlan uniform = plan_tiled_scan(c, 0.1, true, StepConvention::UniformShortAxis);
    const ScanPlan per_axis = plan_tiled_scan(c, 0.0, true, StepConvention::PerAxis);
    const CoverageReport cu = check_scan_coverage(c, uniform);
    const CoverageReport cp = check_scan_coverage(c, per_axis);
    const Vec2 tu = uniform.lateral_extent_um(), tp = per_axis.lateral_extent_um();
    const double travel = std::max({tu.x, tu.y, tp.x, tp.y});
    const bool ok = uniform.lateral_offsets_um.size() == 25 && uniform_expect == 25 &&
                    per_axis.lateral_offsets_um.size() == 12 && per_axis_expect == 12 && cu.complete() &&
                    cp.complete() && travel <= 13500.0;
    return {ok, std::to_string(uniform.lateral_offsets_um.size()) + " positions (uniform, 10%), " +
                    std::to_string(per_axis.lateral_offsets_um.size()) + " (per-axis, 0%), uncovered " +
                    std::to_string(cu.uncovered) + "/" + std::to_string(cp.uncovered) + " of " +
                    fmt("%.2g", static_cast<double>(cu.samples)) + " samples, max travel " + fmt("%.1f", travel) + " um"};
}

// ---------------------------------------------------------------- 7

Outcome focus_selection() {
    const ArrayConfig c = subarray(find_preset("tiled").config, 1, 1);
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> z;
    for (int i = 0; i < 10; ++i) z.push_back(10.0 * i);
    const int w = 96;
    const Vec2 center = sensor_center_px(c.sensor);
    RenderOptions ro;
    ro.window = SensorWindow{static_cast<int>(center.x) - w / 2, static_cast<int>(center.y) - w / 2, w, w};
    ro.noise_std = 0.005;
    int correct = 0, affine_ok = 0;
    const int trials = 100;
    for (int t = 0; t < trials; ++t) {
        const int truth = static_cast<int>(u(rng) * 10) % 10;
        TextureSpec tex;
        tex.feature_um = 4.0 + 4.0 * u(rng);
        tex.seed = 1000 + static_cast<std::uint64_t>(t);
        const Vec2 shift{200.0 * (u(rng) - 0.5), 200.0 * (u(rng) - 0.5)};
        Scene s = make_texture_scene({{140.0, 140.0}, 0.25, c.camera_axis({0, 0}) + shift}, tex);
        set_uniform_height(s, z[truth]);
        const std::vector<FrameSet> stack = render_focal_stack(s, c, z, shift, 50 + t, ro);
        std::vector<CameraFrame> frames, mapped;
        const double ga = 0.2 + 3.0 * u(rng), gb = u(rng) - 0.5;
        for (const FrameSet& f : stack) {
            frames.push_back(f.frames.at(0));
            CameraFrame m = f.frames.at(0);
            for (float& v : m.pixels.pixels()) v = static_cast<float>(ga * v + gb);
            mapped.push_back(std::move(m));
        }
        const FocusDecision d = select_focus(frames);
        if (d.chosen == static_cast<std::size_t>(truth)) ++correct;
        if (select_focus(mapped).chosen == d.chosen) ++affine_ok;
    }
    return {correct >= 99 && affine_ok == trials, std::to_string(correct) + "/100 true slice, " +
                                                      std::to_string(affine_ok) + "/100 unchanged under a*I+b"};
}

// ---------------------------------------------------------------- 8

Outcome throughput() {
    const ArrayConfig c = find_preset("multi_view").config;
    const std::int64_t full = frame_bytes(c.sensor, 54);
    const std::int64_t expect = 54LL * 3120 * 4208;  // one byte per pixel
    const double fps = max_frame_rate(full, 5e9);
    const double fps2 = max_frame_rate(frame_bytes(c.sensor, 54, 2), 5e9);
    const double fps_crop = max_frame_rate(frame_bytes(c.sensor, 54, 1, std::pair{3072, 3072}), 5e9);
    const bool ok = full == 708963840 && full == expect && std::round(fps * 100) / 100 == 7.05 &&
                    std::abs(fps - 5e9 / 708963840.0) < 1e-12 && std::round(fps2 * 10) / 10 == 28.2 &&
                    std::abs(fps2 - 5e9 / (54.0 * 1560 * 2104)) < 1e-12 && std::round(fps_crop * 10) / 10 == 9.8 &&
                    std::abs(fps_crop - 5e9 / (54.0 * 3072 * 3072)) < 1e-12;
    return {ok, std::to_string(full) + " B, " + fmt("%.4f", fps) + " fps, " + fmt("%.3f", fps2) + " fps binned, " +
                    fmt("%.3f", fps_crop) + " fps cropped"};
}

// ---------------------------------------------------------------- 9

std::map<std::string, std::string> tree(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        std::ifstream in(e.path(), std::ios::binary);
        out[fs::relative(e.path(), root).generic_string()] =
            std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    return out;
}

Outcome determinism() {
    const std::vector<std::string> configs = {
        R"({"mode": "pipeline", "preset": "multi_view", "seed": 21, "depth": {"step_um": 500}})",
        R"({"mode": "pipeline", "preset": "tiled", "seed": 21, "tiled": {"axial_um": [-10, 0, 10]}})"};
    Outcome o{true, ""};
    for (std::size_t k = 0; k < configs.size(); ++k) {
        std::vector<std::map<std::string, std::string>> runs;
        for (int threads : {1, 8}) {
            const fs::path dir = g_work / ("det" + std::to_string(k) + "_t" + std::to_string(threads));
            fs::remove_all(dir);
            ConfigOverrides ov;
            ov.output_dir = dir.string();
            ov.threads = threads;
            run(validate_config(configs[k], ov));
            runs.push_back(tree(dir));
            fs::remove_all(dir);
        }
        const bool same = runs[0] == runs[1] && runs[0].count("manifest.json") == 1;
        o.pass = o.pass && same;
        o.detail += std::string(o.detail.empty() ? "" : "; ") + (k == 0 ? "multi_view" : "tiled") + " pipeline " +
                    std::to_string(runs[0].size()) + " files " + (same ? "identical" : "DIFFER");
    }
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    g_work = fs::temp_directory_path() / ("mcam_acceptance_" + std::to_string(::getpid()));
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--only" && i + 1 < argc) {
            std::stringstream ss(argv[++i]);
            for (std::string tok; std::getline(ss, tok, ',');) only.insert(std::stoi(tok));
        } else if (arg == "--work" && i + 1 < argc) {
            g_work = argv[++i];
        } else {
            std::fprintf(stderr, "usage: %s [--only N[,N...]] [--work DIR]\n", argv[0]);
            return 2;
        }
    }
    fs::create_directories(g_work);

    const std::vector<Criterion> criteria = {
        {1, "design values per preset", 1.0, design_values},
        {2, "regime boundaries", 5.0, regime_boundaries},
        {3, "resolution pipeline", 120.0, resolution_pipeline},
        {4, "stitching accuracy", 60.0, stitching_accuracy},
        {5, "depth sweep", 180.0, depth_sweep},
        {6, "tiled coverage", 10.0, tiled_coverage},
        {7, "focus selection", 60.0, focus_selection},
        {8, "throughput arithmetic", 1.0, throughput},
        {9, "determinism across thread counts", 120.0, determinism},
    };
    int failed = 0;
    for (const Criterion& c : criteria) {
        if (!only.empty() && !only.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.check();
        } catch (const std::exception& ex) {
            o = {false, std::string("exception: ") + ex.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs < c.limit_s;
        const bool pass = o.pass && in_time;
        if (!pass) ++failed;
        std::printf("C%d %s  %s: %s [%.2f s, limit %.0f s%s]\n", c.id, pass ? "PASS" : "FAIL", c.title.c_str(),
                    o.detail.c_str(), secs, c.limit_s, in_time ? "" : ", over time");
        std::fflush(stdout);
    }
    std::error_code ec;
    fs::remove_all(g_work, ec);
    return failed == 0 ? 0 : 1;
}
