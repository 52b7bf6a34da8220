#include "mcam/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "mcam/io.hpp"
#include "mcam/parallel.hpp"
#include "mcam/presets.hpp"
#include "mcam/rng.hpp"

namespace mcam {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Stream ids for seeds derived from the run seed.
constexpr std::uint64_t kTextureStream = 1;
constexpr std::uint64_t kNoiseStream = 2;

std::uint64_t run_seed(const RunConfig& c) {
    if (!c.seed) throw ConfigError("seed: required for mode " + to_string(c.mode));
    return *c.seed;
}

std::string num(double v) {
    if (!std::isfinite(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

json vec_json(Vec2 v) { return json::array({v.x, v.y}); }

Vec2 snap_to_grid(Vec2 p, Vec2 corner, double pix) {
    return corner + Vec2{std::round((p.x - corner.x) / pix) * pix, std::round((p.y - corner.y) / pix) * pix};
}

// Object rectangle seen by a sensor window at stage lateral offset `stage`.
std::pair<Vec2, Vec2> window_rect(const ArrayConfig& a, CameraIndex c, const SensorWindow& w, Vec2 stage) {
    const double pix = a.object_pixel().in_um();
    const Vec2 lo = pixel_grid_corner(a, c) - (a.true_camera_axis(c) - a.camera_axis(c)) + stage +
                    Vec2{w.x0 * pix, w.y0 * pix};
    return {lo, lo + Vec2{w.width * pix, w.height * pix}};
}

std::pair<Vec2, Vec2> grow(std::pair<Vec2, Vec2> r, double by) {
    return {r.first - Vec2{by, by}, r.second + Vec2{by, by}};
}

std::pair<Vec2, Vec2> unite(std::pair<Vec2, Vec2> a, std::pair<Vec2, Vec2> b) {
    return {{std::min(a.first.x, b.first.x), std::min(a.first.y, b.first.y)},
            {std::max(a.second.x, b.second.x), std::max(a.second.y, b.second.y)}};
}

std::vector<double> default_spacings(const RunConfig& c, double pix) {
    if (!c.scene.spacings_um.empty()) return c.scene.spacings_um;
    return {8.0 * pix, 4.0 * pix, 2.0 * pix, pix};
}

// Width and height of the bar-group block laid out by make_desk_scene.
Vec2 bar_block_size(const std::vector<double>& spacings, int bars) {
    const double gap = spacings.front();
    double w = -gap;
    for (double s : spacings) w += s * bars + gap;
    return {w, 2.0 * spacings.front() * bars + gap};
}

constexpr int kBarsPerGroup = 5;

std::string contrast_csv(const std::vector<GroupContrast>& groups) {
    std::string s = "spacing_um,orientation,contrast,resolved\n";
    for (const GroupContrast& g : groups) {
        s += num(g.spacing_um) + "," + (g.orientation == BarOrientation::Vertical ? "vertical" : "horizontal") +
             "," + num(g.contrast) + "," + (g.resolved ? "1" : "0") + "\n";
    }
    return s;
}

json contrast_json(const std::vector<GroupContrast>& groups, double resolution) {
    json list = json::array();
    for (const GroupContrast& g : groups) {
        list.push_back({{"spacing_um", g.spacing_um},
                        {"orientation", g.orientation == BarOrientation::Vertical ? "vertical" : "horizontal"},
                        {"contrast", g.contrast},
                        {"resolved", g.resolved}});
    }
    return {{"groups", list}, {"resolution_um", std::isfinite(resolution) ? json(resolution) : json(nullptr)}};
}

std::string prefix(const std::string& dir) { return dir.empty() ? "" : dir + "/"; }

void write_composite(OutputCommitter& out, const std::string& p, const Composite& c, int tile_px) {
    out.write_png(p + "composite.png", quantize(c.raster, 16));
    const json meta = {{"origin_um", vec_json(c.origin_um)},
                       {"pixel_um", c.pixel_um},
                       {"width", c.raster.width()},
                       {"height", c.raster.height()},
                       {"bit_depth", 16}};
    out.write_text(p + "composite.json", meta.dump(2) + "\n");
    write_pyramid(out, p + "pyramid", build_pyramid(c, tile_px));
}

json run_design(OutputCommitter& out, const std::string& dir, const RunConfig& c) {
    const ArrayConfig& a = c.array;
    out.write_text(prefix(dir) + "design_report.csv", design_report_csv(a));
    const RegimeReport rep = classify_regime(a);
    const FovPair fov = camera_object_fov(a);
    const FovExtent ext = total_fov_extent(a);
    auto axis = [](const AxisRegime& r) {
        return json{{"regime", to_string(r.regime)},
                    {"overlap_fraction", r.overlap_fraction},
                    {"views_per_point", r.views_per_point}};
    };
    const double r_pix = pixel_limited_resolution(a.sensor.pixel_pitch, a.magnification).in_um();
    json s = {{"regime", {{"x", axis(rep.x)}, {"y", axis(rep.y)}, {"aggregate", to_string(rep.aggregate())}}},
              {"r_pix_um", r_pix},
              {"camera_fov_mm", {{"x", fov.x.in_mm()}, {"y", fov.y.in_mm()}}},
              {"extent_mm", {{"x", ext.x.in_mm()}, {"y", ext.y.in_mm()}, {"has_gaps", ext.has_gaps}}},
              {"image_distance_mm", a.image_distance().in_mm()},
              {"object_distance_mm", a.object_distance().in_mm()},
              {"cameras", a.camera_count()}};
    if (c.preset) {
        const Preset& p = find_preset(*c.preset);
        if (p.nominal_resolution_um > 0.0) {
            const double short_fov = std::min(fov.x.in_mm(), fov.y.in_mm());
            s["nominal"] = {{"resolution_um", p.nominal_resolution_um},
                            {"camera_fov_mm", p.nominal_camera_fov_mm},
                            {"working_distance_mm", p.nominal_working_distance_mm},
                            {"resolution_deviation", r_pix / p.nominal_resolution_um - 1.0},
                            {"camera_fov_deviation", short_fov / p.nominal_camera_fov_mm - 1.0}};
        }
    }
    return s;
}

json run_throughput(OutputCommitter& out, const std::string& dir, const RunConfig& c) {
    ThroughputOptions o;
    o.bandwidth_bytes_per_s = c.throughput.bandwidth_gb_s * 1e9;
    o.buffer_bytes = c.throughput.buffer_gb * 1e9;
    o.binning = c.throughput.binning;
    o.crop = c.throughput.crop_px;
    o.efficiency = c.throughput.efficiency;
    o.fps = c.throughput.fps;
    const ThroughputReport r = throughput_report(c.array, o);
    out.write_text(prefix(dir) + "throughput.csv", r.to_csv());
    return {{"cameras", r.cameras},
            {"binning", r.binning},
            {"frame_bytes", r.frame_bytes},
            {"effective_frame_bytes", r.effective_frame_bytes},
            {"efficiency", r.efficiency},
            {"max_fps", r.max_fps},
            {"fps", r.fps},
            {"buffer_frames", r.buffer_frames},
            {"max_duration_s", r.max_duration_s}};
}

json run_render(OutputCommitter& out, const std::string& dir, const RunConfig& c) {
    const DeskRender r = desk_render(c);
    write_frameset(out, prefix(dir) + "frames", r.frames);
    return {{"cameras", r.frames.frames.size()},
            {"layout", {r.config.layout.rows, r.config.layout.cols}},
            {"window_px", {c.render.window_width, c.render.window_height}},
            {"binning", c.render.binning},
            {"bar_groups", r.scene.layout.groups.size()}};
}

json run_stitch(OutputCommitter& out, const std::string& dir, const RunConfig& c) {
    const DeskStitch s = desk_stitch(c);
    const std::string p = prefix(dir);
    std::ostringstream cal;
    write_calibration(cal, s.calibration);
    out.write_text(p + "calibration.txt", cal.str());
    write_composite(out, p, s.composite, c.stitch.pyramid_tile_px);
    if (!s.contrast.empty()) out.write_text(p + "contrast.csv", contrast_csv(s.contrast));
    int low = 0;
    for (const PairOffset& po : s.calibration.pairs) low += po.low_confidence ? 1 : 0;
    json j = {{"cameras", s.calibration.cameras.size()},
              {"pairs", s.calibration.pairs.size()},
              {"low_confidence_pairs", low},
              {"residual_rms_px", s.calibration.residual_rms_px},
              {"composite_px", {s.composite.raster.width(), s.composite.raster.height()}},
              {"pixel_um", s.composite.pixel_um}};
    if (!s.contrast.empty()) j["contrast"] = contrast_json(s.contrast, s.resolution_um);
    return j;
}

json run_depth(OutputCommitter& out, const std::string& dir, const RunConfig& c) {
    const DeskDepth d = desk_depth(c);
    const std::string p = prefix(dir);
    out.write_text(p + "depth_sweep.csv", d.sweep.to_csv());
    std::string samples = "x_um,y_um,height_um\n";
    for (const HeightSample& s : d.samples) {
        samples += num(s.position_um.x) + "," + num(s.position_um.y) + "," + num(s.height_um) + "\n";
    }
    out.write_text(p + "height_samples.csv", samples);
    if (d.height_map) write_height_map(out, p + "height_map", *d.height_map);
    double mean = 0.0;
    for (const HeightSample& s : d.samples) mean += s.height_um;
    if (!d.samples.empty()) mean /= static_cast<double>(d.samples.size());
    return {{"planes", d.sweep.planes.size()},
            {"failed_planes", d.sweep.failed_planes},
            {"rmse_um", d.sweep.rmse_um},
            {"height_samples", d.samples.size()},
            {"mean_height_um", d.samples.empty() ? json(nullptr) : json(mean)},
            {"height_map", d.height_map.has_value()}};
}

json run_tiled(OutputCommitter& out, const std::string& dir, const RunConfig& c) {
    const DeskTiled t = desk_tiled(c);
    const std::string p = prefix(dir);
    out.write_text(p + "scan_plan.csv", t.plan.to_csv());
    write_composite(out, p, t.composite.composite, c.stitch.pyramid_tile_px);
    if (!t.contrast.empty()) out.write_text(p + "contrast.csv", contrast_csv(t.contrast));
    if (!t.focus.empty()) {
        std::string f = "camera,x_um,y_um,chosen_slice,z_um,featureless\n";
        for (const FocusDecision& d : t.focus) {
            f += to_string(d.camera) + "," + num(d.lateral_um.x) + "," + num(d.lateral_um.y) + "," +
                 std::to_string(d.chosen) + "," + num(t.plan.axial_offsets_um[d.chosen]) + "," +
                 (d.featureless ? "1" : "0") + "\n";
        }
        out.write_text(p + "focus.csv", f);
    }
    std::size_t frames = 0;
    for (const FrameSet& s : t.scans) frames += s.frames.size();
    const Vec2 travel = t.plan.lateral_extent_um();
    json j = {{"positions", t.plan.lateral_offsets_um.size()},
              {"snapshots", t.plan.snapshot_count()},
              {"counts", {t.plan.counts.nx, t.plan.counts.ny}},
              {"step_um", vec_json(t.plan.step_um)},
              {"travel_um", vec_json(travel)},
              {"coverage", {{"spacing_um", t.coverage.spacing_um},
                            {"samples", t.coverage.samples},
                            {"uncovered", t.coverage.uncovered},
                            {"complete", t.coverage.complete()}}},
              {"roi_um", {vec_json(t.roi.first), vec_json(t.roi.second)}},
              {"rendered_frames", frames},
              {"roi_pixels", t.composite.footprint_pixels},
              {"roi_gap_pixels", t.composite.gap_pixels}};
    if (!t.contrast.empty()) j["contrast"] = contrast_json(t.contrast, t.resolution_um);
    return j;
}

}  // namespace

ArrayConfig subarray(const ArrayConfig& config, int rows, int cols) {
    config.validate();
    if (rows < 1 || cols < 1 || rows > config.layout.rows || cols > config.layout.cols) {
        throw DomainError("subarray: " + std::to_string(rows) + "x" + std::to_string(cols) +
                          " does not fit the layout");
    }
    ArrayConfig out = config;
    out.layout.rows = rows;
    out.layout.cols = cols;
    if (!config.axis_offsets_um.empty()) {
        out.axis_offsets_um.clear();
        for (int r = 0; r < rows; ++r) {
            for (int k = 0; k < cols; ++k) out.axis_offsets_um.push_back(config.axis_offsets_um[config.linear_index({r, k})]);
        }
    }
    return out;
}

Vec2 pixel_grid_corner(const ArrayConfig& config, CameraIndex camera) {
    return pixel_to_object_um(config, camera, {-0.5, -0.5}) + config.true_camera_axis(camera) -
           config.camera_axis(camera);
}

DeskScene make_desk_scene(const RunConfig& c, const ArrayConfig& a, Vec2 default_center,
                          std::pair<Vec2, Vec2> textured, std::optional<Vec2> bars_origin) {
    if (c.scene.kind == SceneKind::File) {
        fs::path side = c.scene.sidecar_path.empty() ? fs::path(c.scene.png_path).replace_extension(".json")
                                                     : fs::path(c.scene.sidecar_path);
        return {load_scene(c.scene.png_path, side), {}};
    }
    const double pix = a.object_pixel().in_um();
    const double pitch = c.scene.sample_pitch_um.value_or(pix / 4.0);
    const Vec2 corner = pixel_grid_corner(a, {0, 0});
    const Vec2 center = c.scene.center_um.value_or(default_center);
    const double nx = std::ceil(c.scene.extent_um.x / pix - 1e-9), ny = std::ceil(c.scene.extent_um.y / pix - 1e-9);
    const Vec2 size{nx * pix, ny * pix};
    const Vec2 origin = snap_to_grid(center - size / 2.0, corner, pix);
    const SceneGeometry geometry{size, pitch, origin + size / 2.0};

    TextureSpec tex;
    tex.feature_um = c.scene.feature_um.value_or(8.0 * pix);
    tex.seed = hash_combine(run_seed(c), kTextureStream);
    DeskScene out{make_texture_scene(geometry, tex, 0.5f, textured), {}};
    if (c.scene.height_um != 0.0) set_uniform_height(out.scene, c.scene.height_um);

    if (c.scene.kind == SceneKind::Target && bars_origin) {
        ResolutionTargetSpec spec;
        spec.spacings_um = default_spacings(c, pix);
        spec.bars_per_group = kBarsPerGroup;
        spec.orientation = BarOrientation::Both;
        std::vector<Vec2> origins;
        Vec2 at = snap_to_grid(*bars_origin, corner, pix);
        for (double s : spec.spacings_um) {
            origins.push_back(at);
            at.x += s * spec.bars_per_group + spec.spacings_um.front();
        }
        const ResolutionTarget target = make_resolution_target(spec, geometry, origins);
        for (const TargetGroup& g : target.layout.groups) {
            const Vec2 t0 = target.scene.to_texel(g.min_um), t1 = target.scene.to_texel(g.max_um);
            for (auto j = static_cast<std::int64_t>(std::floor(t0.y + 1e-6)); j < std::ceil(t1.y - 1e-6); ++j) {
                for (auto i = static_cast<std::int64_t>(std::floor(t0.x + 1e-6)); i < std::ceil(t1.x - 1e-6); ++i) {
                    out.scene.intensity.set(i, j, target.scene.intensity.at(i, j));
                }
            }
        }
        out.layout = target.layout;
    }
    return out;
}

DeskRender desk_render(const RunConfig& c) {
    const int rows = c.render.subarray ? c.render.subarray->first : std::min(2, c.array.layout.rows);
    const int cols = c.render.subarray ? c.render.subarray->second : std::min(2, c.array.layout.cols);
    DeskRender out;
    out.config = subarray(c.array, rows, cols);
    const ArrayConfig& a = out.config;
    const double pix = a.object_pixel().in_um();
    const Vec2 center = c.scene.center_um.value_or(Vec2{});
    const auto windows = mosaic_windows(a, center, c.render.window_width, c.render.window_height,
                                        c.render.mosaic_overlap);

    std::pair<Vec2, Vec2> region = window_rect(a, {0, 0}, windows.at({0, 0}), {});
    for (const auto& [cam, w] : windows) region = unite(region, window_rect(a, cam, w, {}));
    region = grow(region, 8.0 * pix);

    // Bar groups go inside camera (0,0)'s window, clear of the overlaps with
    // its right and lower neighbours.
    std::optional<Vec2> bars;
    if (c.scene.kind == SceneKind::Target) {
        const SensorWindow& w0 = windows.at({0, 0});
        const double margin = 16.0 * pix;
        const Vec2 block = bar_block_size(default_spacings(c, pix), kBarsPerGroup);
        const double free_x = (cols > 1 ? (1.0 - c.render.mosaic_overlap) : 1.0) * w0.width * pix - 2.0 * margin;
        const double free_y = (rows > 1 ? (1.0 - c.render.mosaic_overlap) : 1.0) * w0.height * pix - 2.0 * margin;
        if (block.x > free_x || block.y > free_y) {
            throw DomainError("bar groups do not fit in camera r0c0's window; enlarge render.window_px or "
                              "reduce scene.spacings");
        }
        bars = window_rect(a, {0, 0}, w0, {}).first + Vec2{margin, margin};
    }
    out.scene = make_desk_scene(c, a, center, region, bars);

    RenderOptions ro;
    ro.noise_std = c.render.noise_std;
    ro.quantize = c.render.quantize;
    ro.camera_windows = windows;
    out.frames = render_array(out.scene.scene, a, {}, hash_combine(run_seed(c), kNoiseStream), ro);
    if (c.render.binning > 1) {
        for (CameraFrame& f : out.frames.frames) f = apply_binning(f, c.render.binning);
    }
    return out;
}

DeskStitch desk_stitch(const RunConfig& c) {
    DeskStitch out;
    out.render = desk_render(c);
    out.calibration = calibrate(out.render.frames, out.render.config);
    CompositeOptions co;
    co.feather = c.stitch.feather;
    out.composite = composite(out.render.frames, out.calibration, co);
    out.resolution_um = std::numeric_limits<double>::infinity();
    if (!out.render.scene.layout.groups.empty()) {
        out.contrast = measure_group_contrast(out.composite, out.render.scene.layout, c.stitch.contrast_threshold);
        out.resolution_um = measure_resolution(out.composite, out.render.scene.layout, c.stitch.contrast_threshold);
    }
    return out;
}

DeskDepth desk_depth(const RunConfig& c) {
    const ArrayConfig& a = c.array;
    const DepthSettings& d = c.depth;
    const double pix = a.object_pixel().in_um();
    const Vec2 mid = 0.5 * (a.camera_axis(d.camera_a) + a.camera_axis(d.camera_b));
    const double half = 0.75 * d.window_px * pix;
    RunConfig texture_only = c;
    if (texture_only.scene.kind == SceneKind::Target) texture_only.scene.kind = SceneKind::Texture;
    const DeskScene scene = make_desk_scene(texture_only, a, mid, {mid - Vec2{half, half}, mid + Vec2{half, half}},
                                            std::nullopt);

    DepthSweepOptions o;
    o.camera_a = d.camera_a;
    o.camera_b = d.camera_b;
    o.window_px = d.window_px;
    o.noise_std = d.noise_std;
    o.seed = hash_combine(run_seed(c), kNoiseStream);
    DeskDepth out;
    out.sweep = run_depth_sweep(a, d.z_min_um, d.z_max_um, d.step_um, scene.scene, o);

    // Height map of the scene as configured, calibrated on a flat copy.
    RenderOptions ro;
    ro.noise_std = d.noise_std;
    for (CameraIndex cam : {d.camera_a, d.camera_b}) {
        const Vec2 px = object_to_pixel(a, cam, mid);
        ro.camera_windows[cam] = {static_cast<int>(std::lround(px.x - d.window_px / 2.0)),
                                  static_cast<int>(std::lround(px.y - d.window_px / 2.0)), d.window_px, d.window_px};
    }
    Scene flat = scene.scene;
    set_uniform_height(flat, 0.0);
    const CameraFrame fa = render_camera(flat, a, d.camera_a, {}, o.seed, ro);
    const CameraFrame fb = render_camera(flat, a, d.camera_b, {}, o.seed, ro);
    const StitchCalibration cal = calibrate_pair(fa, fb, a);
    ro.exposure_id = 1;
    const CameraFrame ha = render_camera(scene.scene, a, d.camera_a, {}, o.seed, ro);
    const CameraFrame hb = render_camera(scene.scene, a, d.camera_b, {}, o.seed, ro);
    const MatchSet set = match_features(ha, hb, cal, a, o.match);
    out.samples = match_samples(set, cal, a);
    try {
        out.height_map = build_height_map(out.samples, d.grid_pitch_um.value_or(4.0 * pix));
    } catch (const DomainError&) {
        out.height_map.reset();
    }
    return out;
}

DeskTiled desk_tiled(const RunConfig& c) {
    const ArrayConfig& a = c.array;
    const TiledSettings& t = c.tiled;
    DeskTiled out;
    out.plan = plan_tiled_scan(a, t.overlap, t.serpentine, t.convention, t.axial_um);
    out.coverage = check_scan_coverage(a, out.plan, t.coverage_spacing_um);

    const double pix = a.object_pixel().in_um();
    const Vec2 center = t.roi_center_um.value_or(a.camera_axis({0, 0}) + 0.5 * out.plan.step_um);
    out.roi = {center - t.roi_size_um / 2.0, center + t.roi_size_um / 2.0};

    std::optional<Vec2> bars;
    if (c.scene.kind == SceneKind::Target) {
        const double margin = 16.0 * pix;
        const Vec2 block = bar_block_size(default_spacings(c, pix), kBarsPerGroup);
        if (block.x + 2.0 * margin > t.roi_size_um.x || block.y + 2.0 * margin > t.roi_size_um.y) {
            throw DomainError("bar groups do not fit in the region of interest; enlarge tiled.roi_size");
        }
        bars = out.roi.first + Vec2{margin, margin};
    }
    out.scene = make_desk_scene(c, a, center, grow(out.roi, 16.0 * pix), bars);

    // Window of each camera at each position that sees the ROI (plus a margin).
    const FovPair fov = camera_object_fov(a);
    const auto want = grow(out.roi, 4.0 * pix);
    const Vec2 sc = sensor_center_px(a.sensor);
    const int bin = c.render.binning;
    struct Job {
        std::size_t position;
        CameraIndex camera;
        SensorWindow window;
    };
    std::vector<Job> jobs;
    for (std::size_t p = 0; p < out.plan.lateral_offsets_um.size(); ++p) {
        const Vec2 s = out.plan.lateral_offsets_um[p];
        for (CameraIndex cam : a.cameras()) {
            const Vec2 axis = a.camera_axis(cam) + s;
            const Vec2 lo{std::max(want.first.x, axis.x - fov.x.in_um() / 2.0),
                          std::max(want.first.y, axis.y - fov.y.in_um() / 2.0)};
            const Vec2 hi{std::min(want.second.x, axis.x + fov.x.in_um() / 2.0),
                          std::min(want.second.y, axis.y + fov.y.in_um() / 2.0)};
            if (!(hi.x > lo.x && hi.y > lo.y)) continue;
            auto span = [&](double l, double h, double centre, int n) {
                int p0 = static_cast<int>(std::floor(l / pix + centre + 1e-9));
                int p1 = static_cast<int>(std::ceil(h / pix + centre - 1e-9));
                p0 = std::clamp(p0, 0, n);
                p1 = std::clamp(p1, 0, n);
                int len = std::max(p1 - p0, 16);
                len = (len + bin - 1) / bin * bin;
                len = std::min(len, n / bin * bin);
                p0 = std::clamp(p0, 0, n - len);
                return std::pair{p0, len};
            };
            const auto [x0, w] = span(lo.x - axis.x, hi.x - axis.x, sc.x, a.sensor.pixels_x);
            const auto [y0, h] = span(lo.y - axis.y, hi.y - axis.y, sc.y, a.sensor.pixels_y);
            jobs.push_back({p, cam, {x0, y0, w, h}});
        }
    }
    if (jobs.empty()) throw PipelineError("tiled: no camera sees the region of interest at any scan position");

    const std::vector<double>& zs = out.plan.axial_offsets_um;
    const std::uint64_t noise_seed = hash_combine(run_seed(c), kNoiseStream);
    std::vector<CameraFrame> chosen(jobs.size());
    std::vector<FocusDecision> decisions(zs.size() > 1 ? jobs.size() : 0);
    parallel_for(jobs.size(), [&](std::size_t j) {
        const Job& job = jobs[j];
        const Vec2 s = out.plan.lateral_offsets_um[job.position];
        std::vector<CameraFrame> stack;
        for (std::size_t k = 0; k < zs.size(); ++k) {
            RenderOptions ro;
            ro.noise_std = c.render.noise_std;
            ro.quantize = c.render.quantize;
            ro.camera_windows[job.camera] = job.window;
            ro.exposure_id = static_cast<int>(job.position * zs.size() + k);
            CameraFrame f = render_camera(out.scene.scene, a, job.camera, {s.x, s.y, zs[k]},
                                          hash_combine(noise_seed, job.position), ro);
            stack.push_back(bin > 1 ? apply_binning(f, bin) : std::move(f));
        }
        if (zs.size() > 1) {
            decisions[j] = select_focus(stack);
            chosen[j] = std::move(stack[decisions[j].chosen]);
        } else {
            chosen[j] = std::move(stack.front());
        }
    });
    out.focus = std::move(decisions);

    std::size_t last = jobs.size() + out.plan.lateral_offsets_um.size();
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        const std::size_t p = jobs[j].position;
        if (p != last) {
            FrameSet fs;
            fs.config = a;
            fs.stage_offset = {out.plan.lateral_offsets_um[p].x, out.plan.lateral_offsets_um[p].y, 0.0};
            out.scans.push_back(std::move(fs));
            last = p;
        }
        out.scans.back().frames.push_back(std::move(chosen[j]));
    }
    out.composite = assemble_tiled_composite(out.scans, nominal_calibrations(out.scans), {}, out.roi);
    out.resolution_um = std::numeric_limits<double>::infinity();
    if (!out.scene.layout.groups.empty()) {
        out.contrast = measure_group_contrast(out.composite.composite, out.scene.layout, c.stitch.contrast_threshold);
        out.resolution_um = measure_resolution(out.composite.composite, out.scene.layout, c.stitch.contrast_threshold);
    }
    return out;
}

std::string run(const RunConfig& c) {
    set_thread_count(c.threads);
    OutputCommitter out(c.output_dir);
    json summary;
    summary["mode"] = to_string(c.mode);
    switch (c.mode) {
        case RunMode::Design: summary["design"] = run_design(out, "", c); break;
        case RunMode::Render: summary["render"] = run_render(out, "", c); break;
        case RunMode::Stitch: summary["stitch"] = run_stitch(out, "", c); break;
        case RunMode::Depth: summary["depth"] = run_depth(out, "", c); break;
        case RunMode::Tiled: summary["tiled"] = run_tiled(out, "", c); break;
        case RunMode::Throughput: summary["throughput"] = run_throughput(out, "", c); break;
        case RunMode::Pipeline: {
            summary["design"] = run_design(out, "design", c);
            const Regime regime = classify_regime(c.array).aggregate();
            json skipped = json::array();
            if (regime == Regime::Tiled) {
                skipped.push_back({{"stage", "stitch"}, {"reason", "FOVs leave gaps; covered by tiled"}});
            } else {
                summary["stitch"] = run_stitch(out, "stitch", c);
            }
            if (regime == Regime::MultiView) {
                summary["depth"] = run_depth(out, "depth", c);
            } else {
                skipped.push_back({{"stage", "depth"}, {"reason", "needs a multi-view configuration"}});
            }
            if (regime == Regime::Tiled) {
                summary["tiled"] = run_tiled(out, "tiled", c);
            } else {
                skipped.push_back({{"stage", "tiled"}, {"reason", "FOVs have no gaps to scan"}});
            }
            summary["throughput"] = run_throughput(out, "throughput", c);
            summary["skipped"] = skipped;
            break;
        }
    }
    const std::string canonical = canonical_json(c);
    out.write_text("config.json", canonical);
    out.write_manifest(to_string(c.mode), canonical, summary.dump());
    return summary.dump(2) + "\n";
}

}  // namespace mcam
