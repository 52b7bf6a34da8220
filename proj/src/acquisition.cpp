#include "mcam/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include "mcam/parallel.hpp"

namespace mcam {

Vec2 ScanPlan::lateral_extent_um() const {
    if (lateral_offsets_um.empty()) return {};
    Vec2 lo = lateral_offsets_um.front(), hi = lo;
    for (Vec2 o : lateral_offsets_um) {
        lo = {std::min(lo.x, o.x), std::min(lo.y, o.y)};
        hi = {std::max(hi.x, o.x), std::max(hi.y, o.y)};
    }
    return hi - lo;
}

std::string ScanPlan::to_csv() const {
    std::ostringstream os;
    os << std::setprecision(10) << "index,dx_um,dy_um,dz_um\n";
    std::size_t i = 0;
    for (Vec2 o : lateral_offsets_um) {
        for (double z : axial_offsets_um) os << i++ << ',' << o.x << ',' << o.y << ',' << z << '\n';
    }
    return os.str();
}

ScanPlan plan_tiled_scan(const ArrayConfig& config, double overlap, bool serpentine, StepConvention convention,
                         const std::vector<double>& axial_offsets_um) {
    config.validate();
    if (overlap > 0.5) throw DomainError("plan_tiled_scan: overlap must be in [0, 0.5]");
    if (axial_offsets_um.empty()) throw DomainError("plan_tiled_scan: need at least one axial offset");
    const std::set<double> unique_z(axial_offsets_um.begin(), axial_offsets_um.end());
    if (unique_z.size() != axial_offsets_um.size()) throw DomainError("plan_tiled_scan: axial offsets must be unique");

    ScanPlan plan;
    plan.counts = scan_grid(config, overlap, convention);  // throws without gaps
    plan.step_um = scan_step(config, overlap, convention);
    plan.overlap = overlap;
    plan.convention = convention;
    plan.serpentine = serpentine;
    plan.axial_offsets_um = axial_offsets_um;
    const int nx = plan.counts.nx, ny = plan.counts.ny;
    for (int j = 0; j < ny; ++j) {
        for (int k = 0; k < nx; ++k) {
            const int i = (serpentine && j % 2 == 1) ? nx - 1 - k : k;
            plan.lateral_offsets_um.push_back({(i - (nx - 1) / 2.0) * plan.step_um.x,
                                               (j - (ny - 1) / 2.0) * plan.step_um.y});
        }
    }
    return plan;
}

CoverageReport check_scan_coverage(const ArrayConfig& config, const ScanPlan& plan, double spacing_um) {
    config.validate();
    if (spacing_um <= 0.0) spacing_um = pixel_limited_resolution(config.sensor.pixel_pitch, config.magnification).in_um() / 2.0;
    const FovPair fov = camera_object_fov(config);
    const FovExtent ext = total_fov_extent(config);
    CoverageReport rep;
    rep.spacing_um = spacing_um;
    rep.min_um = {-ext.x.in_um() / 2.0, -ext.y.in_um() / 2.0};
    rep.max_um = {ext.x.in_um() / 2.0, ext.y.in_um() / 2.0};

    struct Rect {
        double x0, x1, y0, y1;
    };
    constexpr double eps = 1e-6;  // abutting footprints share their edge
    std::vector<Rect> rects;
    for (CameraIndex c : config.cameras()) {
        const Vec2 a = config.camera_axis(c);
        for (Vec2 o : plan.lateral_offsets_um) {
            rects.push_back({a.x + o.x - fov.x.in_um() / 2.0 - eps, a.x + o.x + fov.x.in_um() / 2.0 + eps,
                             a.y + o.y - fov.y.in_um() / 2.0 - eps, a.y + o.y + fov.y.in_um() / 2.0 + eps});
        }
    }
    auto samples_on = [&](double lo, double hi) {
        const auto n = static_cast<std::int64_t>(std::ceil((hi - lo) / spacing_um - 1e-9));
        std::vector<double> v;
        v.reserve(static_cast<std::size_t>(n + 1));
        for (std::int64_t i = 0; i <= n; ++i) v.push_back(std::min(hi, lo + static_cast<double>(i) * spacing_um));
        return v;
    };
    const std::vector<double> xs = samples_on(rep.min_um.x, rep.max_um.x);
    const std::vector<double> ys = samples_on(rep.min_um.y, rep.max_um.y);
    rep.samples = static_cast<std::int64_t>(xs.size()) * static_cast<std::int64_t>(ys.size());

    // Every sample column with the same set of x-active footprints has the
    // same uncovered count, so each distinct set is evaluated once.
    std::vector<std::size_t> active, prev_active;
    std::int64_t prev_uncovered = 0;
    bool have_prev = false;
    for (double x : xs) {
        active.clear();
        for (std::size_t r = 0; r < rects.size(); ++r) {
            if (rects[r].x0 <= x && x <= rects[r].x1) active.push_back(r);
        }
        if (!have_prev || active != prev_active) {
            std::vector<std::pair<double, double>> iv;
            for (std::size_t r : active) iv.push_back({rects[r].y0, rects[r].y1});
            std::sort(iv.begin(), iv.end());
            std::int64_t missing = 0;
            std::size_t k = 0;
            double reach = -std::numeric_limits<double>::infinity();
            for (double y : ys) {
                while (k < iv.size() && iv[k].first <= y) reach = std::max(reach, iv[k++].second);
                if (y > reach) ++missing;
            }
            prev_active = active;
            prev_uncovered = missing;
            have_prev = true;
        }
        rep.uncovered += prev_uncovered;
    }
    return rep;
}

PixelRegion central_region(int width, int height) {
    const int w = std::max(1, width / 2), h = std::max(1, height / 2);
    return {(width - w) / 2, (height - h) / 2, w, h};
}

double laplacian_focus_metric(const Image& image, const PixelRegion& r) {
    if (r.width < 16 || r.height < 16) throw DomainError("laplacian_focus_metric: region must be at least 16x16");
    if (r.x0 < 0 || r.y0 < 0 || r.x0 + r.width > image.width() || r.y0 + r.height > image.height()) {
        throw DomainError("laplacian_focus_metric: region outside the frame");
    }
    // Laplacian at region pixels whose 4-neighbours lie in the frame.
    const int x0 = std::max(r.x0, 1), x1 = std::min(r.x0 + r.width, image.width() - 1);
    const int y0 = std::max(r.y0, 1), y1 = std::min(r.y0 + r.height, image.height() - 1);
    double sum = 0.0, sum2 = 0.0;
    std::int64_t n = 0;
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            const double l = static_cast<double>(image.at(x - 1, y)) + image.at(x + 1, y) + image.at(x, y - 1) +
                             image.at(x, y + 1) - 4.0 * image.at(x, y);
            sum += l;
            sum2 += l * l;
            ++n;
        }
    }
    const double mean = sum / static_cast<double>(n);
    return std::max(0.0, sum2 / static_cast<double>(n) - mean * mean);
}

double laplacian_focus_metric(const CameraFrame& frame) {
    return laplacian_focus_metric(frame.pixels, central_region(frame.pixels.width(), frame.pixels.height()));
}

FocusDecision select_focus(const std::vector<CameraFrame>& stack) {
    if (stack.size() < 2) throw DomainError("select_focus: need at least two slices");
    FocusDecision d;
    d.camera = stack.front().camera;
    d.lateral_um = stack.front().stage.lateral();
    d.metrics.resize(stack.size());
    parallel_for(stack.size(), [&](std::size_t i) { d.metrics[i] = laplacian_focus_metric(stack[i]); });
    const double centre = (static_cast<double>(stack.size()) - 1.0) / 2.0;
    const double peak = *std::max_element(d.metrics.begin(), d.metrics.end());
    if (!(peak > 1e-12)) {
        d.featureless = true;
        d.chosen = (stack.size() - 1) / 2;
        return d;
    }
    d.chosen = stack.size();
    for (std::size_t i = 0; i < stack.size(); ++i) {
        if (d.metrics[i] != peak) continue;
        if (d.chosen == stack.size() ||
            std::abs(static_cast<double>(i) - centre) < std::abs(static_cast<double>(d.chosen) - centre)) {
            d.chosen = i;
        }
    }
    return d;
}

std::vector<FocusDecision> select_focus(const std::vector<FrameSet>& stack) {
    if (stack.size() < 2) throw DomainError("select_focus: need at least two slices");
    const std::size_t n = stack.front().frames.size();
    for (const FrameSet& s : stack) {
        if (s.frames.size() != n) throw DomainError("select_focus: slices hold different camera counts");
    }
    std::vector<FocusDecision> out(n);
    parallel_for(n, [&](std::size_t c) {
        std::vector<CameraFrame> per;
        per.reserve(stack.size());
        for (const FrameSet& s : stack) per.push_back(s.frame(stack.front().frames[c].camera));
        out[c] = select_focus(per);
    });
    return out;
}

FrameSet apply_focus(const std::vector<FrameSet>& stack, const std::vector<FocusDecision>& decisions) {
    if (stack.empty()) throw DomainError("apply_focus: empty stack");
    FrameSet out;
    out.config = stack.front().config;
    out.stage_offset = stack.front().stage_offset;
    out.stage_offset.z_um = 0.0;
    for (const FocusDecision& d : decisions) {
        if (d.chosen >= stack.size()) throw DomainError("apply_focus: decision outside the stack");
        out.frames.push_back(stack[d.chosen].frame(d.camera));
    }
    std::sort(out.frames.begin(), out.frames.end(),
              [](const CameraFrame& a, const CameraFrame& b) { return a.camera < b.camera; });
    return out;
}

std::vector<StitchCalibration> nominal_calibrations(const std::vector<FrameSet>& scans) {
    std::vector<StitchCalibration> out;
    for (const FrameSet& s : scans) out.push_back(nominal_calibration(s.config, s.stage_offset.z_um));
    return out;
}

TiledComposite assemble_tiled_composite(const std::vector<FrameSet>& scans,
                                        const std::vector<StitchCalibration>& calibrations,
                                        const CompositeOptions& options,
                                        std::optional<std::pair<Vec2, Vec2>> region) {
    if (scans.empty()) throw DomainError("assemble_tiled_composite: no scan positions");
    if (calibrations.size() != scans.size()) {
        throw DomainError("assemble_tiled_composite: need one calibration per scan position");
    }
    std::vector<PlacedTile> tiles;
    for (std::size_t i = 0; i < scans.size(); ++i) {
        for (const PlacedTile& t : place_frames(scans[i], calibrations[i])) tiles.push_back(t);
    }
    TiledComposite out;
    out.composite = composite_tiles(tiles, calibrations.front(), options);

    Vec2 lo, hi;
    if (region) {
        lo = region->first;
        hi = region->second;
        if (!(hi.x > lo.x && hi.y > lo.y)) throw DomainError("assemble_tiled_composite: empty region");
    } else {
        const FovExtent ext = total_fov_extent(scans.front().config);
        lo = {-ext.x.in_um() / 2.0, -ext.y.in_um() / 2.0};
        hi = {ext.x.in_um() / 2.0, ext.y.in_um() / 2.0};
    }
    const Composite& c = out.composite;
    for (int y = 0; y < c.weight_sum.height(); ++y) {
        const double cy = c.origin_um.y + (y + 0.5) * c.pixel_um;
        if (cy < lo.y || cy > hi.y) continue;
        for (int x = 0; x < c.weight_sum.width(); ++x) {
            const double cx = c.origin_um.x + (x + 0.5) * c.pixel_um;
            if (cx < lo.x || cx > hi.x) continue;
            ++out.footprint_pixels;
            if (c.weight_sum.at(x, y) <= 0.0f) ++out.gap_pixels;
        }
    }
    // Footprint parts that fall outside the composite raster are gaps too.
    const auto expected = static_cast<std::int64_t>(std::floor((hi.x - lo.x) / c.pixel_um)) *
                          static_cast<std::int64_t>(std::floor((hi.y - lo.y) / c.pixel_um));
    if (out.footprint_pixels < expected) {
        out.gap_pixels += expected - out.footprint_pixels;
        out.footprint_pixels = expected;
    }
    return out;
}

std::int64_t frame_bytes(const SensorSpec& sensor, int n_cameras, int binning,
                         std::optional<std::pair<int, int>> crop) {
    sensor.validate();
    if (n_cameras < 1) throw DomainError("frame_bytes: need at least one camera");
    if (binning < 1) throw DomainError("frame_bytes: binning must be >= 1");
    int w = sensor.pixels_x, h = sensor.pixels_y;
    if (crop) {
        if (crop->first < 1 || crop->second < 1 || crop->first > sensor.pixels_x || crop->second > sensor.pixels_y) {
            throw DomainError("frame_bytes: crop must fit inside the sensor");
        }
        w = crop->first;
        h = crop->second;
    }
    if (w % binning != 0 || h % binning != 0) throw DomainError("frame_bytes: binning must divide the frame dimensions");
    const std::int64_t bits = static_cast<std::int64_t>(n_cameras) * (w / binning) * (h / binning) * sensor.bit_depth;
    return (bits + 7) / 8;
}

double max_frame_rate(std::int64_t bytes, double bandwidth) {
    if (bytes <= 0 || !(bandwidth > 0.0)) throw DomainError("max_frame_rate: inputs must be positive");
    return bandwidth / static_cast<double>(bytes);
}

RecordingCapacity recording_capacity(std::int64_t bytes, double fps, double buffer) {
    if (bytes <= 0 || !(fps > 0.0) || !(buffer > 0.0)) throw DomainError("recording_capacity: inputs must be positive");
    RecordingCapacity r;
    r.frames = static_cast<std::int64_t>(std::floor(buffer / static_cast<double>(bytes)));
    r.seconds = static_cast<double>(r.frames) / fps;
    return r;
}

ThroughputReport throughput_report(const ArrayConfig& config, const ThroughputOptions& o) {
    config.validate();
    if (!(o.efficiency > 0.0 && o.efficiency <= 1.0)) throw DomainError("throughput: efficiency must be in (0, 1]");
    if (!(o.bandwidth_bytes_per_s > 0.0) || !(o.buffer_bytes > 0.0)) {
        throw DomainError("throughput: bandwidth and buffer must be positive");
    }
    ThroughputReport r;
    r.cameras = config.camera_count();
    r.binning = o.binning;
    r.frame_bytes = frame_bytes(config.sensor, r.cameras, o.binning, o.crop);
    r.efficiency = o.efficiency;
    r.effective_frame_bytes = static_cast<double>(r.frame_bytes) / o.efficiency;
    r.bandwidth_bytes_per_s = o.bandwidth_bytes_per_s;
    r.buffer_bytes = o.buffer_bytes;
    r.max_fps = o.bandwidth_bytes_per_s / r.effective_frame_bytes;
    r.fps = o.fps.value_or(r.max_fps);
    if (!(r.fps > 0.0)) throw DomainError("throughput: fps must be positive");
    r.buffer_frames = static_cast<std::int64_t>(std::floor(o.buffer_bytes / r.effective_frame_bytes));
    r.max_duration_s = static_cast<double>(r.buffer_frames) / r.fps;
    return r;
}

std::string ThroughputReport::to_csv() const {
    std::ostringstream os;
    os << std::setprecision(10) << "quantity,value\n"
       << "cameras," << cameras << '\n'
       << "binning," << binning << '\n'
       << "frame_bytes," << frame_bytes << '\n'
       << "efficiency," << efficiency << '\n'
       << "effective_frame_bytes," << effective_frame_bytes << '\n'
       << "bandwidth_bytes_per_s," << bandwidth_bytes_per_s << '\n'
       << "max_fps," << max_fps << '\n'
       << "fps," << fps << '\n'
       << "buffer_bytes," << buffer_bytes << '\n'
       << "buffer_frames," << buffer_frames << '\n'
       << "max_duration_s," << max_duration_s << '\n';
    return os.str();
}

}  // namespace mcam
