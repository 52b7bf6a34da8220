#include "mcam/registration.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "fft.hpp"
#include "mcam/parallel.hpp"

namespace mcam {

namespace {

constexpr int kMinOverlapPx = 32;
constexpr double kSecondPeakFloor = 0.01;

struct Overlap {
    int ax, ay;  // start in a
    int bx, by;  // start in b
    int w, h;
};

std::optional<Overlap> overlap_of(const Image& a, const Image& b, int nx, int ny) {
    const int x0 = std::max(0, nx);
    const int x1 = std::min(a.width(), nx + b.width());
    const int y0 = std::max(0, ny);
    const int y1 = std::min(a.height(), ny + b.height());
    if (x1 <= x0 || y1 <= y0) return std::nullopt;
    return Overlap{x0, y0, x0 - nx, y0 - ny, x1 - x0, y1 - y0};
}

struct CropStats {
    std::vector<double> values;  // zero-mean
    double mean = 0.0;
    double variance = 0.0;
};

CropStats crop_stats(const Image& img, int x0, int y0, int w, int h) {
    CropStats s;
    s.values.resize(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
    double sum = 0.0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double v = img.at(x0 + x, y0 + y);
            s.values[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)] = v;
            sum += v;
        }
    }
    s.mean = sum / static_cast<double>(s.values.size());
    double ss = 0.0;
    for (double& v : s.values) {
        v -= s.mean;
        ss += v * v;
    }
    s.variance = ss / static_cast<double>(s.values.size());
    return s;
}

// Masked NCC between two equally sized crops for |dx| <= sx, |dy| <= sy,
// where d is the displacement with A(x) = B(x - d). Returned row-major over
// (2sy+1) x (2sx+1).
std::vector<double> masked_ncc(const std::vector<double>& a, const std::vector<double>& b, int w, int h,
                               int sx, int sy) {
    const int nw = detail::good_fft_size(w + sx + 1);
    const int nh = detail::good_fft_size(h + sy + 1);
    detail::RealFft2d fft(nw, nh);
    const auto padded = [&](auto value_of) {
        std::vector<double> out(static_cast<std::size_t>(nw) * static_cast<std::size_t>(nh), 0.0);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                out[static_cast<std::size_t>(y) * static_cast<std::size_t>(nw) + static_cast<std::size_t>(x)] =
                    value_of(static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x));
            }
        }
        return out;
    };
    const auto a_hat = fft.forward(padded([&](std::size_t i) { return a[i]; }));
    const auto a2_hat = fft.forward(padded([&](std::size_t i) { return a[i] * a[i]; }));
    const auto b_hat = fft.forward(padded([&](std::size_t i) { return b[i]; }));
    const auto b2_hat = fft.forward(padded([&](std::size_t i) { return b[i] * b[i]; }));
    const auto m_hat = fft.forward(padded([](std::size_t) { return 1.0; }));

    const auto s_ab = detail::cross_correlate(fft, a_hat, b_hat);
    const auto s_a = detail::cross_correlate(fft, a_hat, m_hat);
    const auto s_aa = detail::cross_correlate(fft, a2_hat, m_hat);
    const auto s_b = detail::cross_correlate(fft, m_hat, b_hat);
    const auto s_bb = detail::cross_correlate(fft, m_hat, b2_hat);

    const int ow = 2 * sx + 1;
    std::vector<double> out(static_cast<std::size_t>(ow) * static_cast<std::size_t>(2 * sy + 1), -1.0);
    for (int dy = -sy; dy <= sy; ++dy) {
        for (int dx = -sx; dx <= sx; ++dx) {
            const int ix = (dx + nw) % nw;
            const int iy = (dy + nh) % nh;
            const std::size_t k = static_cast<std::size_t>(iy) * static_cast<std::size_t>(nw) + static_cast<std::size_t>(ix);
            const double n = static_cast<double>(w - std::abs(dx)) * static_cast<double>(h - std::abs(dy));
            const double num = s_ab[k] - s_a[k] * s_b[k] / n;
            const double va = s_aa[k] - s_a[k] * s_a[k] / n;
            const double vb = s_bb[k] - s_b[k] * s_b[k] / n;
            double ncc = -1.0;
            if (va > 1e-12 * n && vb > 1e-12 * n) ncc = num / std::sqrt(va * vb);
            out[static_cast<std::size_t>(dy + sy) * static_cast<std::size_t>(ow) + static_cast<std::size_t>(dx + sx)] =
                std::clamp(ncc, -1.0, 1.0);
        }
    }
    return out;
}

double parabolic_vertex(double left, double center, double right) {
    const double denom = left - 2.0 * center + right;
    if (!(denom < 0.0)) return 0.0;
    return std::clamp(0.5 * (left - right) / denom, -0.5, 0.5);
}

// Central-difference gradients of an image, edge-clamped.
std::pair<Image, Image> gradients(const Image& img) {
    Image gx(img.width(), img.height());
    Image gy(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const int xl = std::max(x - 1, 0), xr = std::min(x + 1, img.width() - 1);
            const int yu = std::max(y - 1, 0), yd = std::min(y + 1, img.height() - 1);
            gx.at(x, y) = static_cast<float>((img.at(xr, y) - img.at(xl, y)) / std::max(1, xr - xl));
            gy.at(x, y) = static_cast<float>((img.at(x, yd) - img.at(x, yu)) / std::max(1, yd - yu));
        }
    }
    return {std::move(gx), std::move(gy)};
}

// Gauss-Newton on a(p) ~ g * b(p - D) + o over the overlap interior.
std::optional<Vec2> refine_displacement(const Image& a, const Image& b, Vec2 d0, const Overlap& ov) {
    const auto [gx, gy] = gradients(b);
    const int margin = 2;
    Vec2 d = d0;
    double g = 1.0, o = 0.0;
    for (int iter = 0; iter < 20; ++iter) {
        Eigen::Matrix4d jtj = Eigen::Matrix4d::Zero();
        Eigen::Vector4d jtr = Eigen::Vector4d::Zero();
        int used = 0;
        for (int y = ov.ay + margin; y < ov.ay + ov.h - margin; ++y) {
            for (int x = ov.ax + margin; x < ov.ax + ov.w - margin; ++x) {
                const double qx = x - d.x;
                const double qy = y - d.y;
                if (qx < 1.0 || qy < 1.0 || qx > b.width() - 2.0 || qy > b.height() - 2.0) continue;
                const double bv = b.sample_bilinear(qx, qy);
                const double r = a.at(x, y) - (g * bv + o);
                const Eigen::Vector4d j(-g * gx.sample_bilinear(qx, qy), -g * gy.sample_bilinear(qx, qy), bv, 1.0);
                jtj += j * j.transpose();
                jtr += j * r;
                ++used;
            }
        }
        if (used < 64) return std::nullopt;
        const Eigen::Vector4d step = jtj.ldlt().solve(jtr);
        if (!step.allFinite()) return std::nullopt;
        d = d + Vec2{step(0), step(1)};
        g += step(2);
        o += step(3);
        if (std::hypot(step(0), step(1)) < 1e-5) break;
    }
    if (!(g > 0.0)) return std::nullopt;
    return d;
}

CameraIndex reference_camera() { return {0, 0}; }

std::vector<std::vector<CameraIndex>> components(const std::vector<CameraIndex>& cams,
                                                 const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
    std::vector<std::size_t> parent(cams.size());
    std::iota(parent.begin(), parent.end(), 0);
    const auto find = [&](std::size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    for (auto [i, j] : edges) parent[find(i)] = find(j);
    std::map<std::size_t, std::vector<CameraIndex>> groups;
    for (std::size_t i = 0; i < cams.size(); ++i) groups[find(i)].push_back(cams[i]);
    std::vector<std::vector<CameraIndex>> out;
    for (auto& [root, g] : groups) out.push_back(std::move(g));
    std::sort(out.begin(), out.end());
    return out;
}

// Minimizes sum w (x_j - x_i - m)^2 over x with x[pinned] = 0, one column
// of right-hand sides per coordinate.
Eigen::MatrixXd solve_differences(std::size_t n, std::size_t pinned,
                                  const std::vector<std::tuple<std::size_t, std::size_t, double>>& edges,
                                  const Eigen::MatrixXd& measured, double ridge) {
    const auto unknown = [&](std::size_t i) -> long { return i == pinned ? -1 : static_cast<long>(i < pinned ? i : i - 1); };
    const long m = static_cast<long>(n) - 1;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<long>(n), measured.cols());
    if (m <= 0) return out;
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(m, measured.cols());
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const auto [i, j, w] = edges[e];
        const long ui = unknown(i), uj = unknown(j);
        if (ui >= 0) trip.emplace_back(ui, ui, w);
        if (uj >= 0) trip.emplace_back(uj, uj, w);
        if (ui >= 0 && uj >= 0) {
            trip.emplace_back(ui, uj, -w);
            trip.emplace_back(uj, ui, -w);
        }
        for (long c = 0; c < measured.cols(); ++c) {
            const double v = w * measured(static_cast<long>(e), c);
            if (uj >= 0) rhs(uj, c) += v;
            if (ui >= 0) rhs(ui, c) -= v;
        }
    }
    if (ridge > 0.0) {
        for (long k = 0; k < m; ++k) trip.emplace_back(k, k, ridge);
    }
    Eigen::SparseMatrix<double> a(m, m);
    a.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(a);
    if (solver.info() != Eigen::Success) throw PipelineError("global pose solve: factorization failed");
    const Eigen::MatrixXd x = solver.solve(rhs);
    for (std::size_t i = 0; i < n; ++i) {
        const long u = unknown(i);
        if (u >= 0) out.row(static_cast<long>(i)) = x.row(u);
    }
    return out;
}

Vec2 window_origin(const SensorWindow& w) { return {static_cast<double>(w.x0), static_cast<double>(w.y0)}; }

}  // namespace

PairOffset estimate_pairwise_offset(const CameraFrame& a, const CameraFrame& b, Vec2 nominal_px,
                                    const RegistrationOptions& options) {
    if (a.binning != b.binning) throw DomainError("estimate_pairwise_offset: frames differ in binning");
    PairOffset out;
    out.camera_a = a.camera;
    out.camera_b = b.camera;
    out.nominal_px = nominal_px;
    out.window_a = a.window;
    out.window_b = b.window;
    out.binning = a.binning;

    const int nx = static_cast<int>(std::lround(nominal_px.x));
    const int ny = static_cast<int>(std::lround(nominal_px.y));
    const auto ov = overlap_of(a.pixels, b.pixels, nx, ny);
    if (!ov) return out;
    const CropStats ca = crop_stats(a.pixels, ov->ax, ov->ay, ov->w, ov->h);
    const CropStats cb = crop_stats(b.pixels, ov->bx, ov->by, ov->w, ov->h);
    out.mean_a = ca.mean;
    out.mean_b = cb.mean;
    if (ov->w < kMinOverlapPx || ov->h < kMinOverlapPx) return out;
    if (ca.variance < options.flat_variance || cb.variance < options.flat_variance) return out;

    const int sx = std::max(1, std::min(options.max_search_px, ov->w / 4));
    const int sy = std::max(1, std::min(options.max_search_px, ov->h / 4));
    const std::vector<double> ncc = masked_ncc(ca.values, cb.values, ov->w, ov->h, sx, sy);
    const int ow = 2 * sx + 1;
    const int oh = 2 * sy + 1;
    const auto at = [&](int x, int y) { return ncc[static_cast<std::size_t>(y) * static_cast<std::size_t>(ow) + static_cast<std::size_t>(x)]; };

    int px = 0, py = 0;
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            if (at(x, y) > at(px, py)) {
                px = x;
                py = y;
            }
        }
    }
    const double peak = at(px, py);
    double second = kSecondPeakFloor;
    for (int y = 1; y + 1 < oh; ++y) {
        for (int x = 1; x + 1 < ow; ++x) {
            if (x == px && y == py) continue;
            const double v = at(x, y);
            bool is_max = true;
            for (int j = -1; j <= 1 && is_max; ++j) {
                for (int i = -1; i <= 1; ++i) {
                    if ((i || j) && at(x + i, y + j) >= v) {
                        is_max = false;
                        break;
                    }
                }
            }
            if (is_max) second = std::max(second, v);
        }
    }
    out.peak_ncc = peak;
    out.peak_ratio = peak > 0.0 ? std::max(1.0, peak / second) : 1.0;
    out.confidence = 1.0 - 1.0 / out.peak_ratio;
    const bool on_edge = px == 0 || py == 0 || px == ow - 1 || py == oh - 1;
    if (on_edge || out.peak_ratio < options.min_peak_ratio) {
        out.low_confidence = true;
        return out;
    }

    Vec2 d{static_cast<double>(px - sx), static_cast<double>(py - sy)};
    d.x += parabolic_vertex(at(px - 1, py), peak, at(px + 1, py));
    d.y += parabolic_vertex(at(px, py - 1), peak, at(px, py + 1));
    Vec2 displacement = Vec2{static_cast<double>(nx), static_cast<double>(ny)} + d;
    if (options.gradient_refine) {
        if (auto refined = refine_displacement(a.pixels, b.pixels, displacement, *ov)) {
            const Vec2 delta = *refined - displacement;
            if (std::hypot(delta.x, delta.y) < 1.0) displacement = *refined;
        }
    }
    out.offset_px = displacement - nominal_px;
    out.low_confidence = false;
    return out;
}

std::size_t StitchCalibration::index_of(CameraIndex c) const {
    const auto it = std::find(cameras.begin(), cameras.end(), c);
    if (it == cameras.end()) throw DomainError("calibration has no camera " + to_string(c));
    return static_cast<std::size_t>(it - cameras.begin());
}

StitchCalibration nominal_calibration(const ArrayConfig& config, double depth_um) {
    config.validate();
    StitchCalibration cal;
    cal.cameras = config.cameras();
    cal.native_pixel_um = config.object_pixel().in_um();
    cal.valid_for_depth_um = depth_um;
    cal.sensor_center_px = sensor_center_px(config.sensor);
    const Vec2 ref = config.camera_axis(reference_camera());
    cal.reference_origin_um = ref - cal.sensor_center_px * cal.native_pixel_um;
    for (CameraIndex c : cal.cameras) {
        cal.anchors_px.push_back((config.camera_axis(c) - ref) / cal.native_pixel_um);
        cal.gains.push_back(1.0);
    }
    return cal;
}

Vec2 tile_origin_px(const StitchCalibration& calibration, const CameraFrame& frame) {
    return calibration.anchor(frame.camera) + window_origin(frame.window) +
           frame.stage.lateral() / calibration.native_pixel_um;
}

StitchCalibration solve_global_poses(const std::vector<PairOffset>& offsets, const ArrayConfig& config,
                                     const RegistrationOptions& options) {
    StitchCalibration cal = nominal_calibration(config);
    const std::size_t n = cal.cameras.size();
    const std::size_t pinned = cal.index_of(reference_camera());

    std::vector<std::pair<std::size_t, std::size_t>> links;
    std::vector<std::tuple<std::size_t, std::size_t, double>> edges;
    std::vector<std::tuple<std::size_t, std::size_t, double>> gain_edges;
    Eigen::MatrixXd measured(static_cast<long>(offsets.size()), 2);
    Eigen::MatrixXd log_ratio(static_cast<long>(offsets.size()), 1);
    for (std::size_t e = 0; e < offsets.size(); ++e) {
        const PairOffset& p = offsets[e];
        const std::size_t i = cal.index_of(p.camera_a);
        const std::size_t j = cal.index_of(p.camera_b);
        if (i == j) throw DomainError("solve_global_poses: pair joins a camera to itself");
        links.emplace_back(i, j);
        const bool confident = !p.low_confidence && p.peak_ratio >= options.min_peak_ratio;
        const double w = confident ? p.confidence : options.fallback_weight;
        edges.emplace_back(i, j, w);
        // tile_b - tile_a = displacement * binning, tile = anchor + window.
        const Vec2 disp = confident ? p.displacement_px() : p.nominal_px;
        const Vec2 d = disp * static_cast<double>(p.binning) - (window_origin(p.window_b) - window_origin(p.window_a));
        measured(static_cast<long>(e), 0) = d.x;
        measured(static_cast<long>(e), 1) = d.y;
        const bool usable = p.mean_a > 0.0 && p.mean_b > 0.0;
        gain_edges.emplace_back(i, j, usable ? w : 0.0);
        log_ratio(static_cast<long>(e), 0) = usable ? std::log(p.mean_a / p.mean_b) : 0.0;
    }

    const auto comps = components(cal.cameras, links);
    if (comps.size() > 1) {
        std::ostringstream msg;
        msg << "camera graph is disconnected (" << comps.size() << " components):";
        for (const auto& c : comps) {
            msg << " {";
            for (std::size_t k = 0; k < c.size(); ++k) msg << (k ? " " : "") << to_string(c[k]);
            msg << "}";
        }
        throw PipelineError(msg.str());
    }

    const Eigen::MatrixXd anchors = solve_differences(n, pinned, edges, measured, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        cal.anchors_px[k] = {anchors(static_cast<long>(k), 0), anchors(static_cast<long>(k), 1)};
    }
    const Eigen::MatrixXd log_gain = solve_differences(n, pinned, gain_edges, log_ratio, 1e-9);
    const double mean_log = log_gain.col(0).mean();
    for (std::size_t k = 0; k < n; ++k) cal.gains[k] = std::exp(log_gain(static_cast<long>(k), 0) - mean_log);

    double sw = 0.0, swr = 0.0;
    for (std::size_t e = 0; e < offsets.size(); ++e) {
        const auto [i, j, w] = edges[e];
        if (offsets[e].low_confidence) continue;
        const Vec2 r = cal.anchors_px[j] - cal.anchors_px[i] -
                       Vec2{measured(static_cast<long>(e), 0), measured(static_cast<long>(e), 1)};
        sw += w;
        swr += w * dot(r, r);
    }
    cal.residual_rms_px = sw > 0.0 ? std::sqrt(swr / sw) : 0.0;
    cal.pairs = offsets;
    return cal;
}

StitchCalibration calibrate(const FrameSet& frames, const ArrayConfig& config, const RegistrationOptions& options) {
    config.validate();
    if (classify_regime(config).aggregate() == Regime::Tiled) {
        throw DomainError("calibrate: tiled configurations have no inter-camera overlap; calibrate per scan position");
    }
    if (frames.frames.size() != static_cast<std::size_t>(config.camera_count())) {
        throw DomainError("calibrate: frame set does not hold one frame per camera");
    }
    const StitchCalibration nominal = nominal_calibration(config, frames.stage_offset.z_um);
    std::vector<std::pair<CameraIndex, CameraIndex>> pairs;
    for (CameraIndex c : config.cameras()) {
        if (c.col + 1 < config.layout.cols) pairs.push_back({c, {c.row, c.col + 1}});
        if (c.row + 1 < config.layout.rows) pairs.push_back({c, {c.row + 1, c.col}});
    }
    std::vector<PairOffset> offsets(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t k) {
        const CameraFrame& a = frames.frame(pairs[k].first);
        const CameraFrame& b = frames.frame(pairs[k].second);
        const Vec2 expected = (tile_origin_px(nominal, b) - tile_origin_px(nominal, a)) / static_cast<double>(a.binning);
        offsets[k] = estimate_pairwise_offset(a, b, expected, options);
    });
    StitchCalibration cal = solve_global_poses(offsets, config, options);
    cal.valid_for_depth_um = frames.stage_offset.z_um;
    return cal;
}

std::vector<PlacedTile> place_frames(const FrameSet& frames, const StitchCalibration& calibration) {
    std::vector<PlacedTile> tiles;
    tiles.reserve(frames.frames.size());
    for (const CameraFrame& f : frames.frames) {
        tiles.push_back({&f, tile_origin_px(calibration, f), calibration.gain(f.camera)});
    }
    return tiles;
}

namespace {

struct Layout {
    int binning = 1;
    double u0 = 0.0, v0 = 0.0;  // composite grid origin in composite pixels
    int width = 0, height = 0;
    double ramp_x = 8.0, ramp_y = 8.0;
};

struct TileRect {
    double x0, y0;  // composite pixels
    int w, h;
};

std::vector<TileRect> tile_rects(const std::vector<PlacedTile>& tiles, int binning) {
    std::vector<TileRect> out;
    for (const PlacedTile& t : tiles) {
        out.push_back({t.origin_px.x / binning, t.origin_px.y / binning, t.frame->pixels.width(),
                       t.frame->pixels.height()});
    }
    return out;
}

Layout layout_of(const std::vector<PlacedTile>& tiles, const CompositeOptions& options) {
    if (tiles.empty()) throw DomainError("composite: no tiles");
    Layout l;
    l.binning = tiles.front().frame->binning;
    for (const PlacedTile& t : tiles) {
        if (!t.frame) throw DomainError("composite: null tile");
        if (t.frame->binning != l.binning) throw DomainError("composite: tiles differ in binning");
    }
    const std::vector<TileRect> rects = tile_rects(tiles, l.binning);
    double xmin = 1e300, ymin = 1e300, xmax = -1e300, ymax = -1e300;
    for (const TileRect& r : rects) {
        xmin = std::min(xmin, r.x0);
        ymin = std::min(ymin, r.y0);
        xmax = std::max(xmax, r.x0 + r.w);
        ymax = std::max(ymax, r.y0 + r.h);
    }
    l.u0 = std::floor(xmin + 1e-9);
    l.v0 = std::floor(ymin + 1e-9);
    l.width = static_cast<int>(std::ceil(xmax - 1e-9) - l.u0);
    l.height = static_cast<int>(std::ceil(ymax - 1e-9) - l.v0);

    // Ramp: half the narrowest overlap between neighbouring tiles.
    double ox = 1e300, oy = 1e300;
    int min_w = rects.front().w, min_h = rects.front().h;
    for (std::size_t i = 0; i < rects.size(); ++i) {
        min_w = std::min(min_w, rects[i].w);
        min_h = std::min(min_h, rects[i].h);
        for (std::size_t j = i + 1; j < rects.size(); ++j) {
            const double wx = std::min(rects[i].x0 + rects[i].w, rects[j].x0 + rects[j].w) - std::max(rects[i].x0, rects[j].x0);
            const double wy = std::min(rects[i].y0 + rects[i].h, rects[j].y0 + rects[j].h) - std::max(rects[i].y0, rects[j].y0);
            if (wx <= 0.0 || wy <= 0.0) continue;
            if (wx < wy) ox = std::min(ox, wx);
            else oy = std::min(oy, wy);
        }
    }
    const double min_ramp = options.min_ramp_px;
    l.ramp_x = std::min(std::max(min_ramp, ox < 1e300 ? ox / 2.0 : 0.0), min_w / 2.0);
    l.ramp_y = std::min(std::max(min_ramp, oy < 1e300 ? oy / 2.0 : 0.0), min_h / 2.0);
    return l;
}

// Distance of the pixel centre to the tile edge plus half a pixel, so a
// composite pixel centred exactly on a footprint edge still gets weight.
double feather(double local, int size, double ramp) {
    const double edge = std::min(local + 1.0, size - local);
    return std::clamp(edge / ramp, 0.0, 1.0);
}

// Calls fn(tile index, local x, local y, weight) for each tile covering
// composite pixel (u, v).
template <typename Fn>
void for_each_cover(const std::vector<TileRect>& rects, const std::vector<std::size_t>& candidates, const Layout& l,
                    bool feathered, int u, int v, Fn&& fn) {
    const double cu = l.u0 + u + 0.5;
    const double cv = l.v0 + v + 0.5;
    for (std::size_t k : candidates) {
        const TileRect& r = rects[k];
        const double x = cu - r.x0 - 0.5;
        const double y = cv - r.y0 - 0.5;
        if (x < -0.5 || y < -0.5 || x >= r.w - 0.5 || y >= r.h - 0.5) continue;
        const double w = feathered ? feather(x, r.w, l.ramp_x) * feather(y, r.h, l.ramp_y) : 1.0;
        if (w > 0.0) fn(k, x, y, w);
    }
}

std::vector<std::size_t> tiles_on_row(const std::vector<TileRect>& rects, const Layout& l, int v) {
    const double cv = l.v0 + v + 0.5;
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < rects.size(); ++k) {
        if (cv >= rects[k].y0 && cv < rects[k].y0 + rects[k].h) out.push_back(k);
    }
    return out;
}

}  // namespace

Composite composite_tiles(const std::vector<PlacedTile>& tiles, const StitchCalibration& calibration,
                          const CompositeOptions& options) {
    const Layout l = layout_of(tiles, options);
    const std::vector<TileRect> rects = tile_rects(tiles, l.binning);
    Composite out;
    out.pixel_um = calibration.native_pixel_um * l.binning;
    out.origin_um = calibration.reference_origin_um + Vec2{l.u0, l.v0} * out.pixel_um;
    out.weight_map_used = options.feather;
    out.raster = Image(l.width, l.height);
    out.weight_sum = Image(l.width, l.height);
    parallel_for(static_cast<std::size_t>(l.height), [&](std::size_t row) {
        const int v = static_cast<int>(row);
        const std::vector<std::size_t> cand = tiles_on_row(rects, l, v);
        for (int u = 0; u < l.width; ++u) {
            double sw = 0.0, swv = 0.0;
            for_each_cover(rects, cand, l, options.feather, u, v, [&](std::size_t k, double x, double y, double w) {
                sw += w;
                swv += w * tiles[k].gain * tiles[k].frame->pixels.sample_bicubic(x, y);
            });
            out.weight_sum.at(u, v) = static_cast<float>(sw);
            out.raster.at(u, v) = sw > 0.0 ? static_cast<float>(swv / sw) : 0.0f;
        }
    });
    return out;
}

Composite composite(const FrameSet& frames, const StitchCalibration& calibration, const CompositeOptions& options) {
    if (frames.frames.empty()) throw DomainError("composite: empty frame set");
    return composite_tiles(place_frames(frames, calibration), calibration, options);
}

Image blend_weight_total(const std::vector<PlacedTile>& tiles, const StitchCalibration&,
                         const CompositeOptions& options) {
    const Layout l = layout_of(tiles, options);
    const std::vector<TileRect> rects = tile_rects(tiles, l.binning);
    Image out(l.width, l.height);
    parallel_for(static_cast<std::size_t>(l.height), [&](std::size_t row) {
        const int v = static_cast<int>(row);
        const std::vector<std::size_t> cand = tiles_on_row(rects, l, v);
        std::vector<double> w;
        for (int u = 0; u < l.width; ++u) {
            w.clear();
            for_each_cover(rects, cand, l, options.feather, u, v,
                           [&](std::size_t, double, double, double wk) { w.push_back(wk); });
            const double sw = std::accumulate(w.begin(), w.end(), 0.0);
            double total = 0.0;
            for (double wk : w) total += wk / sw;
            out.at(u, v) = static_cast<float>(total);
        }
    });
    return out;
}

int Pyramid::tiles_x(int level) const {
    const Image& img = levels.at(static_cast<std::size_t>(level));
    return (img.width() + tile_px - 1) / tile_px;
}

int Pyramid::tiles_y(int level) const {
    const Image& img = levels.at(static_cast<std::size_t>(level));
    return (img.height() + tile_px - 1) / tile_px;
}

Pyramid build_pyramid(const Composite& composite, int tile_px) {
    if (tile_px < 1 || (tile_px & (tile_px - 1)) != 0) throw DomainError("build_pyramid: tile_px must be a power of two");
    if (composite.raster.empty()) throw DomainError("build_pyramid: empty composite");
    Pyramid p;
    p.tile_px = tile_px;
    p.origin_um = composite.origin_um;
    p.pixel_um = composite.pixel_um;
    p.levels.push_back(composite.raster);
    while (p.levels.back().width() > tile_px || p.levels.back().height() > tile_px) {
        const Image& src = p.levels.back();
        Image dst((src.width() + 1) / 2, (src.height() + 1) / 2);
        for (int y = 0; y < dst.height(); ++y) {
            for (int x = 0; x < dst.width(); ++x) {
                double s = 0.0;
                int n = 0;
                for (int j = 0; j < 2; ++j) {
                    for (int i = 0; i < 2; ++i) {
                        const int sx = 2 * x + i, sy = 2 * y + j;
                        if (sx < src.width() && sy < src.height()) {
                            s += src.at(sx, sy);
                            ++n;
                        }
                    }
                }
                dst.at(x, y) = static_cast<float>(s / n);
            }
        }
        p.levels.push_back(std::move(dst));
    }
    return p;
}

std::vector<GroupContrast> measure_group_contrast(const Composite& composite, const TargetLayout& layout,
                                                  double threshold) {
    std::vector<GroupContrast> out;
    const Image& img = composite.raster;
    for (const TargetGroup& g : layout.groups) {
        GroupContrast gc{g.spacing_um, g.orientation, 0.0, false};
        const Vec2 p0 = (g.min_um - composite.origin_um) / composite.pixel_um;
        const Vec2 p1 = (g.max_um - composite.origin_um) / composite.pixel_um;
        const bool vertical = g.orientation == BarOrientation::Vertical;
        // Profile axis: pixels fully inside the group. Averaging axis: central 80%.
        const double a0 = vertical ? p0.x : p0.y, a1 = vertical ? p1.x : p1.y;
        const double b0 = vertical ? p0.y : p0.x, b1 = vertical ? p1.y : p1.x;
        const double trim = 0.1 * (b1 - b0);
        const int i0 = std::max(0, static_cast<int>(std::ceil(a0 - 1e-9)));
        const int i1 = std::min(vertical ? img.width() : img.height(), static_cast<int>(std::floor(a1 + 1e-9)));
        const int j0 = std::max(0, static_cast<int>(std::ceil(b0 + trim)));
        const int j1 = std::min(vertical ? img.height() : img.width(), static_cast<int>(std::floor(b1 - trim)));
        if (i1 - i0 >= 2 && j1 - j0 >= 1) {
            double lo = 1e300, hi = -1e300;
            for (int i = i0; i < i1; ++i) {
                double s = 0.0;
                for (int j = j0; j < j1; ++j) s += vertical ? img.at(i, j) : img.at(j, i);
                const double m = s / (j1 - j0);
                lo = std::min(lo, m);
                hi = std::max(hi, m);
            }
            gc.contrast = hi + lo > 0.0 ? (hi - lo) / (hi + lo) : 0.0;
        }
        gc.resolved = gc.contrast >= threshold;
        out.push_back(gc);
    }
    return out;
}

double measure_resolution(const Composite& composite, const TargetLayout& layout, double threshold) {
    double best = std::numeric_limits<double>::infinity();
    for (const GroupContrast& g : measure_group_contrast(composite, layout, threshold)) {
        if (g.resolved) best = std::min(best, g.spacing_um);
    }
    return best;
}

void write_calibration(std::ostream& out, const StitchCalibration& c) {
    out << std::setprecision(17);
    out << "mcam-calibration v1\n";
    out << "native_pixel_um " << c.native_pixel_um << "\n";
    out << "valid_for_depth_um " << c.valid_for_depth_um << "\n";
    out << "reference_origin_um " << c.reference_origin_um.x << " " << c.reference_origin_um.y << "\n";
    out << "sensor_center_px " << c.sensor_center_px.x << " " << c.sensor_center_px.y << "\n";
    out << "residual_rms_px " << c.residual_rms_px << "\n";
    out << "cameras " << c.cameras.size() << "\n";
    for (std::size_t k = 0; k < c.cameras.size(); ++k) {
        out << c.cameras[k].row << " " << c.cameras[k].col << " " << c.anchors_px[k].x << " " << c.anchors_px[k].y
            << " " << c.gains[k] << "\n";
    }
}

StitchCalibration read_calibration(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "mcam-calibration v1") {
        throw IoError("calibration: missing 'mcam-calibration v1' header");
    }
    StitchCalibration c;
    const auto expect = [&](const char* key) -> std::istringstream {
        if (!std::getline(in, line)) throw IoError(std::string("calibration: missing ") + key);
        std::istringstream ls(line);
        std::string k;
        ls >> k;
        if (k != key) throw IoError("calibration: expected '" + std::string(key) + "', got '" + k + "'");
        return ls;
    };
    const auto check = [](std::istringstream& ls, const char* key) {
        if (ls.fail()) throw IoError(std::string("calibration: malformed ") + key);
    };
    {
        auto ls = expect("native_pixel_um");
        ls >> c.native_pixel_um;
        check(ls, "native_pixel_um");
    }
    {
        auto ls = expect("valid_for_depth_um");
        ls >> c.valid_for_depth_um;
        check(ls, "valid_for_depth_um");
    }
    {
        auto ls = expect("reference_origin_um");
        ls >> c.reference_origin_um.x >> c.reference_origin_um.y;
        check(ls, "reference_origin_um");
    }
    {
        auto ls = expect("sensor_center_px");
        ls >> c.sensor_center_px.x >> c.sensor_center_px.y;
        check(ls, "sensor_center_px");
    }
    {
        auto ls = expect("residual_rms_px");
        ls >> c.residual_rms_px;
        check(ls, "residual_rms_px");
    }
    std::size_t n = 0;
    {
        auto ls = expect("cameras");
        ls >> n;
        check(ls, "cameras");
    }
    for (std::size_t k = 0; k < n; ++k) {
        if (!std::getline(in, line)) throw IoError("calibration: truncated camera table");
        std::istringstream ls(line);
        CameraIndex ci;
        Vec2 a;
        double g = 0.0;
        ls >> ci.row >> ci.col >> a.x >> a.y >> g;
        if (ls.fail() || !(g > 0.0)) throw IoError("calibration: malformed camera line '" + line + "'");
        c.cameras.push_back(ci);
        c.anchors_px.push_back(a);
        c.gains.push_back(g);
    }
    if (!(c.native_pixel_um > 0.0)) throw IoError("calibration: native_pixel_um must be > 0");
    return c;
}

}  // namespace mcam
