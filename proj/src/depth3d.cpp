#include "mcam/depth3d.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>

#include "mcam/parallel.hpp"

namespace mcam {

namespace {

Vec2 window_origin(const SensorWindow& w) { return {static_cast<double>(w.x0), static_cast<double>(w.y0)}; }

// Frame pixel (centre-based) to native sensor corner coordinates.
Vec2 native_px(const CameraFrame& f, Vec2 p) {
    return (p + Vec2{0.5, 0.5}) * static_cast<double>(f.binning) + window_origin(f.window);
}

double norm(Vec2 v) { return std::sqrt(dot(v, v)); }

double median(std::vector<double> v) {
    const std::size_t n = v.size();
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n / 2), v.end());
    const double hi = v[n / 2];
    if (n % 2 == 1) return hi;
    return 0.5 * (hi + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n / 2)));
}

struct Corner {
    int x, y;
    double response;
};

// Minimum eigenvalue of the 5x5 structure tensor, non-maximum suppressed.
std::vector<Corner> detect_corners(const Image& img, int margin, double fraction, int max_points) {
    const int w = img.width(), h = img.height();
    Image ixx(w, h), iyy(w, h), ixy(w, h);
    for (int y = 1; y + 1 < h; ++y) {
        for (int x = 1; x + 1 < w; ++x) {
            const double gx = 0.5 * (img.at(x + 1, y) - img.at(x - 1, y));
            const double gy = 0.5 * (img.at(x, y + 1) - img.at(x, y - 1));
            ixx.at(x, y) = static_cast<float>(gx * gx);
            iyy.at(x, y) = static_cast<float>(gy * gy);
            ixy.at(x, y) = static_cast<float>(gx * gy);
        }
    }
    constexpr int r = 2;
    Image resp(w, h);
    double peak = 0.0;
    for (int y = std::max(margin, r + 1); y < h - std::max(margin, r + 1); ++y) {
        for (int x = std::max(margin, r + 1); x < w - std::max(margin, r + 1); ++x) {
            double a = 0, b = 0, c = 0;
            for (int dy = -r; dy <= r; ++dy) {
                for (int dx = -r; dx <= r; ++dx) {
                    a += ixx.at(x + dx, y + dy);
                    b += iyy.at(x + dx, y + dy);
                    c += ixy.at(x + dx, y + dy);
                }
            }
            const double l = 0.5 * (a + b) - std::sqrt(0.25 * (a - b) * (a - b) + c * c);
            resp.at(x, y) = static_cast<float>(l);
            peak = std::max(peak, l);
        }
    }
    std::vector<Corner> out;
    if (peak <= 0.0) return out;
    const double threshold = fraction * peak;
    constexpr int nms = 4;
    for (int y = margin; y < h - margin; ++y) {
        for (int x = margin; x < w - margin; ++x) {
            const float v = resp.at(x, y);
            if (v <= threshold) continue;
            bool is_max = true;
            for (int dy = -nms; dy <= nms && is_max; ++dy) {
                for (int dx = -nms; dx <= nms; ++dx) {
                    const int xx = x + dx, yy = y + dy;
                    if ((dx == 0 && dy == 0) || xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
                    const float o = resp.at(xx, yy);
                    // Ties go to the earlier pixel in scan order.
                    if (o > v || (o == v && (dy < 0 || (dy == 0 && dx < 0)))) {
                        is_max = false;
                        break;
                    }
                }
            }
            if (is_max) out.push_back({x, y, v});
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const Corner& a, const Corner& b) { return a.response > b.response; });
    if (static_cast<int>(out.size()) > max_points) out.resize(static_cast<std::size_t>(max_points));
    return out;
}

struct Patch {
    std::vector<double> v;
    double mean = 0.0;
    double norm = 0.0;  // sqrt of the centred sum of squares
};

// Template sampled bilinearly around a sub-pixel centre.
Patch window_at(const Image& img, Vec2 c, int half) {
    Patch p;
    for (int dy = -half; dy <= half; ++dy) {
        for (int dx = -half; dx <= half; ++dx) p.v.push_back(img.sample_bilinear(c.x + dx, c.y + dy));
    }
    p.mean = std::accumulate(p.v.begin(), p.v.end(), 0.0) / static_cast<double>(p.v.size());
    double ss = 0.0;
    for (double& x : p.v) {
        x -= p.mean;
        ss += x * x;
    }
    p.norm = std::sqrt(ss);
    return p;
}

bool inside(const Image& img, Vec2 c, double half) {
    return c.x - half >= 0.0 && c.y - half >= 0.0 && c.x + half <= img.width() - 1.0 &&
           c.y + half <= img.height() - 1.0;
}

// NCC of a centred template against img sampled bilinearly around c.
double ncc_at(const Patch& t, const Image& img, Vec2 c, int half) {
    std::vector<double> s;
    s.reserve(t.v.size());
    for (int dy = -half; dy <= half; ++dy) {
        for (int dx = -half; dx <= half; ++dx) s.push_back(img.sample_bilinear(c.x + dx, c.y + dy));
    }
    const double m = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
    double num = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double d = s[i] - m;
        num += t.v[i] * d;
        ss += d * d;
    }
    if (ss <= 0.0 || t.norm <= 0.0) return 0.0;
    return num / (t.norm * std::sqrt(ss));
}

double parabola_vertex(double ym, double y0, double yp) {
    const double den = ym - 2.0 * y0 + yp;
    if (den >= 0.0) return 0.0;
    return std::clamp(0.5 * (ym - yp) / den, -0.5, 0.5);
}

// Gauss-Newton on position, gain and bias: A(pa + w) ~ g * B(q + w) + o.
std::optional<Vec2> refine_lk(const Image& a, Vec2 pa, const Image& b, Vec2 q0, int half) {
    Vec2 q = q0;
    double g = 1.0, o = 0.0;
    constexpr double eps = 0.25;
    for (int iter = 0; iter < 20; ++iter) {
        if (!inside(b, q, half + 1.0)) return std::nullopt;
        Eigen::Matrix4d jtj = Eigen::Matrix4d::Zero();
        Eigen::Vector4d jtr = Eigen::Vector4d::Zero();
        for (int dy = -half; dy <= half; ++dy) {
            for (int dx = -half; dx <= half; ++dx) {
                const double x = q.x + dx, y = q.y + dy;
                const double bv = b.sample_bicubic(x, y);
                const double gx = (b.sample_bicubic(x + eps, y) - b.sample_bicubic(x - eps, y)) / (2.0 * eps);
                const double gy = (b.sample_bicubic(x, y + eps) - b.sample_bicubic(x, y - eps)) / (2.0 * eps);
                const double r = a.sample_bilinear(pa.x + dx, pa.y + dy) - g * bv - o;
                const Eigen::Vector4d j{g * gx, g * gy, bv, 1.0};
                jtj += j * j.transpose();
                jtr += j * r;
            }
        }
        const Eigen::Vector4d step = jtj.ldlt().solve(jtr);
        if (!step.allFinite()) return std::nullopt;
        q = q + Vec2{step[0], step[1]};
        g += step[2];
        o += step[3];
        if (std::abs(step[0]) < 1e-5 && std::abs(step[1]) < 1e-5) break;
    }
    return q;
}

void check_pair(const ArrayConfig& config, CameraIndex a, CameraIndex b, double min_overlap) {
    const int dr = std::abs(a.row - b.row), dc = std::abs(a.col - b.col);
    if (dr > 1 || dc > 1) {
        throw DomainError("match_features: cameras " + to_string(a) + " and " + to_string(b) +
                          " are neither adjacent nor diagonal");
    }
    const FovPair fov = camera_object_fov(config);
    const double ox = 1.0 - config.layout.pitch_x.in_um() / fov.x.in_um();
    const double oy = 1.0 - config.layout.pitch_y.in_um() / fov.y.in_um();
    if ((dc == 1 && ox < min_overlap) || (dr == 1 && oy < min_overlap)) {
        throw DomainError("match_features: cameras " + to_string(a) + " and " + to_string(b) +
                          " overlap less than the required fraction along the baseline");
    }
}

}  // namespace

Vec2 calibrated_axis_px(const StitchCalibration& calibration, const ArrayConfig& config, CameraIndex camera) {
    return (config.camera_axis(camera) - calibration.reference_origin_um) / calibration.native_pixel_um -
           calibration.anchor(camera);
}

StitchCalibration calibrate_pair(const CameraFrame& a, const CameraFrame& b, const ArrayConfig& config) {
    if (a.binning != b.binning) throw DomainError("calibrate_pair: frames differ in binning");
    StitchCalibration cal = nominal_calibration(config, a.stage.z_um);
    const Vec2 expected = (tile_origin_px(cal, b) - tile_origin_px(cal, a)) / static_cast<double>(a.binning);
    const PairOffset off = estimate_pairwise_offset(a, b, expected);
    if (off.low_confidence) {
        throw PipelineError("calibrate_pair: " + to_string(a.camera) + "/" + to_string(b.camera) +
                            " did not register (peak ratio " + std::to_string(off.peak_ratio) + ")");
    }
    const Vec2 anchor_b = cal.anchor(a.camera) + window_origin(a.window) - window_origin(b.window) +
                          off.displacement_px() * static_cast<double>(a.binning) +
                          (a.stage.lateral() - b.stage.lateral()) / cal.native_pixel_um;
    cal.anchors_px[cal.index_of(b.camera)] = anchor_b;
    cal.pairs.push_back(off);
    return cal;
}

MatchSet match_features(const CameraFrame& a, const CameraFrame& b, const StitchCalibration& calibration,
                        const ArrayConfig& config, const MatchOptions& options) {
    if (options.window_px < 3 || options.window_px % 2 == 0) {
        throw DomainError("match_features: window must be odd and at least 3 px");
    }
    if (a.binning != b.binning) throw DomainError("match_features: frames differ in binning");
    const bool self = a.camera == b.camera;
    if (!self) check_pair(config, a.camera, b.camera, options.min_overlap);

    MatchSet set;
    set.camera_a = a.camera;
    set.camera_b = b.camera;
    const Vec2 base = config.camera_axis(b.camera) - config.camera_axis(a.camera);
    set.baseline_um = norm(base);
    set.baseline_dir = self ? Vec2{1.0, 0.0} : base / set.baseline_um;
    const Vec2 u = set.baseline_dir;
    const Vec2 v{-u.y, u.x};

    const Vec2 ca = calibrated_axis_px(calibration, config, a.camera);
    const Vec2 cb = calibrated_axis_px(calibration, config, b.camera);
    const double bin = static_cast<double>(a.binning);
    const Vec2 shift = (tile_origin_px(calibration, a) - tile_origin_px(calibration, b)) / bin;

    const int half = options.window_px / 2;
    const std::vector<Corner> corners =
        detect_corners(a.pixels, half + 2, options.response_fraction, options.max_points);

    std::vector<std::optional<Match>> found(corners.size());
    parallel_for(corners.size(), [&](std::size_t k) {
        const Corner& cn = corners[k];
        const Patch t = window_at(a.pixels, {static_cast<double>(cn.x), static_cast<double>(cn.y)}, half);
        if (t.norm <= 1e-6) return;
        const Vec2 pa{static_cast<double>(cn.x), static_cast<double>(cn.y)};
        const Vec2 pb0 = pa + shift;  // focal-plane prediction
        const int S = options.search_px, C = options.cross_search_px;
        const int nt = 2 * S + 1, ns = 2 * C + 1;
        std::vector<double> score(static_cast<std::size_t>(nt * ns), -2.0);
        auto at = [&](int ti, int si) -> double& { return score[static_cast<std::size_t>(ti * ns + si)]; };
        int best_t = -1, best_s = -1;
        double best = -2.0;
        for (int ti = 0; ti < nt; ++ti) {
            for (int si = 0; si < ns; ++si) {
                const Vec2 q = pb0 - static_cast<double>(ti - S) * u + static_cast<double>(si - C) * v;
                if (!inside(b.pixels, q, half + 1.0)) continue;
                at(ti, si) = ncc_at(t, b.pixels, q, half);
                if (at(ti, si) > best) {
                    best = at(ti, si);
                    best_t = ti;
                    best_s = si;
                }
            }
        }
        if (best_t < 0 || best < options.min_ncc) return;
        // Uniqueness along the search line, away from the main peak.
        double second = -2.0;
        for (int ti = 0; ti < nt; ++ti) {
            if (std::abs(ti - best_t) <= 2) continue;
            for (int si = 0; si < ns; ++si) second = std::max(second, at(ti, si));
        }
        if (second > 0.0 && best / second < options.min_uniqueness) return;

        // A peak on the edge of the searched (or visible) range is usually a
        // feature whose true match lies outside it.
        auto valid = [&](int ti, int si) { return ti >= 0 && ti < nt && si >= 0 && si < ns && at(ti, si) > -2.0; };
        if (!valid(best_t - 1, best_s) || !valid(best_t + 1, best_s)) return;
        const double ft = parabola_vertex(at(best_t - 1, best_s), best, at(best_t + 1, best_s));
        double fs = 0.0;
        if (valid(best_t, best_s - 1) && valid(best_t, best_s + 1)) {
            fs = parabola_vertex(at(best_t, best_s - 1), best, at(best_t, best_s + 1));
        }
        const Vec2 q0 = pb0 - (best_t - S + ft) * u + (best_s - C + fs) * v;
        const auto refined = refine_lk(a.pixels, pa, b.pixels, q0, half);
        if (!refined || norm(*refined - q0) > 1.0) return;
        const Vec2 pb = *refined;
        if (!inside(b.pixels, pb, half)) return;

        // Reverse search: b's window must find its way back to pa.
        const Patch back = window_at(b.pixels, pb, half);
        int back_best = 0;
        double back_score = -2.0;
        for (int ti = -S; ti <= S; ++ti) {
            const Vec2 r = pa + static_cast<double>(ti) * u;
            if (!inside(a.pixels, r, half)) continue;
            const double sc = ncc_at(back, a.pixels, r, half);
            if (sc > back_score) {
                back_score = sc;
                back_best = ti;
            }
        }
        if (std::abs(back_best) > 1) return;

        Match m;
        m.point_a = pa;
        m.point_b = pb;
        m.native_a = native_px(a, pa);
        m.native_b = native_px(b, pb);
        m.d1_px = dot(m.native_a - ca, u);
        m.d2_px = -dot(m.native_b - cb, u);
        m.score = ncc_at(t, b.pixels, pb, half);
        found[k] = m;
    });
    for (auto& m : found) {
        if (m) set.matches.push_back(*m);
    }
    set.sparse = set.matches.size() < 8;
    return set;
}

Length triangulate(Length d1, Length d2, Length baseline, Length image_distance) {
    const Length sum = d1 + d2;
    if (!(sum.in_um() > 0.0)) {
        throw DomainError("triangulate: d1 + d2 must be positive (got " + std::to_string(sum.in_um()) + " um)");
    }
    if (!(baseline.in_um() > 0.0) || !(image_distance.in_um() > 0.0)) {
        throw DomainError("triangulate: baseline and image distance must be positive");
    }
    return Length::um(baseline.in_um() * image_distance.in_um() / sum.in_um());
}

Disparities analytic_disparities(const ArrayConfig& config, CameraIndex a, CameraIndex b, Vec2 point_um,
                                 double height_um) {
    const Vec2 base = config.camera_axis(b) - config.camera_axis(a);
    const double len = norm(base);
    if (!(len > 0.0)) throw DomainError("analytic_disparities: cameras coincide");
    const Vec2 u = base / len;
    const double k = config.image_distance().in_um() / (config.object_distance().in_um() - height_um);
    // Upright image of the point relative to each axis.
    const double d1 = dot(point_um - config.camera_axis(a), u) * k;
    const double d2 = -dot(point_um - config.camera_axis(b), u) * k;
    return {Length::um(d1), Length::um(d2)};
}

std::vector<double> match_heights(const MatchSet& set, const ArrayConfig& config) {
    const double delta = config.sensor.pixel_pitch.in_um();
    const Length p = Length::um(set.baseline_um);
    const double od = config.object_distance().in_um();
    std::vector<double> out;
    out.reserve(set.matches.size());
    for (const Match& m : set.matches) {
        const Length depth = triangulate(Length::um(m.d1_px * delta), Length::um(m.d2_px * delta), p,
                                         config.image_distance());
        out.push_back(od - depth.in_um());
    }
    return out;
}

std::string DepthExperimentReport::to_csv() const {
    std::ostringstream os;
    os << std::setprecision(10);
    os << "true_z_um,est_z_um,n_matches\n";
    for (const PlaneResult& p : planes) {
        os << p.true_z_um << ',';
        if (std::isfinite(p.est_z_um)) os << p.est_z_um;
        else os << "nan";
        os << ',' << p.n_matches << '\n';
    }
    os << "rmse_um," << rmse_um << '\n';
    return os.str();
}

std::vector<double> sweep_planes(double z_min_um, double z_max_um, double step_um) {
    if (!(step_um > 0.0)) throw DomainError("depth sweep: step must be positive");
    if (!(z_max_um >= z_min_um)) throw DomainError("depth sweep: z_max must not be below z_min");
    // Index-based so the last plane is not lost to accumulated rounding.
    const auto n = static_cast<long>(std::floor((z_max_um - z_min_um) / step_um + 1e-9)) + 1;
    std::vector<double> z;
    z.reserve(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) z.push_back(z_min_um + static_cast<double>(i) * step_um);
    return z;
}

namespace {

void finish_report(DepthExperimentReport& r) {
    double ss = 0.0;
    int n = 0;
    r.failed_planes = 0;
    for (const PlaneResult& p : r.planes) {
        if (!std::isfinite(p.est_z_um)) {
            ++r.failed_planes;
            continue;
        }
        ss += (p.est_z_um - p.true_z_um) * (p.est_z_um - p.true_z_um);
        ++n;
    }
    r.rmse_um = n > 0 ? std::sqrt(ss / n) : std::numeric_limits<double>::quiet_NaN();
}

void require_multiview_pair(const ArrayConfig& config, CameraIndex a, CameraIndex b) {
    config.validate();
    if (a == b) throw DomainError("depth sweep: the two cameras must differ");
    for (CameraIndex c : {a, b}) {
        if (c.row < 0 || c.col < 0 || c.row >= config.layout.rows || c.col >= config.layout.cols) {
            throw DomainError("depth sweep: camera " + to_string(c) + " is not in the layout");
        }
    }
    if (classify_regime(config).aggregate() != Regime::MultiView) {
        throw DomainError("depth sweep: requires a multi-view configuration");
    }
}

}  // namespace

DepthExperimentReport run_depth_sweep(const ArrayConfig& config, double z_min_um, double z_max_um, double step_um,
                                      const Scene& scene, const DepthSweepOptions& options) {
    require_multiview_pair(config, options.camera_a, options.camera_b);
    const std::vector<double> planes = sweep_planes(z_min_um, z_max_um, step_um);
    const CameraIndex ia = options.camera_a, ib = options.camera_b;

    const Vec2 mid = 0.5 * (config.camera_axis(ia) + config.camera_axis(ib));
    RenderOptions ro;
    ro.noise_std = options.noise_std;
    for (CameraIndex c : {ia, ib}) {
        const Vec2 px = object_to_pixel(config, c, mid);
        const SensorWindow w{static_cast<int>(std::lround(px.x - options.window_px / 2.0)),
                             static_cast<int>(std::lround(px.y - options.window_px / 2.0)), options.window_px,
                             options.window_px};
        if (w.x0 < 0 || w.y0 < 0 || w.x0 + w.width > config.sensor.pixels_x ||
            w.y0 + w.height > config.sensor.pixels_y) {
            throw DomainError("depth sweep: the shared region does not fit on camera " + to_string(c));
        }
        ro.camera_windows[c] = w;
    }

    auto render_pair = [&](double h, int exposure) {
        Scene s = scene;
        set_uniform_height(s, h);
        RenderOptions o = ro;
        o.exposure_id = exposure;
        return std::pair{render_camera(s, config, ia, {}, options.seed, o),
                         render_camera(s, config, ib, {}, options.seed, o)};
    };

    const auto [fa, fb] = render_pair(0.0, 0);
    const StitchCalibration cal = calibrate_pair(fa, fb, config);

    DepthExperimentReport report;
    report.planes.resize(planes.size());
    parallel_for(planes.size(), [&](std::size_t k) {
        const auto [a, b] = render_pair(planes[k], static_cast<int>(k) + 1);
        const MatchSet set = match_features(a, b, cal, config, options.match);
        PlaneResult& r = report.planes[k];
        r.true_z_um = planes[k];
        r.n_matches = static_cast<int>(set.matches.size());
        r.est_z_um = set.matches.empty() ? std::numeric_limits<double>::quiet_NaN()
                                         : median(match_heights(set, config));
    });
    finish_report(report);
    return report;
}

DepthExperimentReport run_analytic_depth_sweep(const ArrayConfig& config, double z_min_um, double z_max_um,
                                               double step_um, CameraIndex a, CameraIndex b) {
    require_multiview_pair(config, a, b);
    const Vec2 mid = 0.5 * (config.camera_axis(a) + config.camera_axis(b));
    const Length p = Length::um(norm(config.camera_axis(b) - config.camera_axis(a)));
    const double od = config.object_distance().in_um();
    DepthExperimentReport report;
    for (double z : sweep_planes(z_min_um, z_max_um, step_um)) {
        const Disparities d = analytic_disparities(config, a, b, mid, z);
        const Length depth = triangulate(d.d1, d.d2, p, config.image_distance());
        report.planes.push_back({z, od - depth.in_um(), 1});
    }
    finish_report(report);
    return report;
}

std::vector<HeightSample> match_samples(const MatchSet& set, const StitchCalibration& calibration,
                                        const ArrayConfig& config) {
    const std::vector<double> heights = match_heights(set, config);
    const Vec2 ca = calibrated_axis_px(calibration, config, set.camera_a);
    const double delta = config.sensor.pixel_pitch.in_um();
    const double id = config.image_distance().in_um();
    const double od = config.object_distance().in_um();
    std::vector<HeightSample> out;
    out.reserve(set.matches.size());
    for (std::size_t i = 0; i < set.matches.size(); ++i) {
        const Match& m = set.matches[i];
        const Vec2 rel = m.native_a - ca;
        const Vec2 p = config.camera_axis(set.camera_a) + rel * (delta * (od - heights[i]) / id);
        out.push_back({p, heights[i]});
    }
    return out;
}

std::vector<Triangle> delaunay(const std::vector<Vec2>& pts) {
    const int n = static_cast<int>(pts.size());
    if (n < 3) throw DomainError("delaunay: need at least three points");
    double minx = pts[0].x, maxx = pts[0].x, miny = pts[0].y, maxy = pts[0].y;
    for (Vec2 p : pts) {
        minx = std::min(minx, p.x);
        maxx = std::max(maxx, p.x);
        miny = std::min(miny, p.y);
        maxy = std::max(maxy, p.y);
    }
    const double span = std::max({maxx - minx, maxy - miny, 1e-12});
    const Vec2 c{0.5 * (minx + maxx), 0.5 * (miny + maxy)};
    std::vector<Vec2> v = pts;
    v.push_back(c + Vec2{-40.0 * span, -30.0 * span});
    v.push_back(c + Vec2{40.0 * span, -30.0 * span});
    v.push_back(c + Vec2{0.0, 40.0 * span});

    struct Tri {
        int a, b, c;
        Vec2 cc;
        double r2;
    };
    auto make = [&](int a, int b, int c2) {
        const Vec2 A = v[a], B = v[b], C = v[c2];
        const double d = 2.0 * (A.x * (B.y - C.y) + B.x * (C.y - A.y) + C.x * (A.y - B.y));
        const double a2 = dot(A, A), b2 = dot(B, B), c2s = dot(C, C);
        const Vec2 cc{(a2 * (B.y - C.y) + b2 * (C.y - A.y) + c2s * (A.y - B.y)) / d,
                      (a2 * (C.x - B.x) + b2 * (A.x - C.x) + c2s * (B.x - A.x)) / d};
        return Tri{a, b, c2, cc, dot(A - cc, A - cc)};
    };
    std::vector<Tri> tris{make(n, n + 1, n + 2)};
    for (int i = 0; i < n; ++i) {
        const Vec2 p = v[i];
        std::vector<std::pair<int, int>> edges;
        std::vector<Tri> keep;
        keep.reserve(tris.size());
        for (const Tri& t : tris) {
            if (dot(p - t.cc, p - t.cc) < t.r2 * (1.0 + 1e-12)) {
                edges.push_back({t.a, t.b});
                edges.push_back({t.b, t.c});
                edges.push_back({t.c, t.a});
            } else {
                keep.push_back(t);
            }
        }
        // Boundary of the cavity: edges that appear once.
        for (std::size_t e = 0; e < edges.size(); ++e) {
            bool shared = false;
            for (std::size_t f = 0; f < edges.size(); ++f) {
                if (e != f && edges[e].first == edges[f].second && edges[e].second == edges[f].first) {
                    shared = true;
                    break;
                }
            }
            if (!shared) {
                Tri t = make(edges[e].first, edges[e].second, i);
                if (std::isfinite(t.r2)) keep.push_back(t);
            }
        }
        tris = std::move(keep);
    }
    std::vector<Triangle> out;
    for (const Tri& t : tris) {
        if (t.a < n && t.b < n && t.c < n) out.push_back({t.a, t.b, t.c});
    }
    return out;
}

HeightMap build_height_map(const std::vector<HeightSample>& samples_in, double grid_pitch_um) {
    if (!(grid_pitch_um > 0.0)) throw DomainError("build_height_map: grid pitch must be positive");
    // Merge coincident samples.
    std::vector<HeightSample> samples;
    for (const HeightSample& s : samples_in) {
        if (!std::isfinite(s.height_um) || !std::isfinite(s.position_um.x) || !std::isfinite(s.position_um.y)) {
            continue;
        }
        bool dup = false;
        for (HeightSample& t : samples) {
            if (norm(t.position_um - s.position_um) < 1e-9) {
                t.height_um = 0.5 * (t.height_um + s.height_um);
                dup = true;
                break;
            }
        }
        if (!dup) samples.push_back(s);
    }
    if (samples.size() < 3) throw DomainError("build_height_map: need at least three distinct sparse points");

    Vec2 lo = samples[0].position_um, hi = lo;
    for (const HeightSample& s : samples) {
        lo = {std::min(lo.x, s.position_um.x), std::min(lo.y, s.position_um.y)};
        hi = {std::max(hi.x, s.position_um.x), std::max(hi.y, s.position_um.y)};
    }
    const double span = std::max(hi.x - lo.x, hi.y - lo.y);
    double max_area = 0.0;
    const Vec2 p0 = samples[0].position_um;
    std::size_t far = 0;
    for (std::size_t i = 1; i < samples.size(); ++i) {
        if (norm(samples[i].position_um - p0) > norm(samples[far].position_um - p0)) far = i;
    }
    const Vec2 d0 = samples[far].position_um - p0;
    for (const HeightSample& s : samples) {
        const Vec2 d = s.position_um - p0;
        max_area = std::max(max_area, std::abs(d0.x * d.y - d0.y * d.x));
    }
    if (!(span > 0.0) || max_area <= 1e-9 * span * span) {
        throw DomainError("build_height_map: sparse points are collinear");
    }

    std::vector<Vec2> pts;
    for (const HeightSample& s : samples) pts.push_back(s.position_um);
    const std::vector<Triangle> tris = delaunay(pts);
    if (tris.empty()) throw DomainError("build_height_map: degenerate triangulation");

    HeightMap map;
    map.origin_um = lo;
    map.pitch_um = grid_pitch_um;
    map.method = HeightMapMethod::Interpolated;
    map.samples = samples;
    const int w = std::max(1, static_cast<int>(std::ceil((hi.x - lo.x) / grid_pitch_um)));
    const int h = std::max(1, static_cast<int>(std::ceil((hi.y - lo.y) / grid_pitch_um)));
    map.grid = Image(w, h);
    map.mask = Image(w, h);

    struct Prepared {
        Vec2 a, b, c;
        double ha, hb, hc;
        double det;
        Vec2 lo, hi;
    };
    std::vector<Prepared> prep;
    for (const Triangle& t : tris) {
        Prepared p{pts[t.a], pts[t.b], pts[t.c], samples[t.a].height_um, samples[t.b].height_um,
                   samples[t.c].height_um, 0.0, {}, {}};
        p.det = (p.b.y - p.c.y) * (p.a.x - p.c.x) + (p.c.x - p.b.x) * (p.a.y - p.c.y);
        if (std::abs(p.det) < 1e-12) continue;
        p.lo = {std::min({p.a.x, p.b.x, p.c.x}), std::min({p.a.y, p.b.y, p.c.y})};
        p.hi = {std::max({p.a.x, p.b.x, p.c.x}), std::max({p.a.y, p.b.y, p.c.y})};
        prep.push_back(p);
    }
    const double tol = 1e-9;
    parallel_for(static_cast<std::size_t>(h), [&](std::size_t row) {
        const int y = static_cast<int>(row);
        for (int x = 0; x < w; ++x) {
            const Vec2 q = lo + Vec2{(x + 0.5) * grid_pitch_um, (y + 0.5) * grid_pitch_um};
            for (const Prepared& t : prep) {
                if (q.x < t.lo.x - tol || q.x > t.hi.x + tol || q.y < t.lo.y - tol || q.y > t.hi.y + tol) continue;
                const double l1 = ((t.b.y - t.c.y) * (q.x - t.c.x) + (t.c.x - t.b.x) * (q.y - t.c.y)) / t.det;
                const double l2 = ((t.c.y - t.a.y) * (q.x - t.c.x) + (t.a.x - t.c.x) * (q.y - t.c.y)) / t.det;
                const double l3 = 1.0 - l1 - l2;
                if (l1 < -tol || l2 < -tol || l3 < -tol) continue;
                map.grid.at(x, y) = static_cast<float>(l1 * t.ha + l2 * t.hb + l3 * t.hc);
                map.mask.at(x, y) = 1.0f;
                break;
            }
        }
    });
    return map;
}

HeightMap build_height_map(const std::vector<MatchSet>& matches, const StitchCalibration& calibration,
                           const ArrayConfig& config, double grid_pitch_um) {
    std::vector<HeightSample> samples;
    for (const MatchSet& set : matches) {
        for (const HeightSample& s : match_samples(set, calibration, config)) samples.push_back(s);
    }
    return build_height_map(samples, grid_pitch_um);
}

}  // namespace mcam
