#include "mcam/render.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mcam/parallel.hpp"
#include "mcam/rng.hpp"

namespace mcam {

namespace {

constexpr int kHeightIterations = 3;
constexpr double kSigmaLevelStep = 0.25;

struct Optics {
    double delta;      // pixel pitch, µm
    double image_d;    // I_d, µm
    double object_d;   // O_d, µm
    double m;
    double aperture;   // f / N, µm
};

Optics optics_of(const ArrayConfig& c) {
    return {c.sensor.pixel_pitch.in_um(), c.image_distance().in_um(), c.object_distance().in_um(),
            c.magnification, c.lens.aperture_diameter().in_um()};
}

double sigma_px(const Optics& o, double dh) {
    const double coc = o.aperture * o.m * std::abs(dh) / o.object_d;
    return coc / 2.0 / o.delta;
}

// Per-pixel blend between pre-blurred copies at evenly spaced sigma levels.
Image variable_blur(const Image& sharp, const Image& sigma) {
    float smax = 0.0f;
    for (float s : sigma.pixels()) smax = std::max(smax, s);
    const int levels = static_cast<int>(std::ceil(smax / kSigmaLevelStep)) + 1;
    std::vector<Image> blurred(static_cast<std::size_t>(levels + 1));
    std::vector<bool> needed(static_cast<std::size_t>(levels + 1), false);
    for (float s : sigma.pixels()) {
        const int k = static_cast<int>(std::floor(s / kSigmaLevelStep));
        needed[static_cast<std::size_t>(k)] = true;
        needed[static_cast<std::size_t>(k + 1)] = true;
    }
    parallel_for(blurred.size(), [&](std::size_t k) {
        if (needed[k]) blurred[k] = gaussian_blur(sharp, static_cast<double>(k) * kSigmaLevelStep);
    });
    Image out(sharp.width(), sharp.height());
    for (int y = 0; y < sharp.height(); ++y) {
        for (int x = 0; x < sharp.width(); ++x) {
            const double t = sigma.at(x, y) / kSigmaLevelStep;
            const auto k = static_cast<std::size_t>(std::floor(t));
            const double a = t - static_cast<double>(k);
            out.at(x, y) = static_cast<float>((1.0 - a) * blurred[k].at(x, y) + a * blurred[k + 1].at(x, y));
        }
    }
    return out;
}

}  // namespace

const CameraFrame& FrameSet::frame(CameraIndex c) const {
    for (const auto& f : frames) {
        if (f.camera == c) return f;
    }
    throw DomainError("FrameSet has no frame for camera " + to_string(c));
}

SensorWindow RenderOptions::window_for(CameraIndex c, const SensorSpec& sensor) const {
    SensorWindow w;
    if (auto it = camera_windows.find(c); it != camera_windows.end()) {
        w = it->second;
    } else if (window) {
        w = *window;
    }
    if (w.full()) return {0, 0, sensor.pixels_x, sensor.pixels_y};
    return w;
}

double defocus_sigma_px(const ArrayConfig& config, double height_minus_focus_um) {
    return sigma_px(optics_of(config), height_minus_focus_um);
}

Vec2 sensor_center_px(const SensorSpec& sensor) {
    return {sensor.pixels_x / 2.0, sensor.pixels_y / 2.0};
}

Vec2 pixel_to_object_um(const ArrayConfig& config, CameraIndex camera, Vec2 px) {
    return config.camera_axis(camera) + (px + Vec2{0.5, 0.5} - sensor_center_px(config.sensor)) * config.object_pixel().in_um();
}

Vec2 object_to_pixel(const ArrayConfig& config, CameraIndex camera, Vec2 object_um) {
    return sensor_center_px(config.sensor) + (object_um - config.camera_axis(camera)) / config.object_pixel().in_um() -
           Vec2{0.5, 0.5};
}

std::map<CameraIndex, SensorWindow> mosaic_windows(const ArrayConfig& config, Vec2 center_um, int width,
                                                   int height, double overlap) {
    if (width < 1 || height < 1) throw DomainError("mosaic_windows: empty window");
    if (!(overlap >= 0.0 && overlap < 1.0)) throw DomainError("mosaic_windows: overlap must be in [0, 1)");
    const double pix = config.object_pixel().in_um();
    const Vec2 step{(1.0 - overlap) * width * pix, (1.0 - overlap) * height * pix};
    std::map<CameraIndex, SensorWindow> out;
    for (CameraIndex c : config.cameras()) {
        const Vec2 target = center_um + Vec2{(c.col - (config.layout.cols - 1) / 2.0) * step.x,
                                             (c.row - (config.layout.rows - 1) / 2.0) * step.y};
        const Vec2 px = sensor_center_px(config.sensor) + (target - config.camera_axis(c)) / pix;
        const SensorWindow w{static_cast<int>(std::lround(px.x - width / 2.0)),
                             static_cast<int>(std::lround(px.y - height / 2.0)), width, height};
        if (w.x0 < 0 || w.y0 < 0 || w.x0 + width > config.sensor.pixels_x || w.y0 + height > config.sensor.pixels_y) {
            throw DomainError("mosaic_windows: camera " + to_string(c) + " cannot see the requested region");
        }
        out[c] = w;
    }
    return out;
}

CameraFrame render_camera(const Scene& scene, const ArrayConfig& config, CameraIndex camera,
                          StageOffset stage, std::uint64_t seed, const RenderOptions& options) {
    config.validate();
    scene.validate();
    if (camera.row < 0 || camera.col < 0 || camera.row >= config.layout.rows ||
        camera.col >= config.layout.cols) {
        throw DomainError("render_camera: camera index outside the layout");
    }
    if (options.noise_std < 0.0) throw DomainError("render_camera: noise_std must be >= 0");
    const Optics o = optics_of(config);
    const double back_projected = o.delta * o.object_d / o.image_d;
    if (scene.sample_pitch_um > back_projected / 2.0 * (1.0 + 1e-9)) {
        throw DomainError("render_camera: scene sample pitch is coarser than half a back-projected pixel");
    }
    const SensorWindow win = options.window_for(camera, config.sensor);
    if (win.width < 1 || win.height < 1) throw DomainError("render_camera: empty sensor window");

    const Vec2 axis = config.true_camera_axis(camera) + stage.lateral();
    const Vec2 center = sensor_center_px(config.sensor);
    const bool flat = scene.flat();
    const double z = stage.z_um;

    double max_dh = 0.0;
    if (flat) {
        max_dh = std::abs(scene.height_um.fill() - z);
    } else {
        const auto [lo, hi] = scene.height_um.min_max();
        max_dh = std::max(std::abs(lo - z), std::abs(hi - z));
    }
    const int margin = static_cast<int>(std::ceil(3.0 * sigma_px(o, max_dh))) + 1;
    const int rw = win.width + 2 * margin;
    const int rh = win.height + 2 * margin;

    Image sharp(rw, rh);
    Image sigma(flat ? 0 : rw, flat ? 0 : rh);
    parallel_for(static_cast<std::size_t>(rh), [&](std::size_t row) {
        const int ry = static_cast<int>(row);
        const double sy = win.y0 - margin + ry;
        const double y_img = (sy + 0.5 - center.y) * o.delta;
        for (int rx = 0; rx < rw; ++rx) {
            const double sx = win.x0 - margin + rx;
            const double x_img = (sx + 0.5 - center.x) * o.delta;
            double h = flat ? scene.height_um.fill() : 0.0;
            double scale = (o.object_d - (h - z)) / o.image_d;
            Vec2 p = axis + Vec2{x_img, y_img} * scale;
            if (!flat) {
                for (int it = 0; it < kHeightIterations; ++it) {
                    h = scene.height_at(p);
                    scale = (o.object_d - (h - z)) / o.image_d;
                    p = axis + Vec2{x_img, y_img} * scale;
                }
                sigma.at(rx, ry) = static_cast<float>(sigma_px(o, h - z));
            }
            const double half = 0.5 * o.delta * scale;
            sharp.at(rx, ry) = static_cast<float>(area_average(scene, p - Vec2{half, half}, p + Vec2{half, half}));
        }
    });

    const Image blurred = flat ? gaussian_blur(sharp, sigma_px(o, max_dh)) : variable_blur(sharp, sigma);
    CameraFrame frame;
    frame.pixels = blurred.crop(margin, margin, win.width, win.height);
    frame.camera = camera;
    frame.optical_axis_um = config.camera_axis(camera);
    frame.stage = stage;
    frame.exposure_id = options.exposure_id;
    frame.window = win;

    if (options.noise_std > 0.0) {
        std::uint64_t s = hash_combine(seed, static_cast<std::uint64_t>(camera.row));
        s = hash_combine(s, static_cast<std::uint64_t>(camera.col));
        s = hash_combine(s, static_cast<std::uint64_t>(options.exposure_id));
        std::mt19937_64 rng(s);
        std::normal_distribution<double> noise(0.0, options.noise_std);
        for (float& v : frame.pixels.pixels()) v = static_cast<float>(v + noise(rng));
    }
    if (options.quantize) {
        const double levels = std::ldexp(1.0, config.sensor.bit_depth) - 1.0;
        for (float& v : frame.pixels.pixels()) {
            v = static_cast<float>(std::round(std::clamp(static_cast<double>(v), 0.0, 1.0) * levels) / levels);
        }
    }
    return frame;
}

FrameSet render_array(const Scene& scene, const ArrayConfig& config, StageOffset stage,
                      std::uint64_t seed, const RenderOptions& options) {
    config.validate();
    const std::vector<CameraIndex> cams = config.cameras();
    FrameSet out;
    out.config = config;
    out.stage_offset = stage;
    out.frames.resize(cams.size());
    parallel_for(cams.size(), [&](std::size_t i) {
        out.frames[i] = render_camera(scene, config, cams[i], stage, seed, options);
    });
    return out;
}

std::vector<FrameSet> render_focal_stack(const Scene& scene, const ArrayConfig& config,
                                         const std::vector<double>& z_offsets_um, Vec2 lateral_um,
                                         std::uint64_t seed, const RenderOptions& options) {
    for (double z : z_offsets_um) {
        if (!std::isfinite(z)) throw DomainError("render_focal_stack: z offsets must be finite");
    }
    std::vector<FrameSet> out;
    out.reserve(z_offsets_um.size());
    for (std::size_t k = 0; k < z_offsets_um.size(); ++k) {
        RenderOptions o = options;
        o.exposure_id = options.exposure_id + static_cast<int>(k);
        out.push_back(render_array(scene, config, {lateral_um.x, lateral_um.y, z_offsets_um[k]}, seed, o));
    }
    return out;
}

CameraFrame apply_binning(const CameraFrame& frame, int factor) {
    if (factor < 1) throw DomainError("apply_binning: factor must be >= 1");
    const int w = frame.pixels.width();
    const int h = frame.pixels.height();
    if (w % factor != 0 || h % factor != 0) {
        throw DomainError("apply_binning: factor does not divide the frame dimensions");
    }
    if (factor == 1) return frame;
    CameraFrame out = frame;
    out.binning = frame.binning * factor;
    out.pixels = Image(w / factor, h / factor);
    const double inv = 1.0 / (factor * factor);
    for (int y = 0; y < h / factor; ++y) {
        for (int x = 0; x < w / factor; ++x) {
            double s = 0.0;
            for (int j = 0; j < factor; ++j) {
                for (int i = 0; i < factor; ++i) s += frame.pixels.at(x * factor + i, y * factor + j);
            }
            out.pixels.at(x, y) = static_cast<float>(s * inv);
        }
    }
    return out;
}

double frame_pixel_um(const CameraFrame& frame, const ArrayConfig& config) {
    return config.object_pixel().in_um() * frame.binning;
}

Vec2 frame_origin_um(const CameraFrame& frame, const ArrayConfig& config) {
    const double px = config.object_pixel().in_um();
    const Vec2 c = sensor_center_px(config.sensor);
    return frame.optical_axis_um + frame.stage.lateral() +
           Vec2{(frame.window.x0 - c.x) * px, (frame.window.y0 - c.y) * px};
}

}  // namespace mcam
