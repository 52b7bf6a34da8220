#pragma once

// Forward model: what each micro-camera records of a Scene.
//
// Geometry is a pinhole at each lens centre with the sensor at the image
// distance I_d behind it. Sensor pixel centres back-project to
//   x_obj = axis + x_img * (O_d - (h - z)) / I_d
// where h is the local scene height and z the axial stage position (the
// height of the in-focus plane). The image is rendered upright. Each pixel is
// the exact area average of the scene over its back-projected footprint;
// defocus is a Gaussian of sigma = CoC/2 with CoC = (f/N) * M * |h - z| / O_d
// on the sensor.

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "mcam/array_model.hpp"
#include "mcam/image.hpp"
#include "mcam/scene.hpp"

namespace mcam {

/// Rectangle of native sensor pixels. width == 0 means the full sensor.
struct SensorWindow {
    int x0 = 0;
    int y0 = 0;
    int width = 0;
    int height = 0;

    bool full() const { return width == 0 || height == 0; }
    friend bool operator==(const SensorWindow&, const SensorWindow&) = default;
};

struct StageOffset {
    double x_um = 0.0;
    double y_um = 0.0;
    double z_um = 0.0;

    Vec2 lateral() const { return {x_um, y_um}; }
    friend bool operator==(const StageOffset&, const StageOffset&) = default;
};

struct CameraFrame {
    Image pixels;
    CameraIndex camera;
    Vec2 optical_axis_um;  // nominal grid position of the camera
    StageOffset stage;     // lateral array offset and in-focus plane height
    int exposure_id = 0;
    SensorWindow window;   // native sensor pixels covered (before binning)
    int binning = 1;

    double z_offset_um() const { return stage.z_um; }
};

struct FrameSet {
    std::vector<CameraFrame> frames;  // row-major camera order
    ArrayConfig config;
    StageOffset stage_offset;

    const CameraFrame& frame(CameraIndex c) const;
};

struct RenderOptions {
    double noise_std = 0.0;  // additive Gaussian read noise, intensity units
    bool quantize = false;   // round to the sensor bit depth after noise
    std::optional<SensorWindow> window;              // applied to every camera
    std::map<CameraIndex, SensorWindow> camera_windows;  // per-camera override
    int exposure_id = 0;

    SensorWindow window_for(CameraIndex c, const SensorSpec& sensor) const;
};

/// Defocus blur sigma on the sensor, in pixels.
double defocus_sigma_px(const ArrayConfig& config, double height_minus_focus_um);

CameraFrame render_camera(const Scene& scene, const ArrayConfig& config, CameraIndex camera,
                          StageOffset stage, std::uint64_t seed, const RenderOptions& options = {});

FrameSet render_array(const Scene& scene, const ArrayConfig& config, StageOffset stage,
                      std::uint64_t seed, const RenderOptions& options = {});

/// One FrameSet per axial position; exposure ids count up from options.exposure_id.
std::vector<FrameSet> render_focal_stack(const Scene& scene, const ArrayConfig& config,
                                         const std::vector<double>& z_offsets_um, Vec2 lateral_um,
                                         std::uint64_t seed, const RenderOptions& options = {});

CameraFrame apply_binning(const CameraFrame& frame, int factor);

/// Object-plane position (µm, at the focal plane) of the outer corner of a
/// frame's pixel (0,0) under the nominal array geometry.
Vec2 frame_origin_um(const CameraFrame& frame, const ArrayConfig& config);

/// Object-plane size of one frame pixel at the focal plane.
double frame_pixel_um(const CameraFrame& frame, const ArrayConfig& config);

/// Sensor pixel coordinate (native, centre-based) of the nominal optical axis.
Vec2 sensor_center_px(const SensorSpec& sensor);

/// Per-camera windows of width x height pixels arranged so the cameras of
/// the layout see a small rows x cols mosaic centred on `center_um`, with
/// neighbouring windows overlapping by `overlap` of their size. Throws
/// DomainError when a window would leave its sensor.
std::map<CameraIndex, SensorWindow> mosaic_windows(const ArrayConfig& config, Vec2 center_um, int width,
                                                   int height, double overlap);

/// Object-plane position (µm, focal plane) seen by the centre of native
/// pixel `px` of a camera under the nominal geometry.
Vec2 pixel_to_object_um(const ArrayConfig& config, CameraIndex camera, Vec2 px);
/// Inverse of pixel_to_object_um.
Vec2 object_to_pixel(const ArrayConfig& config, CameraIndex camera, Vec2 object_um);

}  // namespace mcam
