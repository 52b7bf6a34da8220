#pragma once

// Design math for planar micro-camera arrays: magnification regimes,
// pixel-limited resolution, field-of-view coverage and scan counts.
//
// Axis convention: x runs along the sensor's pixels_x direction and along
// the array columns; y along pixels_y and the array rows.

#include <cstdint>
#include <string>
#include <vector>

#include "mcam/core.hpp"
#include "mcam/units.hpp"

namespace mcam {

struct SensorSpec {
    Length pixel_pitch;  // delta
    int pixels_x = 0;
    int pixels_y = 0;
    int bit_depth = 8;

    /// Active width along x (s_x). Always derived.
    Length width() const { return pixel_pitch * static_cast<double>(pixels_x); }
    /// Active width along y (s_y).
    Length height() const { return pixel_pitch * static_cast<double>(pixels_y); }

    void validate() const;
};

struct LensSpec {
    Length focal_length;
    double f_number = 0.0;
    Length outer_diameter;

    Length aperture_diameter() const { return focal_length / f_number; }
    void validate() const;
};

struct ArrayLayout {
    int rows = 1;
    int cols = 1;
    Length pitch_x;
    Length pitch_y;

    int count() const { return rows * cols; }
};

struct ArrayConfig {
    SensorSpec sensor;
    LensSpec lens;
    ArrayLayout layout;
    double magnification = 0.0;
    /// Optional per-camera lateral assembly error in µm, row-major, either
    /// empty (ideal array) or exactly rows*cols entries. Only the renderer
    /// sees these; everything downstream must recover them by calibration.
    std::vector<Vec2> axis_offsets_um;

    /// Throws ConfigError/DomainError describing the first violated invariant.
    void validate() const;

    Length image_distance() const;
    Length object_distance() const;
    /// Object-plane size of one sensor pixel at the focal plane (delta/M).
    Length object_pixel() const { return sensor.pixel_pitch / magnification; }

    int camera_count() const { return layout.count(); }
    int linear_index(CameraIndex c) const { return c.row * layout.cols + c.col; }
    std::vector<CameraIndex> cameras() const;

    /// Nominal optical-axis position on the object plane (µm); the array
    /// centre is the origin.
    Vec2 camera_axis(CameraIndex c) const;
    /// Nominal axis plus any assembly offset.
    Vec2 true_camera_axis(CameraIndex c) const;
};

enum class Regime { MultiView, Continuous, Tiled };

std::string to_string(Regime r);

struct AxisRegime {
    Regime regime = Regime::Continuous;
    double overlap_fraction = 0.0;  // negative means a gap
    std::int64_t views_per_point = 0;
};

struct RegimeReport {
    AxisRegime x;
    AxisRegime y;

    /// The weaker coverage of the two axes.
    Regime aggregate() const;
};

struct FovPair {
    Length x;
    Length y;
};

struct FovExtent {
    Length x;
    Length y;
    bool has_gaps = false;
};

struct ScanCounts {
    int nx = 1;
    int ny = 1;
    int total() const { return nx * ny; }
};

/// How the lateral scan step is sized in the tiled regime.
enum class StepConvention {
    PerAxis,           // each axis uses its own FOV width
    UniformShortAxis,  // both axes use the step of the shorter FOV
};

/// M = s/p, the magnification at which adjacent FOVs exactly abut.
double continuous_magnification(Length sensor_width, Length pitch);

/// Full-pitch pixel-limited resolution 2*delta/M on the object plane.
Length pixel_limited_resolution(Length pixel_pitch, double magnification);

RegimeReport classify_regime(const ArrayConfig& config);

/// Per-camera object-plane field of view (s_x/M, s_y/M).
FovPair camera_object_fov(const ArrayConfig& config);

/// Bounding extent of the whole array FOV; in the tiled regime the
/// extent is the outer bounding box and has_gaps is set.
FovExtent total_fov_extent(const ArrayConfig& config);

/// ceil(A / 4p^2) cameras for a multi-view configuration.
std::int64_t cameras_for_multiview_area(Area area, Length pitch);

/// Lateral scan positions per axis needed to close the FOV gaps.
/// Throws DomainError when no axis has a gap or abutment to fill.
ScanCounts scan_grid(const ArrayConfig& config, double overlap,
                     StepConvention convention = StepConvention::PerAxis);

/// Lateral step (µm) per axis used by scan_grid.
Vec2 scan_step(const ArrayConfig& config, double overlap, StepConvention convention);

// Thin-lens conjugates: I_d = f(1+M), O_d = f(1+1/M).
Length image_distance(const LensSpec& lens, double magnification);
Length object_distance(const LensSpec& lens, double magnification);

/// Number of cameras whose nominal FOV rectangle contains `point_um`.
int cameras_covering(const ArrayConfig& config, Vec2 point_um);

/// CSV design report with header axis,regime,overlap_fraction,fov_mm,r_pix_um.
std::string design_report_csv(const ArrayConfig& config);

}  // namespace mcam
