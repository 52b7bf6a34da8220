#pragma once

// Tiled-regime scan planning, focus selection over axial stacks, tiled
// composite assembly and the data-path throughput model.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mcam/array_model.hpp"
#include "mcam/registration.hpp"
#include "mcam/render.hpp"

namespace mcam {

struct ScanPlan {
    std::vector<Vec2> lateral_offsets_um;       // visiting order
    std::vector<double> axial_offsets_um{0.0};  // per lateral position
    double overlap = 0.0;
    StepConvention convention = StepConvention::PerAxis;
    ScanCounts counts;
    Vec2 step_um;
    bool serpentine = true;

    std::size_t snapshot_count() const { return lateral_offsets_um.size() * axial_offsets_um.size(); }
    /// Largest minus smallest offset per axis.
    Vec2 lateral_extent_um() const;
    /// index,dx_um,dy_um,dz_um; axial offsets vary fastest.
    std::string to_csv() const;
};

/// Centred grid of stage offsets filling the gaps between camera FOVs.
/// Counts come from scan_grid; the step along each axis is the convention's
/// step. Serpentine order reverses every other row. Throws DomainError for
/// configurations without gaps.
ScanPlan plan_tiled_scan(const ArrayConfig& config, double overlap, bool serpentine = true,
                         StepConvention convention = StepConvention::PerAxis,
                         const std::vector<double>& axial_offsets_um = {0.0});

struct CoverageReport {
    double spacing_um = 0.0;
    std::int64_t samples = 0;
    std::int64_t uncovered = 0;
    Vec2 min_um, max_um;  // the array footprint rectangle that was sampled

    bool complete() const { return uncovered == 0; }
};

/// Samples the array footprint rectangle (bounding box of all nominal camera
/// FOVs) on a square grid and counts points outside every camera FOV at
/// every planned lateral offset. spacing_um <= 0 selects r_pix / 2.
CoverageReport check_scan_coverage(const ArrayConfig& config, const ScanPlan& plan, double spacing_um = 0.0);

/// Rectangle of frame pixels [x0, x0+w) x [y0, y0+h).
struct PixelRegion {
    int x0 = 0;
    int y0 = 0;
    int width = 0;
    int height = 0;
};

/// The central 50% (per axis) of a w x h frame.
PixelRegion central_region(int width, int height);

/// Variance of the 3x3 Laplacian over the region. Throws DomainError for a
/// region smaller than 16 x 16 or outside the image.
double laplacian_focus_metric(const Image& image, const PixelRegion& region);
double laplacian_focus_metric(const CameraFrame& frame);

struct FocusDecision {
    CameraIndex camera;
    Vec2 lateral_um;
    std::size_t chosen = 0;
    std::vector<double> metrics;
    bool featureless = false;  // every metric was zero; chosen is the centre slice
};

/// Argmax of the focus metric; ties go to the slice nearest the stack centre,
/// then to the lower index.
FocusDecision select_focus(const std::vector<CameraFrame>& stack);

/// One decision per camera over a stack of FrameSets (one per axial slice).
std::vector<FocusDecision> select_focus(const std::vector<FrameSet>& stack);

/// The chosen slice of every camera, as one FrameSet.
FrameSet apply_focus(const std::vector<FrameSet>& stack, const std::vector<FocusDecision>& decisions);

struct TiledComposite {
    Composite composite;
    std::int64_t footprint_pixels = 0;  // composite pixels inside the array footprint
    std::int64_t gap_pixels = 0;        // of those, pixels no tile covers

    bool complete() const { return gap_pixels == 0; }
};

/// All cameras at all positions placed by their position's calibration
/// (stage lateral offset included) and composited together. The coverage
/// report counts uncovered composite pixels inside `region` (min, max
/// corners, µm), by default the array footprint.
TiledComposite assemble_tiled_composite(const std::vector<FrameSet>& scans,
                                        const std::vector<StitchCalibration>& calibration_per_position,
                                        const CompositeOptions& options = {},
                                        std::optional<std::pair<Vec2, Vec2>> region = std::nullopt);

/// Nominal calibration for each scan (tiled arrays have no overlap to
/// register across cameras).
std::vector<StitchCalibration> nominal_calibrations(const std::vector<FrameSet>& scans);

/// n_cameras * (w / b) * (h / b) * bit_depth / 8, rounded up to whole bytes.
/// crop = {width, height} of a centred sensor crop.
std::int64_t frame_bytes(const SensorSpec& sensor, int n_cameras, int binning = 1,
                         std::optional<std::pair<int, int>> crop = std::nullopt);

double max_frame_rate(std::int64_t frame_bytes, double bandwidth_bytes_per_s);

struct RecordingCapacity {
    std::int64_t frames = 0;
    double seconds = 0.0;
};

RecordingCapacity recording_capacity(std::int64_t frame_bytes, double fps, double buffer_bytes);

struct ThroughputOptions {
    double bandwidth_bytes_per_s = 5e9;
    double buffer_bytes = 128e9;
    int binning = 1;
    std::optional<std::pair<int, int>> crop;
    double efficiency = 1.0;  // in (0, 1]; effective bytes per frame = raw / efficiency
    std::optional<double> fps;  // recording rate; defaults to the maximum
};

struct ThroughputReport {
    int cameras = 0;
    int binning = 1;
    std::int64_t frame_bytes = 0;
    double effective_frame_bytes = 0.0;
    double efficiency = 1.0;
    double bandwidth_bytes_per_s = 0.0;
    double buffer_bytes = 0.0;
    double max_fps = 0.0;
    double fps = 0.0;
    std::int64_t buffer_frames = 0;
    double max_duration_s = 0.0;

    /// quantity,value rows.
    std::string to_csv() const;
};

ThroughputReport throughput_report(const ArrayConfig& config, const ThroughputOptions& options = {});

}  // namespace mcam
