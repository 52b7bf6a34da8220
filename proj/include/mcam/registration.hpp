#pragma once

// Translation-plus-gain stitching: pairwise offsets by masked normalized
// cross-correlation, a weighted least-squares pose solve, feathered
// compositing, tile pyramids and bar-target contrast measurement.
//
// Positions are in "native" object pixels (delta/M at the focal plane). A
// camera's anchor is where its sensor pixel (0,0) corner lands in that frame,
// relative to the reference camera (0,0); a frame's tile origin is
//   anchor + window origin + stage lateral / (delta/M).
// Composites are resampled at binning * delta/M.

#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mcam/array_model.hpp"
#include "mcam/image.hpp"
#include "mcam/render.hpp"
#include "mcam/scene.hpp"

namespace mcam {

struct PairOffset {
    CameraIndex camera_a;
    CameraIndex camera_b;
    Vec2 nominal_px;        // expected position of b's pixel (0,0) in a's pixel frame
    Vec2 offset_px;         // measured minus nominal
    double peak_ratio = 1.0;
    double confidence = 0.0;  // 1 - 1/peak_ratio, in [0, 1]
    double peak_ncc = 0.0;
    bool low_confidence = true;
    // Mean intensity of each frame over the aligned overlap, for the gain solve.
    double mean_a = 0.0;
    double mean_b = 0.0;
    // Frame geometry the offset was measured on.
    SensorWindow window_a;
    SensorWindow window_b;
    int binning = 1;

    Vec2 displacement_px() const { return nominal_px + offset_px; }
};

struct RegistrationOptions {
    int max_search_px = 24;           // largest residual searched around nominal
    double min_peak_ratio = 1.15;     // pairs below this use the nominal offset
    double fallback_weight = 1e-3;    // weight of those nominal constraints
    double flat_variance = 1e-8;      // overlap variance treated as featureless
    bool gradient_refine = true;      // Lucas-Kanade polish after the 3x3 fit
};

/// Residual displacement of `b` relative to `a`. `nominal_px` is where b's
/// pixel (0,0) is expected in a's pixel coordinates. Small or featureless
/// overlaps yield a low-confidence result with zero offset, not an error.
PairOffset estimate_pairwise_offset(const CameraFrame& a, const CameraFrame& b, Vec2 nominal_px,
                                    const RegistrationOptions& options = {});

struct StitchCalibration {
    std::vector<CameraIndex> cameras;  // row-major
    std::vector<Vec2> anchors_px;      // native object pixels; reference at (0,0)
    std::vector<double> gains;         // geometric mean 1
    double native_pixel_um = 0.0;      // delta/M
    double valid_for_depth_um = 0.0;   // in-focus plane height it was solved at
    Vec2 reference_origin_um;          // object position of native pixel (0,0)
    Vec2 sensor_center_px;             // nominal optical-axis pixel (native)
    std::vector<PairOffset> pairs;     // as measured; empty for nominal calibrations
    double residual_rms_px = 0.0;      // weighted fit residual over confident pairs

    std::size_t index_of(CameraIndex c) const;
    Vec2 anchor(CameraIndex c) const { return anchors_px[index_of(c)]; }
    double gain(CameraIndex c) const { return gains[index_of(c)]; }
};

/// Anchors straight from the layout, unit gains.
StitchCalibration nominal_calibration(const ArrayConfig& config, double depth_um = 0.0);

/// Tile origin of a frame in native object pixels.
Vec2 tile_origin_px(const StitchCalibration& calibration, const CameraFrame& frame);

/// Weighted linear least squares over the given pairs with the reference
/// camera (0,0) pinned. Pairs below the peak-ratio threshold constrain their
/// cameras to the nominal offset with a small weight. Throws PipelineError
/// naming the components when the pairs do not connect every camera.
StitchCalibration solve_global_poses(const std::vector<PairOffset>& offsets, const ArrayConfig& config,
                                     const RegistrationOptions& options = {});

/// 4-connected pairwise registration of all frames followed by the global
/// solve. Requires a gap-free configuration (MultiView or Continuous).
StitchCalibration calibrate(const FrameSet& frames, const ArrayConfig& config,
                            const RegistrationOptions& options = {});

struct Composite {
    Image raster;
    Vec2 origin_um;  // object position of the corner of pixel (0,0)
    double pixel_um = 0.0;
    bool weight_map_used = true;
    Image weight_sum;  // raw feather weight total; 0 marks uncovered pixels
};

/// A frame placed for compositing. The frame is referenced, not copied.
struct PlacedTile {
    const CameraFrame* frame = nullptr;
    Vec2 origin_px;  // native object pixels
    double gain = 1.0;
};

struct CompositeOptions {
    bool feather = true;
    int min_ramp_px = 8;
};

/// Tiles for every frame of a set under a calibration.
std::vector<PlacedTile> place_frames(const FrameSet& frames, const StitchCalibration& calibration);

Composite composite(const FrameSet& frames, const StitchCalibration& calibration,
                    const CompositeOptions& options = {});

/// Composite over arbitrary placed tiles sharing one binning factor.
Composite composite_tiles(const std::vector<PlacedTile>& tiles, const StitchCalibration& calibration,
                          const CompositeOptions& options = {});

/// Sum over tiles of the normalized blend weight at every composite pixel:
/// 1 where covered, 0 elsewhere.
Image blend_weight_total(const std::vector<PlacedTile>& tiles, const StitchCalibration& calibration,
                         const CompositeOptions& options = {});

struct Pyramid {
    int tile_px = 256;
    std::vector<Image> levels;  // level 0 = full resolution
    Vec2 origin_um;
    double pixel_um = 0.0;      // level 0

    int tiles_x(int level) const;
    int tiles_y(int level) const;
    int tile_count(int level) const { return tiles_x(level) * tiles_y(level); }
};

/// Halve with 2x2 box averaging until a level fits in one tile.
Pyramid build_pyramid(const Composite& composite, int tile_px);

struct GroupContrast {
    double spacing_um = 0.0;
    BarOrientation orientation = BarOrientation::Vertical;
    double contrast = 0.0;
    bool resolved = false;
};

inline constexpr double kContrastThreshold = 0.26;

/// Michelson contrast of every group, averaged along the bars.
std::vector<GroupContrast> measure_group_contrast(const Composite& composite, const TargetLayout& layout,
                                                  double threshold = kContrastThreshold);

/// Finest spacing whose contrast reaches the threshold; +inf when none do.
double measure_resolution(const Composite& composite, const TargetLayout& layout,
                          double threshold = kContrastThreshold);

/// Versioned text record: header "mcam-calibration v1".
void write_calibration(std::ostream& out, const StitchCalibration& calibration);
StitchCalibration read_calibration(std::istream& in);

}  // namespace mcam
