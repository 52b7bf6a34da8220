#pragma once

// Stereo depth from pairs of overlapping micro-cameras.
//
// Disparities are signed distances of a matched point from each camera's
// calibrated optical-axis pixel, projected on the baseline direction u (from
// camera a towards camera b):  d1 = (x_a - c_a).u,  d2 = -(x_b - c_b).u.
// With upright images d1 + d2 = p * I_d / (O_d - h) on the sensor, so
// depth = p * I_d / (d1 + d2) and the height above the focal plane is
// h = O_d - depth.

#include <cstdint>
#include <string>
#include <vector>

#include "mcam/array_model.hpp"
#include "mcam/registration.hpp"
#include "mcam/render.hpp"
#include "mcam/scene.hpp"

namespace mcam {

struct Match {
    Vec2 point_a;  // frame pixel coordinates (pixel centres at integers)
    Vec2 point_b;
    Vec2 native_a;  // native sensor corner coordinates
    Vec2 native_b;
    double d1_px = 0.0;  // native sensor pixels
    double d2_px = 0.0;
    double score = 0.0;  // NCC of the matched windows

    double disparity_sum_px() const { return d1_px + d2_px; }
};

struct MatchSet {
    CameraIndex camera_a;
    CameraIndex camera_b;
    Vec2 baseline_dir;          // unit vector from a's axis to b's
    double baseline_um = 0.0;
    std::vector<Match> matches;
    bool sparse = false;        // fewer than 8 matches
};

struct MatchOptions {
    int window_px = 15;
    int max_points = 300;
    int search_px = 24;          // along the baseline, either side of the focal-plane prediction
    int cross_search_px = 2;     // perpendicular slack for calibration error
    double min_overlap = 0.5;    // along the baseline, fraction of the camera FOV
    double min_ncc = 0.8;
    double min_uniqueness = 1.05;  // best / second-best NCC along the search line
    double response_fraction = 0.02;  // corner response threshold relative to the frame maximum
};

/// Calibrated optical-axis pixel of a camera in native sensor corner
/// coordinates (pixel (i,j) spans [i,i+1) x [j,j+1)).
Vec2 calibrated_axis_px(const StitchCalibration& calibration, const ArrayConfig& config, CameraIndex camera);

/// Nominal calibration with camera b's anchor replaced by the offset measured
/// between two in-focus frames (camera a stays nominal). Throws
/// PipelineError when the pair does not register confidently.
StitchCalibration calibrate_pair(const CameraFrame& a, const CameraFrame& b, const ArrayConfig& config);

/// Corner-like points of `a`, each matched into `b` along the baseline.
MatchSet match_features(const CameraFrame& a, const CameraFrame& b, const StitchCalibration& calibration,
                        const ArrayConfig& config, const MatchOptions& options = {});

/// depth = p * I_d / (d1 + d2); d1, d2 on the sensor. Throws DomainError
/// when d1 + d2 <= 0.
Length triangulate(Length d1, Length d2, Length baseline, Length image_distance);

struct Disparities {
    Length d1;
    Length d2;
};

/// Exact disparities of an object point at height h for an ideal camera
/// pair (forward model, no matching).
Disparities analytic_disparities(const ArrayConfig& config, CameraIndex a, CameraIndex b, Vec2 point_um,
                                 double height_um);

/// Height above the focal plane of every match (O_d - depth).
std::vector<double> match_heights(const MatchSet& set, const ArrayConfig& config);

struct PlaneResult {
    double true_z_um = 0.0;
    double est_z_um = 0.0;  // NaN when the plane produced no matches
    int n_matches = 0;
};

struct DepthExperimentReport {
    std::vector<PlaneResult> planes;
    double rmse_um = 0.0;
    int failed_planes = 0;

    /// Rows true_z_um,est_z_um,n_matches then a final "rmse_um,<value>" line.
    std::string to_csv() const;
};

struct DepthSweepOptions {
    CameraIndex camera_a{0, 0};
    CameraIndex camera_b{0, 1};
    int window_px = 200;      // square sensor window per camera
    double noise_std = 0.0;
    std::uint64_t seed = 1;
    MatchOptions match;
};

/// Heights z_min, z_min + step, ... <= z_max (µm).
std::vector<double> sweep_planes(double z_min_um, double z_max_um, double step_um);

/// Calibrates the pair on the in-focus plane, then for every plane moves the
/// scene to that height, renders both cameras, matches, and reports the
/// median height estimate. `scene` is used for its intensity; its height is
/// replaced per plane. The object region between the two axes is imaged.
DepthExperimentReport run_depth_sweep(const ArrayConfig& config, double z_min_um, double z_max_um, double step_um,
                                      const Scene& scene, const DepthSweepOptions& options = {});

/// Same sweep without rendering or matching: disparities come from the
/// forward model and go straight into triangulate.
DepthExperimentReport run_analytic_depth_sweep(const ArrayConfig& config, double z_min_um, double z_max_um,
                                               double step_um, CameraIndex a = {0, 0}, CameraIndex b = {0, 1});

struct HeightSample {
    Vec2 position_um;
    double height_um = 0.0;
};

enum class HeightMapMethod { SparseTriangulated, Interpolated };

struct HeightMap {
    Image grid;   // heights, µm
    Image mask;   // 1 inside the convex hull of the samples, else 0
    Vec2 origin_um;
    double pitch_um = 0.0;
    HeightMapMethod method = HeightMapMethod::Interpolated;
    std::vector<HeightSample> samples;
};

/// Object-plane position of every match, from camera a's ray at the match's
/// triangulated height.
std::vector<HeightSample> match_samples(const MatchSet& set, const StitchCalibration& calibration,
                                        const ArrayConfig& config);

/// Linear interpolation on a Delaunay triangulation of the samples; cells
/// outside the convex hull are masked out. Throws DomainError for fewer than
/// three samples or collinear samples.
HeightMap build_height_map(const std::vector<HeightSample>& samples, double grid_pitch_um);

HeightMap build_height_map(const std::vector<MatchSet>& matches, const StitchCalibration& calibration,
                           const ArrayConfig& config, double grid_pitch_um);

struct Triangle {
    int a, b, c;
};

/// Bowyer-Watson Delaunay triangulation; indices refer to `points`.
std::vector<Triangle> delaunay(const std::vector<Vec2>& points);

}  // namespace mcam
