#pragma once

// Mode orchestration. Each desk_* function runs one experiment in memory at
// desk scale (sensor windows, a camera sub-array or a region of interest)
// while keeping the full array geometry; run() adds file output.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mcam/acquisition.hpp"
#include "mcam/config.hpp"
#include "mcam/depth3d.hpp"
#include "mcam/registration.hpp"
#include "mcam/render.hpp"
#include "mcam/scene.hpp"

namespace mcam {

/// The cameras [0, rows) x [0, cols) of an array, as an array of their own
/// (the layout centre, and so every axis position, moves with it).
ArrayConfig subarray(const ArrayConfig& config, int rows, int cols);

/// Object-plane position of the outer corner of native pixel (0,0) of a
/// camera, assembly offset included. Pixel corners lie on this point plus
/// integer multiples of delta/M.
Vec2 pixel_grid_corner(const ArrayConfig& config, CameraIndex camera);

struct DeskScene {
    Scene scene;
    TargetLayout layout;  // empty unless bar groups were painted
};

/// Scene for a run: loaded from file, or a texture over `textured` (min,
/// max corners) with, for target scenes, bar groups from `bars_origin`.
/// Generated scenes sit on camera (0,0)'s pixel grid with a texel pitch of
/// a quarter pixel, so bar edges fall on pixel edges.
DeskScene make_desk_scene(const RunConfig& config, const ArrayConfig& array, Vec2 default_center_um,
                          std::pair<Vec2, Vec2> textured, std::optional<Vec2> bars_origin);

struct DeskRender {
    ArrayConfig config;  // the rendered sub-array
    DeskScene scene;
    FrameSet frames;
};

/// Sub-array mosaic render: windows from mosaic_windows around the scene
/// centre, bar groups inside camera (0,0)'s window away from its overlaps.
DeskRender desk_render(const RunConfig& config);

struct DeskStitch {
    DeskRender render;
    StitchCalibration calibration;
    Composite composite;
    std::vector<GroupContrast> contrast;
    double resolution_um = 0.0;  // +inf when no group is resolved or there are no groups
};

DeskStitch desk_stitch(const RunConfig& config);

struct DeskDepth {
    DepthExperimentReport sweep;
    std::vector<HeightSample> samples;
    std::optional<HeightMap> height_map;  // absent when fewer than three usable samples
};

DeskDepth desk_depth(const RunConfig& config);

struct DeskTiled {
    ScanPlan plan;
    CoverageReport coverage;
    std::pair<Vec2, Vec2> roi;
    DeskScene scene;
    std::vector<FrameSet> scans;  // per lateral position, the cameras that see the ROI
    std::vector<FocusDecision> focus;  // one per rendered frame when the plan has an axial stack
    TiledComposite composite;
    std::vector<GroupContrast> contrast;
    double resolution_um = 0.0;
};

/// Full-array scan plan and coverage; the composite is built only inside a
/// region of interest, rendering each camera at each position through the
/// window that sees it.
DeskTiled desk_tiled(const RunConfig& config);

/// Runs the configured mode, writes its files through one committer and
/// the manifest last. Returns the summary JSON (also stored in the manifest).
std::string run(const RunConfig& config);

}  // namespace mcam
