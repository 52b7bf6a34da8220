#pragma once

// Run configuration: a JSON document whose length keys carry a unit suffix
// (_mm or _um). Parsing is strict: unknown keys, bare length keys and
// wrongly typed values are all reported, not just the first.
//
// Precedence: preset < explicit config keys < command-line overrides.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mcam/acquisition.hpp"
#include "mcam/array_model.hpp"
#include "mcam/core.hpp"
#include "mcam/scene.hpp"

namespace mcam {

enum class RunMode { Design, Render, Stitch, Depth, Tiled, Throughput, Pipeline };

std::string to_string(RunMode mode);
/// Throws ConfigError for an unknown name.
RunMode parse_run_mode(std::string_view name);
/// Modes that draw random numbers (scene textures, sensor noise).
bool is_stochastic(RunMode mode);

enum class SceneKind { Target, Texture, File };

struct SceneSource {
    SceneKind kind = SceneKind::Target;
    Vec2 extent_um{30000.0, 30000.0};
    std::optional<Vec2> center_um;          // default depends on the mode
    std::optional<double> sample_pitch_um;  // default: a quarter of delta/M
    std::optional<double> feature_um;       // texture lattice; default 8 * delta/M
    std::vector<double> spacings_um;        // target groups; default {8, 4, 2, 1} * delta/M
    double height_um = 0.0;
    std::string png_path;
    std::string sidecar_path;  // default: the PNG path with a .json extension
};

struct RenderSettings {
    std::optional<std::pair<int, int>> subarray;  // rows, cols from (0,0); default 2 x 2
    int window_width = 256;
    int window_height = 256;
    double mosaic_overlap = 0.3;
    double noise_std = 0.0;
    bool quantize = false;
    int binning = 1;
};

struct StitchSettings {
    int pyramid_tile_px = 256;
    double contrast_threshold = 0.26;
    bool feather = true;
};

struct DepthSettings {
    double z_min_um = -3000.0;
    double z_max_um = 3000.0;
    double step_um = 10.0;
    CameraIndex camera_a{0, 0};
    CameraIndex camera_b{0, 1};
    int window_px = 200;
    double noise_std = 0.0;
    std::optional<double> grid_pitch_um;  // height-map grid; default 4 * delta/M
};

struct TiledSettings {
    double overlap = 0.1;
    StepConvention convention = StepConvention::UniformShortAxis;
    bool serpentine = true;
    std::vector<double> axial_um{0.0};
    std::optional<Vec2> roi_center_um;  // default: inside camera (0,0)'s scan area
    Vec2 roi_size_um{600.0, 600.0};
    double coverage_spacing_um = 0.0;   // 0 = r_pix / 2
};

struct ThroughputSettings {
    double bandwidth_gb_s = 5.0;
    double buffer_gb = 128.0;
    int binning = 1;
    std::optional<std::pair<int, int>> crop_px;
    double efficiency = 1.0;
    std::optional<double> fps;
};

struct RunConfig {
    RunMode mode = RunMode::Pipeline;
    std::optional<std::string> preset;
    ArrayConfig array;
    SceneSource scene;
    std::optional<std::uint64_t> seed;
    std::string output_dir = "mcam_out";
    int threads = 0;  // 0 = hardware concurrency
    RenderSettings render;
    StitchSettings stitch;
    DepthSettings depth;
    TiledSettings tiled;
    ThroughputSettings throughput;
};

/// Values given on the command line; each one, when set, wins over the file.
struct ConfigOverrides {
    std::optional<RunMode> mode;
    std::optional<std::string> preset;
    std::optional<std::string> output_dir;
    std::optional<std::uint64_t> seed;
    std::optional<double> overlap;     // scan overlap (tiled) or mosaic overlap (render, stitch)
    std::optional<int> binning;        // throughput and rendered-frame binning
    std::optional<double> efficiency;
    std::optional<int> threads;
};

/// Every problem found in a configuration, one line each ("field: message").
class ConfigErrors : public ConfigError {
public:
    explicit ConfigErrors(std::vector<std::string> errors);
    const std::vector<std::string>& errors() const { return errors_; }

private:
    std::vector<std::string> errors_;
};

/// Out-of-range values in an otherwise well-formed configuration.
class ConfigDomainErrors : public DomainError {
public:
    explicit ConfigDomainErrors(std::vector<std::string> errors);
    const std::vector<std::string>& errors() const { return errors_; }

private:
    std::vector<std::string> errors_;
};

/// Parses and validates. Structural problems throw ConfigErrors; a config
/// that parses but holds out-of-range values throws ConfigDomainErrors.
/// An empty text is an empty document.
RunConfig validate_config(std::string_view text, const ConfigOverrides& overrides = {});

/// Canonical JSON of everything that determines a run's outputs (all
/// lengths in µm; output_dir and threads excluded). Stable key order.
std::string canonical_json(const RunConfig& config);

/// Unit-tagged JSON for an array configuration, and its inverse.
std::string array_config_json(const ArrayConfig& config);
ArrayConfig parse_array_config(std::string_view text);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

}  // namespace mcam
