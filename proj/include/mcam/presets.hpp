#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "mcam/array_model.hpp"

namespace mcam {

/// A named array configuration together with the rounded nominal values
/// reported for the built instrument.
struct Preset {
    std::string name;
    ArrayConfig config;
    double nominal_resolution_um = 0.0;
    double nominal_camera_fov_mm = 0.0;  // short axis
    double nominal_working_distance_mm = 0.0;
};

/// 6x9 array of 3120x4208 sensors (1.1 µm pixels) at 13.5 mm pitch behind
/// 25.05 mm f/4 lenses, set to magnification `m`.
ArrayConfig prototype_config(double m);

/// multi_view, continuous, tiled, quad_board.
const std::vector<Preset>& preset_catalog();

/// Throws ConfigError for an unknown name.
const Preset& find_preset(std::string_view name);

}  // namespace mcam
