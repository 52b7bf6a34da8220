#include "mcam/presets.hpp"

#include "mcam/core.hpp"

namespace mcam {

ArrayConfig prototype_config(double m) {
    ArrayConfig c;
    c.sensor = {Length::um(1.1), 4208, 3120, 8};
    c.lens = {Length::mm(25.05), 4.0, Length::mm(13.0)};
    c.layout = {6, 9, Length::mm(13.5), Length::mm(13.5)};
    c.magnification = m;
    return c;
}

namespace {

ArrayConfig quad_board_config() {
    // Four 4x6 boards joined into 8x12 at 19 mm pitch. The 10 MP sensor
    // format is taken as 3664x2748 with 1.4 µm pixels; lens as prototype.
    ArrayConfig c;
    c.sensor = {Length::um(1.4), 3664, 2748, 8};
    c.lens = {Length::mm(25.05), 4.0, Length::mm(13.0)};
    c.layout = {8, 12, Length::mm(19.0), Length::mm(19.0)};
    c.magnification = 0.14;
    return c;
}

std::vector<Preset> build_catalog() {
    return {
        {"multi_view", prototype_config(0.1), 20.0, 32.0, 250.0},
        {"continuous", prototype_config(0.2), 10.0, 16.0, 140.0},
        {"tiled", prototype_config(1.0), 2.0, 3.5, 5.0},
        {"quad_board", quad_board_config(), 0.0, 0.0, 0.0},
    };
}

}  // namespace

const std::vector<Preset>& preset_catalog() {
    static const std::vector<Preset> catalog = build_catalog();
    return catalog;
}

const Preset& find_preset(std::string_view name) {
    for (const auto& p : preset_catalog()) {
        if (p.name == name) return p;
    }
    throw ConfigError("unknown preset '" + std::string(name) +
                      "' (expected multi_view, continuous, tiled or quad_board)");
}

}  // namespace mcam
