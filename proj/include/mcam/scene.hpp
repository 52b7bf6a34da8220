#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "mcam/core.hpp"
#include "mcam/image.hpp"

namespace mcam {

/// Placement of a scene raster on the object plane.
struct SceneGeometry {
    Vec2 extent_um;             // requested physical size; rounded to whole texels
    double sample_pitch_um = 1.0;
    Vec2 center_um;             // object-plane position of the raster centre
};

/// Ground-truth object: intensity in [0,1] plus a height map (µm, positive
/// towards the lens) relative to the nominal focal plane, on the same grid.
struct Scene {
    TiledRaster intensity;
    TiledRaster height_um;
    double sample_pitch_um = 1.0;
    Vec2 origin_um;  // object-plane position of the corner of texel (0,0)

    Vec2 extent_um() const {
        return {static_cast<double>(intensity.width()) * sample_pitch_um,
                static_cast<double>(intensity.height()) * sample_pitch_um};
    }
    /// Continuous texel coordinates (texel (i,j) spans [i,i+1) x [j,j+1)).
    Vec2 to_texel(Vec2 object_um) const { return (object_um - origin_um) / sample_pitch_um; }
    Vec2 texel_center(std::int64_t i, std::int64_t j) const {
        return origin_um + Vec2{(static_cast<double>(i) + 0.5) * sample_pitch_um,
                                (static_cast<double>(j) + 0.5) * sample_pitch_um};
    }

    bool flat() const { return height_um.uniform(); }
    /// Bilinear height lookup; continues the edge value beyond the extent.
    double height_at(Vec2 object_um) const;

    void validate() const;
};

Scene make_blank_scene(const SceneGeometry& geometry, float background, double height_um = 0.0);

enum class BarOrientation {
    Vertical,    // bars run along y, contrast profile along x
    Horizontal,  // bars run along x, contrast profile along y
    Both,
};

struct ResolutionTargetSpec {
    std::vector<double> spacings_um;  // full-pitch (one dark + one bright bar), strictly decreasing
    int bars_per_group = 5;           // line pairs per group
    BarOrientation orientation = BarOrientation::Vertical;
    float background = 1.0f;
    float dark = 0.0f;
    float bright = 1.0f;
};

struct TargetGroup {
    double spacing_um = 0.0;
    BarOrientation orientation = BarOrientation::Vertical;  // never Both
    Vec2 min_um;
    Vec2 max_um;
};

struct TargetLayout {
    std::vector<TargetGroup> groups;
};

struct ResolutionTarget {
    Scene scene;
    TargetLayout layout;
};

/// Bar-group resolution chart. Groups are laid out left to right across the
/// scene centre unless `group_origins_um` gives the minimum (x, y) corner of each
/// group explicitly (one per spacing; for Both the horizontal-bar copy sits
/// directly below the vertical one).
ResolutionTarget make_resolution_target(const ResolutionTargetSpec& spec,
                                        const SceneGeometry& geometry,
                                        const std::vector<Vec2>& group_origins_um = {});

struct TextureSpec {
    double feature_um = 50.0;  // coarsest lattice spacing of the value noise
    int octaves = 3;
    std::uint64_t seed = 1;
    float low = 0.1f;
    float high = 0.9f;
};

/// Band-limited random texture evaluated in absolute object coordinates, so
/// two scenes with different extents agree wherever they overlap.
/// `region` restricts the textured area (min, max corners, µm); the rest
/// keeps `background`.
Scene make_texture_scene(const SceneGeometry& geometry, const TextureSpec& texture,
                         float background = 0.5f,
                         std::optional<std::pair<Vec2, Vec2>> region = std::nullopt);

/// Value of the texture at an object-plane point (the function sampled by
/// make_texture_scene).
double texture_value(const TextureSpec& texture, Vec2 object_um);

void add_gaussian_spot(Scene& scene, Vec2 center_um, double sigma_um, float amplitude);

void set_uniform_height(Scene& scene, double height_um);
void set_height_field(Scene& scene, const std::function<double(Vec2)>& height_of_point);

/// Mean intensity over the object-plane rectangle [min, max) with exact
/// fractional texel coverage; texels outside the scene count as 0.
double area_average(const Scene& scene, Vec2 min_um, Vec2 max_um);

/// Box-filtered copy of the scene intensity on a regular grid: cell (i,j)
/// covers [origin + i*pixel, origin + (i+1)*pixel).
Image downsample_scene(const Scene& scene, Vec2 origin_um, double pixel_um, int width, int height);

}  // namespace mcam
