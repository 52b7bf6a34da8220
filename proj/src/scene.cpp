#include "mcam/scene.hpp"

#include <algorithm>
#include <cmath>

#include "mcam/rng.hpp"

namespace mcam {

namespace {

// Texel range whose centres fall inside [lo, hi) along one axis.
std::pair<std::int64_t, std::int64_t> texel_span(double lo_texel, double hi_texel, std::int64_t n) {
    const auto a = static_cast<std::int64_t>(std::ceil(lo_texel - 0.5));
    const auto b = static_cast<std::int64_t>(std::ceil(hi_texel - 0.5));
    return {std::clamp<std::int64_t>(a, 0, n), std::clamp<std::int64_t>(b, 0, n)};
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

double lattice_value(std::uint64_t seed, int octave, std::int64_t i, std::int64_t j) {
    std::uint64_t h = hash_combine(seed, static_cast<std::uint64_t>(octave));
    h = hash_combine(h, static_cast<std::uint64_t>(i));
    h = hash_combine(h, static_cast<std::uint64_t>(j));
    return static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);
}

double value_noise(std::uint64_t seed, int octave, double x, double y) {
    const double fx = std::floor(x);
    const double fy = std::floor(y);
    const auto i = static_cast<std::int64_t>(fx);
    const auto j = static_cast<std::int64_t>(fy);
    const double tx = smooth(x - fx);
    const double ty = smooth(y - fy);
    const double a = lattice_value(seed, octave, i, j);
    const double b = lattice_value(seed, octave, i + 1, j);
    const double c = lattice_value(seed, octave, i, j + 1);
    const double d = lattice_value(seed, octave, i + 1, j + 1);
    return (1.0 - ty) * ((1.0 - tx) * a + tx * b) + ty * ((1.0 - tx) * c + tx * d);
}

}  // namespace

double Scene::height_at(Vec2 object_um) const {
    if (height_um.uniform()) return height_um.fill();
    const Vec2 t = to_texel(object_um) - Vec2{0.5, 0.5};
    const double fx = std::floor(t.x);
    const double fy = std::floor(t.y);
    const std::int64_t w = height_um.width();
    const std::int64_t h = height_um.height();
    const auto cx = [&](std::int64_t i) { return std::clamp<std::int64_t>(i, 0, w - 1); };
    const auto cy = [&](std::int64_t j) { return std::clamp<std::int64_t>(j, 0, h - 1); };
    const auto i0 = static_cast<std::int64_t>(fx);
    const auto j0 = static_cast<std::int64_t>(fy);
    const double ax = t.x - fx;
    const double ay = t.y - fy;
    const double v00 = height_um.at(cx(i0), cy(j0));
    const double v10 = height_um.at(cx(i0 + 1), cy(j0));
    const double v01 = height_um.at(cx(i0), cy(j0 + 1));
    const double v11 = height_um.at(cx(i0 + 1), cy(j0 + 1));
    return (1.0 - ay) * ((1.0 - ax) * v00 + ax * v10) + ay * ((1.0 - ax) * v01 + ax * v11);
}

void Scene::validate() const {
    if (!(sample_pitch_um > 0.0)) throw DomainError("scene sample pitch must be > 0");
    if (intensity.width() != height_um.width() || intensity.height() != height_um.height()) {
        throw DomainError("scene intensity and height rasters differ in size");
    }
}

Scene make_blank_scene(const SceneGeometry& geometry, float background, double height_um) {
    if (!(geometry.sample_pitch_um > 0.0)) throw DomainError("scene sample pitch must be > 0");
    if (!(geometry.extent_um.x > 0.0) || !(geometry.extent_um.y > 0.0)) {
        throw DomainError("scene extent must be > 0");
    }
    if (!std::isfinite(height_um)) throw DomainError("scene height must be finite");
    const auto nx = std::max<std::int64_t>(1, std::llround(geometry.extent_um.x / geometry.sample_pitch_um));
    const auto ny = std::max<std::int64_t>(1, std::llround(geometry.extent_um.y / geometry.sample_pitch_um));
    Scene s;
    s.sample_pitch_um = geometry.sample_pitch_um;
    s.intensity = TiledRaster(nx, ny, background, 0.0f);
    const auto h = static_cast<float>(height_um);
    s.height_um = TiledRaster(nx, ny, h, h);
    s.origin_um = geometry.center_um - Vec2{static_cast<double>(nx) * geometry.sample_pitch_um / 2.0,
                                            static_cast<double>(ny) * geometry.sample_pitch_um / 2.0};
    return s;
}

ResolutionTarget make_resolution_target(const ResolutionTargetSpec& spec,
                                        const SceneGeometry& geometry,
                                        const std::vector<Vec2>& group_origins_um) {
    if (spec.spacings_um.empty()) throw DomainError("resolution target needs at least one group");
    if (spec.bars_per_group < 1) throw DomainError("bars_per_group must be >= 1");
    for (std::size_t i = 1; i < spec.spacings_um.size(); ++i) {
        if (!(spec.spacings_um[i] < spec.spacings_um[i - 1])) {
            throw DomainError("resolution target spacings must be strictly decreasing");
        }
    }
    for (double s : spec.spacings_um) {
        if (s < 2.0 * geometry.sample_pitch_um * (1.0 - 1e-9)) {
            throw DomainError("resolution target spacing below 2 * sample_pitch is unrepresentable");
        }
    }
    if (!group_origins_um.empty() && group_origins_um.size() != spec.spacings_um.size()) {
        throw DomainError("group_origins_um must have one entry per spacing");
    }

    ResolutionTarget out{make_blank_scene(geometry, spec.background), {}};
    Scene& scene = out.scene;
    const Vec2 lo = scene.origin_um;
    const Vec2 hi = scene.origin_um + scene.extent_um();
    const bool both = spec.orientation == BarOrientation::Both;

    // Auto layout: one row of groups centred in the scene.
    std::vector<Vec2> origins = group_origins_um;
    if (origins.empty()) {
        const double gap = spec.spacings_um.front();
        double total = 0.0;
        for (double s : spec.spacings_um) total += s * spec.bars_per_group + gap;
        total -= gap;
        const double tallest = spec.spacings_um.front() * spec.bars_per_group * (both ? 2.0 : 1.0) +
                               (both ? gap : 0.0);
        double x = geometry.center_um.x - total / 2.0;
        const double y = geometry.center_um.y - tallest / 2.0;
        for (double s : spec.spacings_um) {
            origins.push_back({x, y});
            x += s * spec.bars_per_group + gap;
        }
    }

    const auto paint = [&](double spacing, BarOrientation orient, Vec2 gmin) {
        const double size = spacing * spec.bars_per_group;
        const Vec2 gmax = gmin + Vec2{size, size};
        if (gmin.x < lo.x - 1e-9 || gmin.y < lo.y - 1e-9 || gmax.x > hi.x + 1e-9 || gmax.y > hi.y + 1e-9) {
            throw DomainError("resolution target group does not fit inside the scene extent");
        }
        const Vec2 tmin = scene.to_texel(gmin);
        const Vec2 tmax = scene.to_texel(gmax);
        const auto [i0, i1] = texel_span(tmin.x, tmax.x, scene.intensity.width());
        const auto [j0, j1] = texel_span(tmin.y, tmax.y, scene.intensity.height());
        for (std::int64_t j = j0; j < j1; ++j) {
            for (std::int64_t i = i0; i < i1; ++i) {
                const Vec2 c = scene.texel_center(i, j);
                const double along = orient == BarOrientation::Vertical ? c.x - gmin.x : c.y - gmin.y;
                const double phase = along / spacing - std::floor(along / spacing);
                scene.intensity.set(i, j, phase < 0.5 ? spec.dark : spec.bright);
            }
        }
        out.layout.groups.push_back({spacing, orient, gmin, gmax});
    };

    for (std::size_t g = 0; g < spec.spacings_um.size(); ++g) {
        const double s = spec.spacings_um[g];
        const Vec2 o = origins[g];
        if (spec.orientation == BarOrientation::Horizontal) {
            paint(s, BarOrientation::Horizontal, o);
        } else {
            paint(s, BarOrientation::Vertical, o);
            if (both) paint(s, BarOrientation::Horizontal, o + Vec2{0.0, s * spec.bars_per_group + spec.spacings_um.front()});
        }
    }
    return out;
}

double texture_value(const TextureSpec& texture, Vec2 p) {
    double sum = 0.0;
    double norm = 0.0;
    double spacing = texture.feature_um;
    double amp = 1.0;
    for (int o = 0; o < std::max(1, texture.octaves); ++o) {
        sum += amp * value_noise(texture.seed, o, p.x / spacing, p.y / spacing);
        norm += amp;
        spacing /= 2.0;
        amp *= 0.6;
    }
    // Averaged lattice noise clusters around 0.5; stretch it back out.
    const double v = std::clamp((sum / norm - 0.5) * 3.0 + 0.5, 0.0, 1.0);
    return texture.low + (texture.high - texture.low) * v;
}

Scene make_texture_scene(const SceneGeometry& geometry, const TextureSpec& texture, float background,
                         std::optional<std::pair<Vec2, Vec2>> region) {
    if (!(texture.feature_um > 0.0)) throw DomainError("texture feature size must be > 0");
    Scene scene = make_blank_scene(geometry, background);
    std::int64_t i0 = 0, i1 = scene.intensity.width();
    std::int64_t j0 = 0, j1 = scene.intensity.height();
    if (region) {
        const Vec2 tmin = scene.to_texel(region->first);
        const Vec2 tmax = scene.to_texel(region->second);
        std::tie(i0, i1) = texel_span(tmin.x, tmax.x, scene.intensity.width());
        std::tie(j0, j1) = texel_span(tmin.y, tmax.y, scene.intensity.height());
    }
    for (std::int64_t j = j0; j < j1; ++j) {
        for (std::int64_t i = i0; i < i1; ++i) {
            scene.intensity.set(i, j, static_cast<float>(texture_value(texture, scene.texel_center(i, j))));
        }
    }
    return scene;
}

void add_gaussian_spot(Scene& scene, Vec2 center_um, double sigma_um, float amplitude) {
    if (!(sigma_um > 0.0)) throw DomainError("spot sigma must be > 0");
    const double r = 4.0 * sigma_um;
    const Vec2 tmin = scene.to_texel(center_um - Vec2{r, r});
    const Vec2 tmax = scene.to_texel(center_um + Vec2{r, r});
    const auto [i0, i1] = texel_span(tmin.x, tmax.x, scene.intensity.width());
    const auto [j0, j1] = texel_span(tmin.y, tmax.y, scene.intensity.height());
    for (std::int64_t j = j0; j < j1; ++j) {
        for (std::int64_t i = i0; i < i1; ++i) {
            const Vec2 d = scene.texel_center(i, j) - center_um;
            const double g = std::exp(-0.5 * dot(d, d) / (sigma_um * sigma_um));
            const double v = scene.intensity.at(i, j) + amplitude * g;
            scene.intensity.set(i, j, static_cast<float>(std::clamp(v, 0.0, 1.0)));
        }
    }
}

void set_uniform_height(Scene& scene, double height_um) {
    if (!std::isfinite(height_um)) throw DomainError("scene height must be finite");
    const auto h = static_cast<float>(height_um);
    scene.height_um = TiledRaster(scene.intensity.width(), scene.intensity.height(), h, h);
}

void set_height_field(Scene& scene, const std::function<double(Vec2)>& height_of_point) {
    TiledRaster field(scene.intensity.width(), scene.intensity.height(), 0.0f, 0.0f);
    for (std::int64_t j = 0; j < field.height(); ++j) {
        for (std::int64_t i = 0; i < field.width(); ++i) {
            const double h = height_of_point(scene.texel_center(i, j));
            if (!std::isfinite(h)) throw DomainError("height field must be finite everywhere");
            field.set(i, j, static_cast<float>(h));
        }
    }
    scene.height_um = std::move(field);
}

double area_average(const Scene& scene, Vec2 min_um, Vec2 max_um) {
    const Vec2 t0 = scene.to_texel(min_um);
    const Vec2 t1 = scene.to_texel(max_um);
    const double area = (t1.x - t0.x) * (t1.y - t0.y);
    if (!(area > 0.0)) return 0.0;
    const auto i0 = static_cast<std::int64_t>(std::floor(t0.x));
    const auto i1 = static_cast<std::int64_t>(std::ceil(t1.x));
    const auto j0 = static_cast<std::int64_t>(std::floor(t0.y));
    const auto j1 = static_cast<std::int64_t>(std::ceil(t1.y));
    double sum = 0.0;
    for (std::int64_t j = j0; j < j1; ++j) {
        const double wy = std::min(t1.y, static_cast<double>(j + 1)) - std::max(t0.y, static_cast<double>(j));
        if (wy <= 0.0) continue;
        double rowsum = 0.0;
        for (std::int64_t i = i0; i < i1; ++i) {
            const double wx = std::min(t1.x, static_cast<double>(i + 1)) - std::max(t0.x, static_cast<double>(i));
            if (wx <= 0.0) continue;
            rowsum += wx * scene.intensity.at(i, j);
        }
        sum += wy * rowsum;
    }
    return sum / area;
}

Image downsample_scene(const Scene& scene, Vec2 origin_um, double pixel_um, int width, int height) {
    Image out(width, height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const Vec2 a = origin_um + Vec2{x * pixel_um, y * pixel_um};
            out.at(x, y) = static_cast<float>(area_average(scene, a, a + Vec2{pixel_um, pixel_um}));
        }
    }
    return out;
}

}  // namespace mcam
