#include "mcam/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

#include "json.hpp"
#include "mcam/presets.hpp"

namespace mcam {

using nlohmann::json;

namespace {

constexpr const char* kModeNames[] = {"design", "render", "stitch", "depth", "tiled", "throughput", "pipeline"};

std::string join_lines(const std::vector<std::string>& errors) {
    std::string s;
    for (const auto& e : errors) {
        if (!s.empty()) s += '\n';
        s += e;
    }
    return s;
}

bool number_pair(const json& v, Vec2& out) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) return false;
    out = {v[0].get<double>(), v[1].get<double>()};
    return true;
}

// Walks one JSON object, recording which keys were consumed so leftovers can
// be reported as unknown.
class Reader {
public:
    Reader(const json* object, std::string path, std::vector<std::string>& errors)
        : object_(object), path_(std::move(path)), errors_(&errors) {
        if (object_ && !object_->is_object()) {
            error("", "must be an object");
            object_ = nullptr;
        }
    }

    bool present() const { return object_ != nullptr; }

    template <class T>
    bool get(const std::string& key, T& out) {
        const json* v = take(key);
        if (!v) return false;
        if constexpr (std::is_same_v<T, bool>) {
            if (!v->is_boolean()) return type_error(key, "a boolean");
            out = v->get<bool>();
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v->is_string()) return type_error(key, "a string");
            out = v->get<std::string>();
        } else if constexpr (std::is_same_v<T, std::uint64_t>) {
            if (!v->is_number_unsigned()) return type_error(key, "a non-negative integer");
            out = v->get<std::uint64_t>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!v->is_number_integer()) return type_error(key, "an integer");
            const auto i = v->get<std::int64_t>();
            if (i < std::numeric_limits<T>::min() || i > std::numeric_limits<T>::max()) {
                return type_error(key, "an integer in range");
            }
            out = static_cast<T>(i);
        } else {
            if (!v->is_number()) return type_error(key, "a number");
            out = v->get<double>();
        }
        return true;
    }

    template <class T>
    bool get(const std::string& key, std::optional<T>& out) {
        T v{};
        if (!get(key, v)) return false;
        out = v;
        return true;
    }

    /// `base`_mm or `base`_um, stored in µm.
    bool length(const std::string& base, double& out_um) {
        const json* v = unit_value(base);
        if (!v) return false;
        if (!v->is_number()) return type_error(key_of(base), "a number");
        out_um = v->get<double>() * scale_;
        return true;
    }

    bool length(const std::string& base, std::optional<double>& out_um) {
        double v = 0.0;
        if (!length(base, v)) return false;
        out_um = v;
        return true;
    }

    /// [x, y] under base_mm / base_um.
    bool length_pair(const std::string& base, Vec2& out_um) {
        const json* v = unit_value(base);
        if (!v) return false;
        Vec2 p;
        if (!number_pair(*v, p)) return type_error(key_of(base), "an [x, y] number pair");
        out_um = p * scale_;
        return true;
    }

    bool length_pair(const std::string& base, std::optional<Vec2>& out_um) {
        Vec2 v;
        if (!length_pair(base, v)) return false;
        out_um = v;
        return true;
    }

    bool length_list(const std::string& base, std::vector<double>& out_um) {
        const json* v = unit_value(base);
        if (!v) return false;
        if (!v->is_array()) return type_error(key_of(base), "a list of numbers");
        std::vector<double> list;
        for (const json& e : *v) {
            if (!e.is_number()) return type_error(key_of(base), "a list of numbers");
            list.push_back(e.get<double>() * scale_);
        }
        out_um = std::move(list);
        return true;
    }

    bool pair_list(const std::string& base, std::vector<Vec2>& out_um) {
        const json* v = unit_value(base);
        if (!v) return false;
        if (!v->is_array()) return type_error(key_of(base), "a list of [x, y] pairs");
        std::vector<Vec2> list;
        for (const json& e : *v) {
            Vec2 p;
            if (!number_pair(e, p)) return type_error(key_of(base), "a list of [x, y] pairs");
            list.push_back(p * scale_);
        }
        out_um = std::move(list);
        return true;
    }

    bool int_pair(const std::string& key, std::pair<int, int>& out) {
        const json* v = take(key);
        if (!v) return false;
        if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number_integer() || !(*v)[1].is_number_integer()) {
            return type_error(key, "an [a, b] integer pair");
        }
        out = {(*v)[0].get<int>(), (*v)[1].get<int>()};
        return true;
    }

    bool camera(const std::string& key, CameraIndex& out) {
        std::pair<int, int> p;
        if (!int_pair(key, p)) return false;
        out = {p.first, p.second};
        return true;
    }

    Reader child(const std::string& key) {
        const json* v = take(key);
        return Reader(v, path_.empty() ? key : path_ + "." + key, *errors_);
    }

    /// Reports every key no getter consumed.
    void finish() {
        if (!object_) return;
        for (const auto& item : object_->items()) {
            const std::string& key = item.key();
            if (used_.count(key)) continue;
            if (lengths_.count(key)) {
                error(key, "lengths need a unit suffix (" + key + "_mm or " + key + "_um)");
            } else {
                error(key, "unknown key");
            }
        }
    }

    void error(const std::string& key, const std::string& message) {
        std::string field = path_;
        if (!key.empty()) field = field.empty() ? key : field + "." + key;
        errors_->push_back((field.empty() ? std::string("config") : field) + ": " + message);
    }

    void require(const std::string& key, bool found) {
        if (!found) error(key, "required");
    }

private:
    const json* take(const std::string& key) {
        if (!object_) return nullptr;
        auto it = object_->find(key);
        if (it == object_->end()) return nullptr;
        used_.insert(key);
        return &*it;
    }

    // Looks up base_mm / base_um, sets scale_ and unit_ for the found key.
    const json* unit_value(const std::string& base) {
        lengths_.insert(base);
        const json* mm = take(base + "_mm");
        const json* um = take(base + "_um");
        if (mm && um) {
            error(base, "give either " + base + "_mm or " + base + "_um, not both");
            return nullptr;
        }
        scale_ = mm ? 1000.0 : 1.0;
        unit_ = mm ? "_mm" : "_um";
        return mm ? mm : um;
    }

    std::string key_of(const std::string& base) const { return base + unit_; }

    bool type_error(const std::string& key, const std::string& expected) {
        error(key, "must be " + expected);
        return false;
    }

    const json* object_;
    std::string path_;
    std::vector<std::string>* errors_;
    std::set<std::string> used_;
    std::set<std::string> lengths_;
    double scale_ = 1.0;
    std::string unit_ = "_um";
};


// Reads array fields over `c`. Without a preset underneath, every field
// without a default must be present.
void read_array(Reader r, ArrayConfig& c, bool require_all) {
    const bool has_m = r.get("magnification", c.magnification);
    if (require_all) r.require("magnification", has_m);
    {
        Reader s = r.child("sensor");
        double pitch = c.sensor.pixel_pitch.in_um();
        const bool has_pitch = s.length("pixel", pitch);
        c.sensor.pixel_pitch = Length::um(pitch);
        const bool has_x = s.get("pixels_x", c.sensor.pixels_x);
        const bool has_y = s.get("pixels_y", c.sensor.pixels_y);
        s.get("bit_depth", c.sensor.bit_depth);
        if (require_all) {
            s.require("pixel_um", has_pitch);
            s.require("pixels_x", has_x);
            s.require("pixels_y", has_y);
        }
        s.finish();
    }
    {
        Reader l = r.child("lens");
        double f = c.lens.focal_length.in_um();
        const bool has_f = l.length("focal_length", f);
        c.lens.focal_length = Length::um(f);
        const bool has_n = l.get("f_number", c.lens.f_number);
        double od = c.lens.outer_diameter.in_um();
        l.length("outer_diameter", od);
        c.lens.outer_diameter = Length::um(od);
        if (require_all) {
            l.require("focal_length_mm", has_f);
            l.require("f_number", has_n);
        }
        l.finish();
    }
    {
        Reader g = r.child("layout");
        const bool has_rows = g.get("rows", c.layout.rows);
        const bool has_cols = g.get("cols", c.layout.cols);
        double px = c.layout.pitch_x.in_um(), py = c.layout.pitch_y.in_um(), both = 0.0;
        const bool has_both = g.length("pitch", both);
        if (has_both) px = py = both;
        const bool has_px = g.length("pitch_x", px) || has_both;
        const bool has_py = g.length("pitch_y", py) || has_both;
        c.layout.pitch_x = Length::um(px);
        c.layout.pitch_y = Length::um(py);
        if (require_all) {
            g.require("rows", has_rows);
            g.require("cols", has_cols);
            g.require("pitch_x_mm", has_px);
            g.require("pitch_y_mm", has_py);
        }
        g.finish();
    }
    r.pair_list("axis_offsets", c.axis_offsets_um);
    r.finish();
}

void read_scene(Reader r, SceneSource& s) {
    std::string type;
    if (r.get("type", type)) {
        if (type == "target") s.kind = SceneKind::Target;
        else if (type == "texture") s.kind = SceneKind::Texture;
        else if (type == "file") s.kind = SceneKind::File;
        else r.error("type", "expected target, texture or file, got '" + type + "'");
    }
    r.length_pair("extent", s.extent_um);
    r.length_pair("center", s.center_um);
    r.length("sample_pitch", s.sample_pitch_um);
    r.length("feature", s.feature_um);
    r.length_list("spacings", s.spacings_um);
    r.length("height", s.height_um);
    r.get("png", s.png_path);
    r.get("sidecar", s.sidecar_path);
    r.finish();
}

void read_render(Reader r, RenderSettings& s) {
    std::pair<int, int> sub;
    if (r.int_pair("subarray", sub)) s.subarray = sub;
    std::pair<int, int> w{s.window_width, s.window_height};
    if (r.int_pair("window_px", w)) {
        s.window_width = w.first;
        s.window_height = w.second;
    }
    r.get("mosaic_overlap", s.mosaic_overlap);
    r.get("noise_std", s.noise_std);
    r.get("quantize", s.quantize);
    r.get("binning", s.binning);
    r.finish();
}

void read_stitch(Reader r, StitchSettings& s) {
    r.get("pyramid_tile_px", s.pyramid_tile_px);
    r.get("contrast_threshold", s.contrast_threshold);
    r.get("feather", s.feather);
    r.finish();
}

void read_depth(Reader r, DepthSettings& s) {
    r.length("z_min", s.z_min_um);
    r.length("z_max", s.z_max_um);
    r.length("step", s.step_um);
    r.camera("camera_a", s.camera_a);
    r.camera("camera_b", s.camera_b);
    r.get("window_px", s.window_px);
    r.get("noise_std", s.noise_std);
    r.length("grid_pitch", s.grid_pitch_um);
    r.finish();
}

void read_tiled(Reader r, TiledSettings& s) {
    r.get("overlap", s.overlap);
    std::string conv;
    if (r.get("convention", conv)) {
        if (conv == "uniform_short_axis") s.convention = StepConvention::UniformShortAxis;
        else if (conv == "per_axis") s.convention = StepConvention::PerAxis;
        else r.error("convention", "expected uniform_short_axis or per_axis, got '" + conv + "'");
    }
    r.get("serpentine", s.serpentine);
    r.length_list("axial", s.axial_um);
    r.length_pair("roi_center", s.roi_center_um);
    r.length_pair("roi_size", s.roi_size_um);
    r.length("coverage_spacing", s.coverage_spacing_um);
    r.finish();
}

void read_throughput(Reader r, ThroughputSettings& s) {
    r.get("bandwidth_gb_s", s.bandwidth_gb_s);
    r.get("buffer_gb", s.buffer_gb);
    r.get("binning", s.binning);
    std::pair<int, int> crop;
    if (r.int_pair("crop_px", crop)) s.crop_px = crop;
    r.get("efficiency", s.efficiency);
    r.get("fps", s.fps);
    r.finish();
}

// Range checks over a structurally valid config; every failure is listed.
std::vector<std::string> domain_errors(const RunConfig& c) {
    std::vector<std::string> e;
    auto check = [&](bool ok, const std::string& msg) {
        if (!ok) e.push_back(msg);
    };
    auto finite_pos = [](double v) { return std::isfinite(v) && v > 0.0; };
    const ArrayConfig& a = c.array;
    check(finite_pos(a.magnification), "array.magnification: must be > 0");
    check(finite_pos(a.sensor.pixel_pitch.in_um()), "array.sensor.pixel_um: must be > 0");
    check(a.sensor.pixels_x >= 1 && a.sensor.pixels_y >= 1, "array.sensor.pixels_x/pixels_y: must be >= 1");
    check(a.sensor.bit_depth >= 1 && a.sensor.bit_depth <= 16, "array.sensor.bit_depth: must be in [1, 16]");
    check(finite_pos(a.lens.focal_length.in_um()), "array.lens.focal_length_mm: must be > 0");
    check(finite_pos(a.lens.f_number), "array.lens.f_number: must be > 0");
    check(a.lens.outer_diameter.in_um() >= 0.0, "array.lens.outer_diameter_mm: must be >= 0");
    check(a.layout.rows >= 1 && a.layout.cols >= 1, "array.layout.rows/cols: must be >= 1");
    const bool pitch_ok = finite_pos(a.layout.pitch_x.in_um()) && finite_pos(a.layout.pitch_y.in_um());
    check(pitch_ok, "array.layout.pitch: must be > 0");
    if (pitch_ok && e.empty()) {
        check(a.layout.pitch_x >= a.sensor.width() && a.layout.pitch_y >= a.sensor.height(),
              "array.layout.pitch: must be >= the sensor's active size (sensors cannot overlap)");
        check(a.lens.outer_diameter <= a.layout.pitch_x && a.lens.outer_diameter <= a.layout.pitch_y,
              "array.lens.outer_diameter_mm: must fit within the array pitch");
    }
    check(a.axis_offsets_um.empty() || a.axis_offsets_um.size() == static_cast<std::size_t>(a.layout.count()),
          "array.axis_offsets_um: must be empty or have rows*cols entries");

    const SceneSource& s = c.scene;
    check(finite_pos(s.extent_um.x) && finite_pos(s.extent_um.y), "scene.extent: must be > 0");
    check(!s.sample_pitch_um || finite_pos(*s.sample_pitch_um), "scene.sample_pitch: must be > 0");
    check(!s.feature_um || finite_pos(*s.feature_um), "scene.feature: must be > 0");
    for (std::size_t i = 0; i < s.spacings_um.size(); ++i) {
        check(finite_pos(s.spacings_um[i]), "scene.spacings: must be > 0");
        if (i > 0) check(s.spacings_um[i] < s.spacings_um[i - 1], "scene.spacings: must be strictly decreasing");
    }
    check(std::isfinite(s.height_um), "scene.height: must be finite");
    check(s.kind != SceneKind::File || !s.png_path.empty(), "scene.png: required for scene type file");

    const RenderSettings& r = c.render;
    check(r.window_width >= 16 && r.window_height >= 16, "render.window_px: must be at least 16 x 16");
    check(r.mosaic_overlap >= 0.0 && r.mosaic_overlap < 1.0, "render.mosaic_overlap: must be in [0, 1)");
    check(r.noise_std >= 0.0, "render.noise_std: must be >= 0");
    if (r.subarray) {
        check(r.subarray->first >= 1 && r.subarray->second >= 1 && r.subarray->first <= a.layout.rows &&
                  r.subarray->second <= a.layout.cols,
              "render.subarray: must lie within the array layout");
    }
    check(r.binning >= 1, "render.binning: must be >= 1");
    if (r.binning >= 1) {
        check(r.window_width % r.binning == 0 && r.window_height % r.binning == 0,
              "render.binning: must divide the window size");
    }

    check(c.stitch.pyramid_tile_px >= 16, "stitch.pyramid_tile_px: must be >= 16");
    check(c.stitch.contrast_threshold > 0.0 && c.stitch.contrast_threshold < 1.0,
          "stitch.contrast_threshold: must be in (0, 1)");

    const DepthSettings& d = c.depth;
    check(finite_pos(d.step_um), "depth.step: must be > 0");
    check(std::isfinite(d.z_min_um) && std::isfinite(d.z_max_um) && d.z_max_um >= d.z_min_um,
          "depth.z_max: must be >= depth.z_min");
    auto inside = [&](CameraIndex k) {
        return k.row >= 0 && k.col >= 0 && k.row < a.layout.rows && k.col < a.layout.cols;
    };
    check(inside(d.camera_a), "depth.camera_a: outside the array layout");
    check(inside(d.camera_b), "depth.camera_b: outside the array layout");
    check(!(d.camera_a == d.camera_b), "depth.camera_b: must differ from camera_a");
    check(d.window_px >= 32, "depth.window_px: must be >= 32");
    check(d.noise_std >= 0.0, "depth.noise_std: must be >= 0");
    check(!d.grid_pitch_um || finite_pos(*d.grid_pitch_um), "depth.grid_pitch: must be > 0");

    const TiledSettings& t = c.tiled;
    check(t.overlap >= 0.0 && t.overlap <= 0.5, "tiled.overlap: must be in [0, 0.5]");
    check(!t.axial_um.empty(), "tiled.axial: must list at least one offset");
    {
        std::vector<double> z = t.axial_um;
        std::sort(z.begin(), z.end());
        check(std::adjacent_find(z.begin(), z.end()) == z.end(), "tiled.axial: offsets must be distinct");
        check(std::all_of(z.begin(), z.end(), [](double v) { return std::isfinite(v); }),
              "tiled.axial: offsets must be finite");
    }
    check(finite_pos(t.roi_size_um.x) && finite_pos(t.roi_size_um.y), "tiled.roi_size: must be > 0");
    check(t.coverage_spacing_um >= 0.0, "tiled.coverage_spacing: must be >= 0");

    const ThroughputSettings& p = c.throughput;
    check(finite_pos(p.bandwidth_gb_s), "throughput.bandwidth_gb_s: must be > 0");
    check(finite_pos(p.buffer_gb), "throughput.buffer_gb: must be > 0");
    check(p.binning >= 1, "throughput.binning: must be >= 1");
    if (p.crop_px) {
        check(p.crop_px->first >= 1 && p.crop_px->second >= 1 && p.crop_px->first <= a.sensor.pixels_x &&
                  p.crop_px->second <= a.sensor.pixels_y,
              "throughput.crop_px: must lie within the sensor");
    }
    check(p.efficiency > 0.0 && p.efficiency <= 1.0, "throughput.efficiency: must be in (0, 1]");
    check(!p.fps || finite_pos(*p.fps), "throughput.fps: must be > 0");
    check(c.threads >= 0, "threads: must be >= 0");
    return e;
}

json vec_json(Vec2 v) { return json::array({v.x, v.y}); }

json array_to_json(const ArrayConfig& c) {
    json j;
    j["magnification"] = c.magnification;
    j["sensor"] = {{"pixel_um", c.sensor.pixel_pitch.in_um()},
                   {"pixels_x", c.sensor.pixels_x},
                   {"pixels_y", c.sensor.pixels_y},
                   {"bit_depth", c.sensor.bit_depth}};
    j["lens"] = {{"focal_length_um", c.lens.focal_length.in_um()},
                 {"f_number", c.lens.f_number},
                 {"outer_diameter_um", c.lens.outer_diameter.in_um()}};
    j["layout"] = {{"rows", c.layout.rows},
                   {"cols", c.layout.cols},
                   {"pitch_x_um", c.layout.pitch_x.in_um()},
                   {"pitch_y_um", c.layout.pitch_y.in_um()}};
    if (!c.axis_offsets_um.empty()) {
        json offs = json::array();
        for (Vec2 v : c.axis_offsets_um) offs.push_back(vec_json(v));
        j["axis_offsets_um"] = offs;
    }
    return j;
}

std::string convention_name(StepConvention c) {
    return c == StepConvention::PerAxis ? "per_axis" : "uniform_short_axis";
}

std::string scene_kind_name(SceneKind k) {
    switch (k) {
        case SceneKind::Target: return "target";
        case SceneKind::Texture: return "texture";
        case SceneKind::File: return "file";
    }
    return "target";
}

}  // namespace

ConfigErrors::ConfigErrors(std::vector<std::string> errors)
    : ConfigError(join_lines(errors)), errors_(std::move(errors)) {}

ConfigDomainErrors::ConfigDomainErrors(std::vector<std::string> errors)
    : DomainError(join_lines(errors)), errors_(std::move(errors)) {}

std::string to_string(RunMode mode) { return kModeNames[static_cast<int>(mode)]; }

RunMode parse_run_mode(std::string_view name) {
    for (int i = 0; i < 7; ++i) {
        if (name == kModeNames[i]) return static_cast<RunMode>(i);
    }
    throw ConfigError("unknown mode '" + std::string(name) +
                      "' (expected design, render, stitch, depth, tiled, throughput or pipeline)");
}

bool is_stochastic(RunMode mode) { return mode != RunMode::Design && mode != RunMode::Throughput; }

RunConfig validate_config(std::string_view text, const ConfigOverrides& overrides) {
    json doc = json::object();
    const bool blank = std::all_of(text.begin(), text.end(), [](char ch) { return std::isspace(static_cast<unsigned char>(ch)); });
    if (!blank) {
        try {
            doc = json::parse(text);
        } catch (const json::parse_error& ex) {
            throw ConfigErrors({std::string("config: not valid JSON (") + ex.what() + ")"});
        }
    }
    std::vector<std::string> errors;
    Reader top(&doc, "", errors);
    RunConfig c;

    std::string mode;
    if (top.get("mode", mode)) {
        try {
            c.mode = parse_run_mode(mode);
        } catch (const ConfigError& ex) {
            top.error("mode", ex.what());
        }
    }
    if (overrides.mode) c.mode = *overrides.mode;

    std::optional<std::string> preset;
    top.get("preset", preset);
    if (overrides.preset) preset = overrides.preset;
    bool have_base = false;
    if (preset) {
        try {
            c.array = find_preset(*preset).config;
            c.preset = preset;
            have_base = true;
        } catch (const ConfigError& ex) {
            errors.push_back(std::string("preset: ") + ex.what());
        }
    }
    Reader array = top.child("array");
    if (!array.present() && !preset) {
        errors.push_back("array: required when no preset is given");
    } else {
        read_array(std::move(array), c.array, !have_base && !preset);
    }

    top.get("seed", c.seed);
    top.get("output_dir", c.output_dir);
    top.get("threads", c.threads);
    read_scene(top.child("scene"), c.scene);
    read_render(top.child("render"), c.render);
    read_stitch(top.child("stitch"), c.stitch);
    read_depth(top.child("depth"), c.depth);
    read_tiled(top.child("tiled"), c.tiled);
    read_throughput(top.child("throughput"), c.throughput);
    top.finish();

    if (overrides.output_dir) c.output_dir = *overrides.output_dir;
    if (overrides.seed) c.seed = overrides.seed;
    if (overrides.overlap) {
        if (c.mode == RunMode::Render || c.mode == RunMode::Stitch) c.render.mosaic_overlap = *overrides.overlap;
        else c.tiled.overlap = *overrides.overlap;
    }
    if (overrides.binning) {
        c.throughput.binning = *overrides.binning;
        c.render.binning = *overrides.binning;
    }
    if (overrides.efficiency) c.throughput.efficiency = *overrides.efficiency;
    if (overrides.threads) c.threads = *overrides.threads;

    if (is_stochastic(c.mode) && !c.seed) errors.push_back("seed: required for mode " + to_string(c.mode));
    if (!errors.empty()) throw ConfigErrors(std::move(errors));

    std::vector<std::string> range = domain_errors(c);
    if (!range.empty()) throw ConfigDomainErrors(std::move(range));
    return c;
}

std::string canonical_json(const RunConfig& c) {
    json j;
    j["mode"] = to_string(c.mode);
    if (c.preset) j["preset"] = *c.preset;
    j["array"] = array_to_json(c.array);
    j["seed"] = c.seed ? json(*c.seed) : json(nullptr);

    json scene = {{"type", scene_kind_name(c.scene.kind)},
                  {"extent_um", vec_json(c.scene.extent_um)},
                  {"height_um", c.scene.height_um}};
    if (c.scene.center_um) scene["center_um"] = vec_json(*c.scene.center_um);
    if (c.scene.sample_pitch_um) scene["sample_pitch_um"] = *c.scene.sample_pitch_um;
    if (c.scene.feature_um) scene["feature_um"] = *c.scene.feature_um;
    if (!c.scene.spacings_um.empty()) scene["spacings_um"] = c.scene.spacings_um;
    if (!c.scene.png_path.empty()) scene["png"] = c.scene.png_path;
    if (!c.scene.sidecar_path.empty()) scene["sidecar"] = c.scene.sidecar_path;
    j["scene"] = scene;

    j["render"] = {{"window_px", {c.render.window_width, c.render.window_height}},
                   {"mosaic_overlap", c.render.mosaic_overlap},
                   {"noise_std", c.render.noise_std},
                   {"quantize", c.render.quantize},
                   {"binning", c.render.binning}};
    if (c.render.subarray) j["render"]["subarray"] = {c.render.subarray->first, c.render.subarray->second};
    j["stitch"] = {{"pyramid_tile_px", c.stitch.pyramid_tile_px},
                   {"contrast_threshold", c.stitch.contrast_threshold},
                   {"feather", c.stitch.feather}};
    json depth = {{"z_min_um", c.depth.z_min_um},
                  {"z_max_um", c.depth.z_max_um},
                  {"step_um", c.depth.step_um},
                  {"camera_a", {c.depth.camera_a.row, c.depth.camera_a.col}},
                  {"camera_b", {c.depth.camera_b.row, c.depth.camera_b.col}},
                  {"window_px", c.depth.window_px},
                  {"noise_std", c.depth.noise_std}};
    if (c.depth.grid_pitch_um) depth["grid_pitch_um"] = *c.depth.grid_pitch_um;
    j["depth"] = depth;
    json tiled = {{"overlap", c.tiled.overlap},
                  {"convention", convention_name(c.tiled.convention)},
                  {"serpentine", c.tiled.serpentine},
                  {"axial_um", c.tiled.axial_um},
                  {"roi_size_um", vec_json(c.tiled.roi_size_um)},
                  {"coverage_spacing_um", c.tiled.coverage_spacing_um}};
    if (c.tiled.roi_center_um) tiled["roi_center_um"] = vec_json(*c.tiled.roi_center_um);
    j["tiled"] = tiled;
    json tp = {{"bandwidth_gb_s", c.throughput.bandwidth_gb_s},
               {"buffer_gb", c.throughput.buffer_gb},
               {"binning", c.throughput.binning},
               {"efficiency", c.throughput.efficiency}};
    if (c.throughput.crop_px) tp["crop_px"] = {c.throughput.crop_px->first, c.throughput.crop_px->second};
    if (c.throughput.fps) tp["fps"] = *c.throughput.fps;
    j["throughput"] = tp;
    return j.dump(2) + "\n";
}

std::string array_config_json(const ArrayConfig& config) { return array_to_json(config).dump(2) + "\n"; }

ArrayConfig parse_array_config(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& ex) {
        throw ConfigErrors({std::string("array: not valid JSON (") + ex.what() + ")"});
    }
    std::vector<std::string> errors;
    ArrayConfig c;
    read_array(Reader(&doc, "array", errors), c, true);
    if (!errors.empty()) throw ConfigErrors(std::move(errors));
    c.validate();
    return c;
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace mcam
