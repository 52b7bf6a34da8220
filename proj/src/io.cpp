#include "mcam/io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include "json.hpp"
#include "mcam/config.hpp"

namespace mcam {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ReadCursor {
    const std::vector<std::uint8_t>* bytes;
    std::size_t pos = 0;
};

void png_read_bytes(png_structp png, png_bytep out, png_size_t n) {
    auto* c = static_cast<ReadCursor*>(png_get_io_ptr(png));
    if (c->pos + n > c->bytes->size()) png_error(png, "truncated PNG data");
    std::memcpy(out, c->bytes->data() + c->pos, n);
    c->pos += n;
}

void png_write_bytes(png_structp png, png_bytep data, png_size_t n) {
    auto* v = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    v->insert(v->end(), data, data + n);
}

void png_flush_noop(png_structp) {}

// Keeps libpng's message for the exception thrown after longjmp.
thread_local char t_png_message[256];

void png_on_error(png_structp png, png_const_charp msg) {
    std::snprintf(t_png_message, sizeof t_png_message, "%s", msg);
    png_longjmp(png, 1);
}

void png_on_warning(png_structp, png_const_charp) {}

json read_json_file(const fs::path& path) {
    const std::vector<std::uint8_t> bytes = read_file(path);
    try {
        return json::parse(bytes.begin(), bytes.end());
    } catch (const json::parse_error& ex) {
        throw IoError(path.string() + ": not valid JSON (" + ex.what() + ")");
    }
}

json vec_json(Vec2 v) { return json::array({v.x, v.y}); }

Vec2 json_vec(const json& j, const std::string& what) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
        throw IoError(what + ": expected an [x, y] pair");
    }
    return {j[0].get<double>(), j[1].get<double>()};
}

// Optional length in µm under base_um or base_mm.
std::optional<double> sidecar_length(const json& j, const std::string& base, const std::string& file) {
    const bool um = j.contains(base + "_um"), mm = j.contains(base + "_mm");
    if (um && mm) throw IoError(file + ": give either " + base + "_um or " + base + "_mm");
    if (!um && !mm) return std::nullopt;
    const json& v = j.at(base + (um ? "_um" : "_mm"));
    if (!v.is_number()) throw IoError(file + ": " + base + " must be a number");
    return v.get<double>() * (mm ? 1000.0 : 1.0);
}

std::optional<Vec2> sidecar_pair(const json& j, const std::string& base, const std::string& file) {
    const bool um = j.contains(base + "_um"), mm = j.contains(base + "_mm");
    if (um && mm) throw IoError(file + ": give either " + base + "_um or " + base + "_mm");
    if (!um && !mm) return std::nullopt;
    return json_vec(j.at(base + (um ? "_um" : "_mm")), file + ": " + base) * (mm ? 1000.0 : 1.0);
}

}  // namespace

std::vector<std::uint8_t> encode_png(const GrayPng& img) {
    if (img.bit_depth != 8 && img.bit_depth != 16) throw DomainError("encode_png: bit depth must be 8 or 16");
    if (img.width < 1 || img.height < 1) throw DomainError("encode_png: empty image");
    if (img.samples.size() != static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height)) {
        throw DomainError("encode_png: sample count does not match the size");
    }
    const unsigned limit = 1u << img.bit_depth;
    for (std::uint16_t v : img.samples) {
        if (v >= limit) throw DomainError("encode_png: sample exceeds the bit depth");
    }
    const int bps = img.bit_depth / 8;
    std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width) * bps);
    std::vector<std::uint8_t> out;

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_on_error, png_on_warning);
    if (!png) throw IoError("encode_png: out of memory");
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, info ? &info : nullptr);
        throw IoError(std::string("encode_png: ") + t_png_message);
    }
    png_set_write_fn(png, &out, png_write_bytes, png_flush_noop);
    png_set_compression_level(png, 6);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height),
                 img.bit_depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y) {
        const std::uint16_t* src = img.samples.data() + static_cast<std::size_t>(y) * img.width;
        for (int x = 0; x < img.width; ++x) {
            if (bps == 1) {
                row[x] = static_cast<std::uint8_t>(src[x]);
            } else {
                row[2 * x] = static_cast<std::uint8_t>(src[x] >> 8);
                row[2 * x + 1] = static_cast<std::uint8_t>(src[x] & 0xff);
            }
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

GrayPng decode_png(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw IoError("decode_png: not a PNG file");
    ReadCursor cursor{&bytes, 0};
    GrayPng img;
    // Declared before setjmp so a longjmp never skips their destructors.
    std::vector<std::uint8_t> all;
    std::vector<png_bytep> rows;

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_on_error, png_on_warning);
    if (!png) throw IoError("decode_png: out of memory");
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        throw IoError(std::string("decode_png: ") + t_png_message);
    }
    png_set_read_fn(png, &cursor, png_read_bytes);
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_set_interlace_handling(png);
    png_read_update_info(png, info);

    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    img.bit_depth = png_get_bit_depth(png, info) == 16 ? 16 : 8;
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    const int bps = img.bit_depth / 8;
    const int channels = png_get_channels(png, info);
    if ((channels != 1 && channels != 3) || rowbytes != static_cast<std::size_t>(img.width) * bps * channels) {
        png_error(png, "unexpected channel layout after conversion");
    }
    // Interlaced images need every row in memory at once.
    all.resize(rowbytes * img.height);
    rows.resize(img.height);
    for (int y = 0; y < img.height; ++y) rows[y] = all.data() + rowbytes * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    const auto sample = [&](std::size_t k) -> double {
        return bps == 1 ? all[k] : static_cast<double>((all[2 * k] << 8) | all[2 * k + 1]);
    };
    img.samples.resize(static_cast<std::size_t>(img.width) * img.height);
    for (std::size_t i = 0; i < img.samples.size(); ++i) {
        // Weights apply to the stored values; no gamma handling.
        const double v = channels == 1 ? sample(i)
                                       : 0.2126 * sample(3 * i) + 0.7152 * sample(3 * i + 1) +
                                             0.0722 * sample(3 * i + 2);
        img.samples[i] = static_cast<std::uint16_t>(std::lround(v));
    }
    return img;
}

GrayPng quantize(const Image& image, int bit_depth) {
    if (bit_depth != 8 && bit_depth != 16) throw DomainError("quantize: bit depth must be 8 or 16");
    const double full = bit_depth == 8 ? 255.0 : 65535.0;
    GrayPng out{image.width(), image.height(), bit_depth, {}};
    out.samples.reserve(image.size());
    for (float v : image.pixels()) {
        const double c = std::isfinite(v) ? std::clamp(static_cast<double>(v), 0.0, 1.0) : 0.0;
        out.samples.push_back(static_cast<std::uint16_t>(std::lround(c * full)));
    }
    return out;
}

Image to_image(const GrayPng& png) {
    const double inv = 1.0 / (png.bit_depth == 8 ? 255.0 : 65535.0);
    Image out(png.width, png.height);
    auto px = out.pixels();
    for (std::size_t i = 0; i < png.samples.size(); ++i) px[i] = static_cast<float>(png.samples[i] * inv);
    return out;
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("cannot read " + path.string());
    return bytes;
}

void write_file(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("cannot write " + path.string());
}

Image read_png_image(const fs::path& path) { return to_image(decode_png(read_file(path))); }

Scene load_scene(const fs::path& png_path, const fs::path& sidecar_path) {
    const std::string file = sidecar_path.string();
    const json side = read_json_file(sidecar_path);
    if (!side.is_object()) throw IoError(file + ": expected a JSON object");
    static const std::set<std::string> known = {
        "sample_pitch_um", "sample_pitch_mm", "center_um",        "center_mm",        "extent_um",
        "extent_mm",       "height_png",      "height_scale_um",  "height_scale_mm",  "height_offset_um",
        "height_offset_mm"};
    for (const auto& item : side.items()) {
        if (!known.count(item.key())) throw IoError(file + ": unknown key '" + item.key() + "'");
    }
    const auto pitch = sidecar_length(side, "sample_pitch", file);
    if (!pitch) throw IoError(file + ": sample_pitch_um is required");
    if (!(*pitch > 0.0)) throw DomainError(file + ": sample_pitch must be > 0");

    const GrayPng intensity = decode_png(read_file(png_path));
    const Vec2 extent{intensity.width * *pitch, intensity.height * *pitch};
    if (const auto given = sidecar_pair(side, "extent", file)) {
        if (std::abs(given->x - extent.x) > *pitch || std::abs(given->y - extent.y) > *pitch) {
            throw DomainError(file + ": extent does not match the image size times the sample pitch");
        }
    }
    const Vec2 center = sidecar_pair(side, "center", file).value_or(Vec2{});
    Scene scene = make_blank_scene({extent, *pitch, center}, 0.0f);
    const Image pixels = to_image(intensity);
    for (int y = 0; y < pixels.height(); ++y) {
        for (int x = 0; x < pixels.width(); ++x) {
            const float v = pixels.at(x, y);
            if (v != 0.0f) scene.intensity.set(x, y, v);
        }
    }

    if (side.contains("height_png")) {
        if (!side["height_png"].is_string()) throw IoError(file + ": height_png must be a string");
        fs::path hp = side["height_png"].get<std::string>();
        if (hp.is_relative()) hp = sidecar_path.parent_path() / hp;
        const GrayPng h = decode_png(read_file(hp));
        if (h.width != intensity.width || h.height != intensity.height) {
            throw DomainError(file + ": height map size differs from the intensity image");
        }
        const double scale = sidecar_length(side, "height_scale", file).value_or(1.0);
        const double offset = sidecar_length(side, "height_offset", file).value_or(0.0);
        for (int y = 0; y < h.height; ++y) {
            for (int x = 0; x < h.width; ++x) {
                const double v = offset + scale * h.samples[static_cast<std::size_t>(y) * h.width + x];
                if (v != 0.0) scene.height_um.set(x, y, static_cast<float>(v));
            }
        }
    }
    scene.validate();
    return scene;
}

std::string format_um(double v) {
    if (!std::isfinite(v)) throw DomainError("format_um: value must be finite");
    const double r = std::round(v);
    char buf[64];
    if (std::abs(v - r) < 1e-9) {
        std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(r));
        return buf;
    }
    std::snprintf(buf, sizeof buf, "%.3f", v);
    std::string s = buf;
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
    if (s == "-0") s = "0";
    return s;
}

std::string frame_file_name(const CameraFrame& f) {
    return to_string(f.camera) + "_z" + format_um(f.stage.z_um) + "_t" + std::to_string(f.exposure_id) + ".png";
}

OutputCommitter::OutputCommitter(fs::path root) : root_(std::move(root)) {
    std::error_code ec;
    fs::create_directories(root_, ec);
    if (ec) throw IoError("cannot create output directory " + root_.string() + ": " + ec.message());
    fs::remove(root_ / "manifest.json", ec);
    if (ec) throw IoError("cannot remove stale manifest in " + root_.string() + ": " + ec.message());
}

void OutputCommitter::write_bytes(const std::string& relative, const std::vector<std::uint8_t>& bytes) {
    const fs::path rel(relative);
    if (rel.is_absolute() || relative.find("..") != std::string::npos) {
        throw IoError("output paths must stay inside the output directory: " + relative);
    }
    if (relative == "manifest.json") throw IoError("manifest.json is reserved");
    const std::string_view view(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    const Entry entry{rel.generic_string(), bytes.size(), hex64(fnv1a64(view))};
    std::lock_guard lock(mutex_);
    if (sealed_) throw IoError("output directory already has its manifest");
    write_file(root_ / rel, bytes);
    auto it = std::find_if(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.path == entry.path; });
    if (it != entries_.end()) *it = entry;
    else entries_.push_back(entry);
}

void OutputCommitter::write_text(const std::string& relative, const std::string& text) {
    write_bytes(relative, std::vector<std::uint8_t>(text.begin(), text.end()));
}

void OutputCommitter::write_png(const std::string& relative, const GrayPng& png) {
    write_bytes(relative, encode_png(png));
}

std::vector<OutputCommitter::Entry> OutputCommitter::entries() const {
    std::lock_guard lock(mutex_);
    std::vector<Entry> out = entries_;
    std::sort(out.begin(), out.end(), [](const Entry& a, const Entry& b) { return a.path < b.path; });
    return out;
}

void OutputCommitter::write_manifest(const std::string& mode, const std::string& canonical_config,
                                     const std::string& summary_json) {
    json summary;
    try {
        summary = summary_json.empty() ? json::object() : json::parse(summary_json);
    } catch (const json::parse_error& ex) {
        throw IoError(std::string("manifest summary is not valid JSON: ") + ex.what());
    }
    json files = json::array();
    for (const Entry& e : entries()) files.push_back({{"path", e.path}, {"bytes", e.bytes}, {"fnv1a64", e.fnv1a64}});
    const json manifest = {{"tool", "mcam"},
                           {"version", MCAM_VERSION},
                           {"mode", mode},
                           {"config_fnv1a64", hex64(fnv1a64(canonical_config))},
                           {"summary", summary},
                           {"files", files}};
    const std::string text = manifest.dump(2) + "\n";
    std::lock_guard lock(mutex_);
    if (sealed_) throw IoError("output directory already has its manifest");
    write_file(root_ / "manifest.json", std::vector<std::uint8_t>(text.begin(), text.end()));
    sealed_ = true;
}

void write_frameset(OutputCommitter& out, const std::string& directory, const FrameSet& set) {
    const int depth = set.config.sensor.bit_depth <= 8 ? 8 : 16;
    const std::string prefix = directory.empty() ? "" : directory + "/";
    json frames = json::array();
    std::set<std::string> names;
    for (const CameraFrame& f : set.frames) {
        const std::string name = frame_file_name(f);
        if (!names.insert(name).second) throw DomainError("write_frameset: two frames share the name " + name);
        out.write_png(prefix + name, quantize(f.pixels, depth));
        frames.push_back({{"file", name},
                          {"camera", {f.camera.row, f.camera.col}},
                          {"exposure_id", f.exposure_id},
                          {"binning", f.binning},
                          {"window", {f.window.x0, f.window.y0, f.window.width, f.window.height}},
                          {"stage_um", {f.stage.x_um, f.stage.y_um, f.stage.z_um}},
                          {"optical_axis_um", vec_json(f.optical_axis_um)},
                          {"bit_depth", depth}});
    }
    const json doc = {{"array", json::parse(array_config_json(set.config))},
                      {"stage_offset_um", {set.stage_offset.x_um, set.stage_offset.y_um, set.stage_offset.z_um}},
                      {"frames", frames}};
    out.write_text(prefix + "frames.json", doc.dump(2) + "\n");
}

FrameSet read_frameset(const fs::path& directory) {
    const fs::path index = directory / "frames.json";
    const json doc = read_json_file(index);
    try {
        FrameSet set;
        set.config = parse_array_config(doc.at("array").dump());
        const auto& so = doc.at("stage_offset_um");
        set.stage_offset = {so.at(0).get<double>(), so.at(1).get<double>(), so.at(2).get<double>()};
        for (const json& f : doc.at("frames")) {
            CameraFrame frame;
            frame.camera = {f.at("camera").at(0).get<int>(), f.at("camera").at(1).get<int>()};
            frame.exposure_id = f.at("exposure_id").get<int>();
            frame.binning = f.at("binning").get<int>();
            const auto& w = f.at("window");
            frame.window = {w.at(0).get<int>(), w.at(1).get<int>(), w.at(2).get<int>(), w.at(3).get<int>()};
            const auto& s = f.at("stage_um");
            frame.stage = {s.at(0).get<double>(), s.at(1).get<double>(), s.at(2).get<double>()};
            frame.optical_axis_um = json_vec(f.at("optical_axis_um"), index.string());
            frame.pixels = read_png_image(directory / f.at("file").get<std::string>());
            if (frame.pixels.width() * frame.binning != frame.window.width ||
                frame.pixels.height() * frame.binning != frame.window.height) {
                throw IoError(index.string() + ": frame " + f.at("file").get<std::string>() +
                              " does not match its window and binning");
            }
            set.frames.push_back(std::move(frame));
        }
        std::sort(set.frames.begin(), set.frames.end(),
                  [](const CameraFrame& a, const CameraFrame& b) { return a.camera < b.camera; });
        return set;
    } catch (const json::exception& ex) {
        throw IoError(index.string() + ": malformed frame index (" + ex.what() + ")");
    }
}

void write_pyramid(OutputCommitter& out, const std::string& directory, const Pyramid& pyr) {
    if (pyr.levels.empty()) throw DomainError("write_pyramid: empty pyramid");
    const std::string prefix = directory.empty() ? "" : directory + "/";
    json levels = json::array();
    for (std::size_t l = 0; l < pyr.levels.size(); ++l) {
        const Image& img = pyr.levels[l];
        const int L = static_cast<int>(l);
        for (int j = 0; j < pyr.tiles_y(L); ++j) {
            for (int i = 0; i < pyr.tiles_x(L); ++i) {
                const int x0 = i * pyr.tile_px, y0 = j * pyr.tile_px;
                const Image tile = img.crop(x0, y0, std::min(pyr.tile_px, img.width() - x0),
                                            std::min(pyr.tile_px, img.height() - y0));
                out.write_png(prefix + "level" + std::to_string(l) + "/x" + std::to_string(i) + "_y" +
                                  std::to_string(j) + ".png",
                              quantize(tile, 16));
            }
        }
        levels.push_back({{"level", L},
                          {"width", img.width()},
                          {"height", img.height()},
                          {"tiles_x", pyr.tiles_x(L)},
                          {"tiles_y", pyr.tiles_y(L)},
                          {"pixel_size_um", pyr.pixel_um * std::ldexp(1.0, L)}});
    }
    const json doc = {{"origin_um", vec_json(pyr.origin_um)},
                      {"pixel_size_um", pyr.pixel_um},
                      {"tile_px", pyr.tile_px},
                      {"bit_depth", 16},
                      {"tile_pattern", "level{L}/x{i}_y{j}.png"},
                      {"levels", levels}};
    out.write_text(prefix + "pyramid.json", doc.dump(2) + "\n");
}

void write_height_map(OutputCommitter& out, const std::string& stem, const HeightMap& map) {
    const Image& g = map.grid;
    if (g.empty() || map.mask.width() != g.width() || map.mask.height() != g.height()) {
        throw DomainError("write_height_map: grid and mask must be non-empty and the same size");
    }
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (map.mask.pixels()[i] > 0.0f) {
            lo = std::min(lo, static_cast<double>(g.pixels()[i]));
            hi = std::max(hi, static_cast<double>(g.pixels()[i]));
        }
    }
    const bool any = std::isfinite(lo);
    const double scale = any && hi > lo ? (hi - lo) / 65534.0 : 1.0;
    const double offset = any ? lo - scale : 0.0;
    GrayPng png{g.width(), g.height(), 16, std::vector<std::uint16_t>(g.size(), 0)};
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (map.mask.pixels()[i] > 0.0f) {
            png.samples[i] = static_cast<std::uint16_t>(1 + std::lround((g.pixels()[i] - lo) / scale));
        }
    }
    const std::string name = fs::path(stem).filename().string();
    out.write_png(stem + ".png", png);
    const json doc = {{"png", name + ".png"},
                      {"width", g.width()},
                      {"height", g.height()},
                      {"origin_um", vec_json(map.origin_um)},
                      {"pitch_um", map.pitch_um},
                      {"offset_um", offset},
                      {"scale_um", scale},
                      {"invalid_value", 0},
                      {"method", map.method == HeightMapMethod::Interpolated ? "interpolated" : "sparse"},
                      {"samples", map.samples.size()}};
    out.write_text(stem + ".json", doc.dump(2) + "\n");
}

HeightMap read_height_map(const fs::path& json_path) {
    const json doc = read_json_file(json_path);
    try {
        HeightMap map;
        const GrayPng png = decode_png(read_file(json_path.parent_path() / doc.at("png").get<std::string>()));
        if (png.bit_depth != 16) throw IoError(json_path.string() + ": height map must be 16-bit");
        const double scale = doc.at("scale_um").get<double>(), offset = doc.at("offset_um").get<double>();
        const int invalid = doc.at("invalid_value").get<int>();
        map.origin_um = json_vec(doc.at("origin_um"), json_path.string());
        map.pitch_um = doc.at("pitch_um").get<double>();
        map.method = doc.at("method").get<std::string>() == "sparse" ? HeightMapMethod::SparseTriangulated
                                                                     : HeightMapMethod::Interpolated;
        map.grid = Image(png.width, png.height);
        map.mask = Image(png.width, png.height);
        for (std::size_t i = 0; i < png.samples.size(); ++i) {
            if (png.samples[i] == invalid) continue;
            map.grid.pixels()[i] = static_cast<float>(offset + scale * png.samples[i]);
            map.mask.pixels()[i] = 1.0f;
        }
        return map;
    } catch (const json::exception& ex) {
        throw IoError(json_path.string() + ": malformed height map metadata (" + ex.what() + ")");
    }
}

}  // namespace mcam
