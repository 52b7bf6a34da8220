#pragma once

// File formats: grayscale PNG (8/16-bit), scene import, FrameSet, pyramid
// and height-map export, and the output committer that writes a manifest
// after every other file.

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

#include "mcam/depth3d.hpp"
#include "mcam/image.hpp"
#include "mcam/registration.hpp"
#include "mcam/render.hpp"
#include "mcam/scene.hpp"

namespace mcam {

/// Raw grayscale samples as stored in a PNG.
struct GrayPng {
    int width = 0;
    int height = 0;
    int bit_depth = 8;  // 8 or 16
    std::vector<std::uint16_t> samples;  // row-major
};

/// Encodes samples (each < 2^bit_depth) without timestamps, so equal
/// inputs give equal bytes.
std::vector<std::uint8_t> encode_png(const GrayPng& png);
/// Decodes any PNG to grayscale; colour is reduced with the Rec. 709
/// weights on the stored values (no gamma), alpha is dropped, depths below 8 are expanded to 8.
GrayPng decode_png(const std::vector<std::uint8_t>& bytes);

/// Intensities in [0, 1] to full-scale samples, clamped and rounded.
GrayPng quantize(const Image& image, int bit_depth);
Image to_image(const GrayPng& png);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

Image read_png_image(const std::filesystem::path& path);

/// Intensity PNG plus a JSON sidecar:
///   {"sample_pitch_um": .., "center_um": [x, y], "extent_um": [w, h],
///    "height_png": "file.png", "height_scale_um": .., "height_offset_um": ..}
/// Only sample_pitch (_um or _mm) is required. A given extent must match the
/// raster size times the pitch to within one texel. Height samples map to
/// offset + raw * scale. Relative paths resolve against the sidecar.
Scene load_scene(const std::filesystem::path& png, const std::filesystem::path& sidecar);

/// File name of a frame: r{row}c{col}_z{µm}_t{exposure_id}.png.
std::string frame_file_name(const CameraFrame& frame);

/// Canonical decimal for file names and tables: integers print without a
/// fraction, others with up to three decimals.
std::string format_um(double v);

/// Writes every file through one mutex and records it; write_manifest adds
/// manifest.json last. A stale manifest is removed on construction, so a
/// directory with a manifest is always complete.
class OutputCommitter {
public:
    explicit OutputCommitter(std::filesystem::path root);

    const std::filesystem::path& root() const { return root_; }

    void write_bytes(const std::string& relative, const std::vector<std::uint8_t>& bytes);
    void write_text(const std::string& relative, const std::string& text);
    void write_png(const std::string& relative, const GrayPng& png);

    struct Entry {
        std::string path;
        std::uint64_t bytes = 0;
        std::string fnv1a64;
    };
    std::vector<Entry> entries() const;

    /// manifest.json: tool, version, mode, config hash, summary (a JSON
    /// object as text) and the sorted file inventory.
    void write_manifest(const std::string& mode, const std::string& canonical_config,
                        const std::string& summary_json);

private:
    std::filesystem::path root_;
    mutable std::mutex mutex_;
    std::vector<Entry> entries_;
    bool sealed_ = false;
};

/// Frames as PNG (8-bit for sensors of at most 8 bits, else 16-bit) plus
/// frames.json with the array configuration and per-frame geometry.
void write_frameset(OutputCommitter& out, const std::string& directory, const FrameSet& frames);
FrameSet read_frameset(const std::filesystem::path& directory);

/// 16-bit tiles level{L}/x{i}_y{j}.png (edge tiles are cropped) plus
/// pyramid.json with origin, pixel size per level and tile counts.
void write_pyramid(OutputCommitter& out, const std::string& directory, const Pyramid& pyramid);

/// 16-bit PNG where raw 0 marks cells outside the mask and height =
/// offset_um + raw * scale_um elsewhere, plus a JSON sidecar with the
/// mapping and grid placement.
void write_height_map(OutputCommitter& out, const std::string& stem, const HeightMap& map);
HeightMap read_height_map(const std::filesystem::path& json_path);

}  // namespace mcam
