#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <utility>
#include <vector>

namespace mcam {

/// Dense single-channel float raster, row-major.
class Image {
public:
    Image() = default;
    Image(int width, int height, float fill = 0.0f);

    int width() const { return width_; }
    int height() const { return height_; }
    bool empty() const { return data_.empty(); }
    std::size_t size() const { return data_.size(); }

    float& at(int x, int y) { return data_[index(x, y)]; }
    float at(int x, int y) const { return data_[index(x, y)]; }

    std::span<float> row(int y) { return {data_.data() + index(0, y), static_cast<std::size_t>(width_)}; }
    std::span<const float> row(int y) const {
        return {data_.data() + index(0, y), static_cast<std::size_t>(width_)};
    }
    std::span<float> pixels() { return data_; }
    std::span<const float> pixels() const { return data_; }

    /// Copy of the rectangle [x0, x0+w) x [y0, y0+h); must lie inside.
    Image crop(int x0, int y0, int w, int h) const;

    /// Bilinear sample at pixel-centre coordinates; edge-clamped.
    double sample_bilinear(double x, double y) const;
    /// Keys cubic convolution (a = -0.5) at pixel-centre coordinates; edge-clamped.
    double sample_bicubic(double x, double y) const;

    double mean() const;

    friend bool operator==(const Image&, const Image&) = default;

private:
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<float> data_;
};

/// Separable Gaussian blur with edge replication. sigma <= 0.05 is identity.
Image gaussian_blur(const Image& in, double sigma);

/// Sparse raster for scene-scale ground truth: storage is allocated in
/// square tiles on first write, unwritten tiles read as `fill`, and reads
/// outside [0,width) x [0,height) return `outside`.
class TiledRaster {
public:
    static constexpr int kTile = 256;

    TiledRaster() = default;
    TiledRaster(std::int64_t width, std::int64_t height, float fill, float outside = 0.0f);
    TiledRaster(const TiledRaster& other);
    TiledRaster& operator=(const TiledRaster& other);
    TiledRaster(TiledRaster&&) noexcept = default;
    TiledRaster& operator=(TiledRaster&&) noexcept = default;

    std::int64_t width() const { return width_; }
    std::int64_t height() const { return height_; }
    float fill() const { return fill_; }

    float at(std::int64_t x, std::int64_t y) const {
        if (x < 0 || y < 0 || x >= width_ || y >= height_) return outside_;
        const auto& t = tiles_[tile_index(x / kTile, y / kTile)];
        if (!t) return fill_;
        return (*t)[static_cast<std::size_t>((y % kTile) * kTile + (x % kTile))];
    }

    void set(std::int64_t x, std::int64_t y, float v);

    /// True when no tile has been written: every in-bounds texel equals fill().
    bool uniform() const { return allocated_ == 0; }
    /// Bounds on the stored values (fill included).
    std::pair<float, float> min_max() const;
    std::size_t allocated_tiles() const { return allocated_; }

    /// Dense copy of the whole raster (only sensible for small rasters).
    Image to_image() const;

private:
    std::size_t tile_index(std::int64_t tx, std::int64_t ty) const {
        return static_cast<std::size_t>(ty * tiles_x_ + tx);
    }

    std::int64_t width_ = 0;
    std::int64_t height_ = 0;
    std::int64_t tiles_x_ = 0;
    std::int64_t tiles_y_ = 0;
    float fill_ = 0.0f;
    float outside_ = 0.0f;
    std::size_t allocated_ = 0;
    std::vector<std::unique_ptr<std::vector<float>>> tiles_;
};

}  // namespace mcam
