#include "mcam/image.hpp"

#include <algorithm>
#include <cmath>

#include "mcam/core.hpp"

namespace mcam {

Image::Image(int width, int height, float fill)
    : width_(width), height_(height),
      data_(static_cast<std::size_t>(std::max(width, 0)) * static_cast<std::size_t>(std::max(height, 0)), fill) {
    if (width < 0 || height < 0) throw DomainError("Image: negative dimensions");
}

Image Image::crop(int x0, int y0, int w, int h) const {
    if (x0 < 0 || y0 < 0 || w < 0 || h < 0 || x0 + w > width_ || y0 + h > height_) {
        throw DomainError("Image::crop: rectangle outside image");
    }
    Image out(w, h);
    for (int y = 0; y < h; ++y) {
        auto src = row(y0 + y).subspan(static_cast<std::size_t>(x0), static_cast<std::size_t>(w));
        std::copy(src.begin(), src.end(), out.row(y).begin());
    }
    return out;
}

double Image::sample_bilinear(double x, double y) const {
    x = std::clamp(x, 0.0, static_cast<double>(width_ - 1));
    y = std::clamp(y, 0.0, static_cast<double>(height_ - 1));
    const int x0 = std::min(static_cast<int>(x), width_ - 1);
    const int y0 = std::min(static_cast<int>(y), height_ - 1);
    const int x1 = std::min(x0 + 1, width_ - 1);
    const int y1 = std::min(y0 + 1, height_ - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    const double top = (1.0 - fx) * at(x0, y0) + fx * at(x1, y0);
    const double bottom = (1.0 - fx) * at(x0, y1) + fx * at(x1, y1);
    return (1.0 - fy) * top + fy * bottom;
}

namespace {

void keys_weights(double t, double w[4]) {
    constexpr double a = -0.5;
    const auto near = [](double d) { return ((a + 2.0) * d - (a + 3.0)) * d * d + 1.0; };
    const auto far = [](double d) { return ((a * d - 5.0 * a) * d + 8.0 * a) * d - 4.0 * a; };
    w[0] = far(1.0 + t);
    w[1] = near(t);
    w[2] = near(1.0 - t);
    w[3] = far(2.0 - t);
}

}  // namespace

double Image::sample_bicubic(double x, double y) const {
    x = std::clamp(x, 0.0, static_cast<double>(width_ - 1));
    y = std::clamp(y, 0.0, static_cast<double>(height_ - 1));
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    double wx[4], wy[4];
    keys_weights(x - x0, wx);
    keys_weights(y - y0, wy);
    double acc = 0.0;
    for (int j = 0; j < 4; ++j) {
        const int yy = std::clamp(y0 - 1 + j, 0, height_ - 1);
        double row_acc = 0.0;
        for (int i = 0; i < 4; ++i) row_acc += wx[i] * at(std::clamp(x0 - 1 + i, 0, width_ - 1), yy);
        acc += wy[j] * row_acc;
    }
    return acc;
}

double Image::mean() const {
    if (data_.empty()) return 0.0;
    double s = 0.0;
    for (float v : data_) s += v;
    return s / static_cast<double>(data_.size());
}

namespace {

std::vector<double> gaussian_kernel(double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
        k[static_cast<std::size_t>(i + radius)] = v;
        sum += v;
    }
    for (double& v : k) v /= sum;
    return k;
}

}  // namespace

Image gaussian_blur(const Image& in, double sigma) {
    if (sigma <= 0.05 || in.empty()) return in;
    const std::vector<double> k = gaussian_kernel(sigma);
    const int r = static_cast<int>(k.size() / 2);
    const int w = in.width();
    const int h = in.height();

    Image tmp(w, h);
    for (int y = 0; y < h; ++y) {
        auto src = in.row(y);
        auto dst = tmp.row(y);
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) {
                const int xx = std::clamp(x + i, 0, w - 1);
                acc += k[static_cast<std::size_t>(i + r)] * src[static_cast<std::size_t>(xx)];
            }
            dst[static_cast<std::size_t>(x)] = static_cast<float>(acc);
        }
    }
    Image out(w, h);
    for (int y = 0; y < h; ++y) {
        auto dst = out.row(y);
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) {
                const int yy = std::clamp(y + i, 0, h - 1);
                acc += k[static_cast<std::size_t>(i + r)] * tmp.at(x, yy);
            }
            dst[static_cast<std::size_t>(x)] = static_cast<float>(acc);
        }
    }
    return out;
}

TiledRaster::TiledRaster(std::int64_t width, std::int64_t height, float fill, float outside)
    : width_(width), height_(height),
      tiles_x_((width + kTile - 1) / kTile), tiles_y_((height + kTile - 1) / kTile),
      fill_(fill), outside_(outside) {
    if (width < 1 || height < 1) throw DomainError("TiledRaster: dimensions must be >= 1");
    tiles_.resize(static_cast<std::size_t>(tiles_x_ * tiles_y_));
}

TiledRaster::TiledRaster(const TiledRaster& other)
    : width_(other.width_), height_(other.height_), tiles_x_(other.tiles_x_),
      tiles_y_(other.tiles_y_), fill_(other.fill_), outside_(other.outside_),
      allocated_(other.allocated_) {
    tiles_.resize(other.tiles_.size());
    for (std::size_t i = 0; i < tiles_.size(); ++i) {
        if (other.tiles_[i]) tiles_[i] = std::make_unique<std::vector<float>>(*other.tiles_[i]);
    }
}

TiledRaster& TiledRaster::operator=(const TiledRaster& other) {
    if (this != &other) {
        TiledRaster copy(other);
        *this = std::move(copy);
    }
    return *this;
}

void TiledRaster::set(std::int64_t x, std::int64_t y, float v) {
    if (x < 0 || y < 0 || x >= width_ || y >= height_) return;
    auto& t = tiles_[tile_index(x / kTile, y / kTile)];
    if (!t) {
        if (v == fill_) return;
        t = std::make_unique<std::vector<float>>(static_cast<std::size_t>(kTile * kTile), fill_);
        ++allocated_;
    }
    (*t)[static_cast<std::size_t>((y % kTile) * kTile + (x % kTile))] = v;
}

std::pair<float, float> TiledRaster::min_max() const {
    // Conservative: includes fill even when every tile is written, since
    // edge tiles are padded with it.
    float lo = fill_;
    float hi = fill_;
    for (const auto& t : tiles_) {
        if (!t) continue;
        for (float v : *t) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    return {lo, hi};
}

Image TiledRaster::to_image() const {
    Image out(static_cast<int>(width_), static_cast<int>(height_));
    for (std::int64_t y = 0; y < height_; ++y) {
        for (std::int64_t x = 0; x < width_; ++x) {
            out.at(static_cast<int>(x), static_cast<int>(y)) = at(x, y);
        }
    }
    return out;
}

}  // namespace mcam
