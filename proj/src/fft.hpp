#pragma once

// Thin RAII wrapper over FFTW's 2-D real transforms. Plans use
// FFTW_ESTIMATE so results do not depend on timing measurements.

#include <complex>
#include <vector>

namespace mcam::detail {

/// Smallest n' >= n whose only prime factors are 2, 3, 5 and 7.
int good_fft_size(int n);

class RealFft2d {
public:
    RealFft2d(int width, int height);
    ~RealFft2d();
    RealFft2d(const RealFft2d&) = delete;
    RealFft2d& operator=(const RealFft2d&) = delete;

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t spectrum_size() const;

    /// `in` holds width*height row-major samples.
    std::vector<std::complex<double>> forward(const std::vector<double>& in);
    /// Unnormalized inverse divided by width*height.
    std::vector<double> inverse(const std::vector<std::complex<double>>& spectrum);

private:
    int width_;
    int height_;
    double* real_ = nullptr;
    void* complex_ = nullptr;
    void* forward_plan_ = nullptr;
    void* inverse_plan_ = nullptr;
};

/// R(d) = sum_x f(x) g(x - d) for all d, wrapped modulo the transform size.
std::vector<double> cross_correlate(RealFft2d& fft, const std::vector<std::complex<double>>& f_hat,
                                    const std::vector<std::complex<double>>& g_hat);

}  // namespace mcam::detail
