#include "fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cstring>
#include <mutex>

#include "mcam/core.hpp"

namespace mcam::detail {

namespace {

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace

int good_fft_size(int n) {
    for (int m = std::max(n, 1);; ++m) {
        int r = m;
        for (int p : {2, 3, 5, 7}) {
            while (r % p == 0) r /= p;
        }
        if (r == 1) return m;
    }
}

RealFft2d::RealFft2d(int width, int height) : width_(width), height_(height) {
    if (width < 1 || height < 1) throw DomainError("RealFft2d: empty transform");
    const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    real_ = fftw_alloc_real(n);
    complex_ = fftw_alloc_complex(spectrum_size());
    if (!real_ || !complex_) throw Error("RealFft2d: allocation failed");
    auto* c = static_cast<fftw_complex*>(complex_);
    std::lock_guard lock(planner_mutex());
    forward_plan_ = fftw_plan_dft_r2c_2d(height, width, real_, c, FFTW_ESTIMATE);
    inverse_plan_ = fftw_plan_dft_c2r_2d(height, width, c, real_, FFTW_ESTIMATE);
}

RealFft2d::~RealFft2d() {
    std::lock_guard lock(planner_mutex());
    if (forward_plan_) fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
    if (inverse_plan_) fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
    fftw_free(real_);
    fftw_free(complex_);
}

std::size_t RealFft2d::spectrum_size() const {
    return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_ / 2 + 1);
}

std::vector<std::complex<double>> RealFft2d::forward(const std::vector<double>& in) {
    const auto n = static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
    if (in.size() != n) throw DomainError("RealFft2d::forward: size mismatch");
    std::copy(in.begin(), in.end(), real_);
    fftw_execute(static_cast<fftw_plan>(forward_plan_));
    std::vector<std::complex<double>> out(spectrum_size());
    std::memcpy(out.data(), complex_, out.size() * sizeof(fftw_complex));
    return out;
}

std::vector<double> RealFft2d::inverse(const std::vector<std::complex<double>>& spectrum) {
    if (spectrum.size() != spectrum_size()) throw DomainError("RealFft2d::inverse: size mismatch");
    std::memcpy(complex_, spectrum.data(), spectrum.size() * sizeof(fftw_complex));
    fftw_execute(static_cast<fftw_plan>(inverse_plan_));
    const auto n = static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
    std::vector<double> out(real_, real_ + n);
    const double scale = 1.0 / static_cast<double>(n);
    for (double& v : out) v *= scale;
    return out;
}

std::vector<double> cross_correlate(RealFft2d& fft, const std::vector<std::complex<double>>& f_hat,
                                    const std::vector<std::complex<double>>& g_hat) {
    std::vector<std::complex<double>> prod(f_hat.size());
    for (std::size_t i = 0; i < prod.size(); ++i) prod[i] = f_hat[i] * std::conj(g_hat[i]);
    return fft.inverse(prod);
}

}  // namespace mcam::detail
