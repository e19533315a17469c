#include "straintc/stack.hpp"

#include <algorithm>
#include <cmath>

namespace straintc {

StrainStack::StrainStack(std::size_t n_frames, std::size_t height, std::size_t width, double sample_time_s,
                         StackKind kind)
    : n_frames_(n_frames), height_(height), width_(width), sample_time_s_(sample_time_s), kind_(kind),
      data_(n_frames * height * width, 0.0) {}

std::vector<double> StrainStack::times() const {
    std::vector<double> t(n_frames_);
    for (std::size_t n = 0; n < n_frames_; ++n) {
        t[n] = time_of(n);
    }
    return t;
}

void StrainStack::pixel_series(std::size_t pixel, std::vector<double> &out) const {
    out.resize(n_frames_);
    const std::size_t stride = pixels();
    for (std::size_t n = 0; n < n_frames_; ++n) {
        out[n] = data_[n * stride + pixel];
    }
}

void StrainStack::set_pixel_series(std::size_t pixel, std::span<const double> series) {
    const std::size_t stride = pixels();
    for (std::size_t n = 0; n < n_frames_; ++n) {
        data_[n * stride + pixel] = series[n];
    }
}

bool StrainStack::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

} // namespace straintc
