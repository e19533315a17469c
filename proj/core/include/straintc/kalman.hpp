#pragma once

#include <optional>
#include <span>
#include <vector>

#include "straintc/stack.hpp"

namespace straintc {

struct KalmanSpec {
    /// Number of samples (current plus future) seen by each smoothed
    /// estimate; 1 gives the causal filter.
    std::size_t window_len = 13;
    /// Empty means estimate per pixel.
    std::optional<double> process_noise_var;
    std::optional<double> measurement_noise_var;
};

void validate(const KalmanSpec &spec);

/// Half the variance of first differences; the white-noise estimate of the
/// measurement variance.
[[nodiscard]] double estimate_measurement_variance(std::span<const double> series);

/// Scalar random-walk fixed-lag smoother over one time series.
std::vector<double> kalman_smooth_series(std::span<const double> series, const KalmanSpec &spec);

StrainStack kalman_denoise(const StrainStack &stack, const KalmanSpec &spec);

} // namespace straintc
