#include "straintc/kalman.hpp"

#include <algorithm>

#include "straintc/error.hpp"
#include "straintc/parallel.hpp"

namespace straintc {

namespace {

constexpr double default_process_ratio = 1e-3;

} // namespace

void validate(const KalmanSpec &spec) {
    if (spec.window_len < 1) {
        throw Error(Errc::invalid_argument, "Kalman window length must be >= 1");
    }
    if (spec.process_noise_var && !(*spec.process_noise_var > 0.0)) {
        throw Error(Errc::invalid_argument, "Kalman process noise variance must be > 0");
    }
    if (spec.measurement_noise_var && !(*spec.measurement_noise_var > 0.0)) {
        throw Error(Errc::invalid_argument, "Kalman measurement noise variance must be > 0");
    }
}

double estimate_measurement_variance(std::span<const double> series) {
    if (series.size() < 3) {
        return 0.0;
    }
    const std::size_t n = series.size() - 1;
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean += series[i + 1] - series[i];
    }
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = series[i + 1] - series[i] - mean;
        var += d * d;
    }
    var /= static_cast<double>(n - 1);
    return 0.5 * var;
}

std::vector<double> kalman_smooth_series(std::span<const double> series, const KalmanSpec &spec) {
    const std::size_t n = series.size();
    std::vector<double> out(series.begin(), series.end());
    if (n == 0) {
        return out;
    }
    const double r = spec.measurement_noise_var.value_or(estimate_measurement_variance(series));
    if (!(r > 0.0)) {
        // No measurable noise: the limiting filter follows the input.
        return out;
    }
    const double q = spec.process_noise_var.value_or(default_process_ratio * r);

    // Forward pass of the random-walk filter; the first sample seeds the
    // state with the measurement variance.
    std::vector<double> x(n);
    std::vector<double> p(n);
    x[0] = series[0];
    p[0] = r;
    for (std::size_t k = 1; k < n; ++k) {
        const double p_pred = p[k - 1] + q;
        const double gain = p_pred / (p_pred + r);
        x[k] = x[k - 1] + gain * (series[k] - x[k - 1]);
        p[k] = (1.0 - gain) * p_pred;
    }

    // Fixed-lag smoothing: each estimate is the RTS backward recursion
    // started lag samples ahead.
    const std::size_t lag = spec.window_len - 1;
    std::vector<double> smoother_gain(n);
    for (std::size_t k = 0; k < n; ++k) {
        smoother_gain[k] = p[k] / (p[k] + q);
    }
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t j = std::min(n - 1, k + lag);
        double xs = x[j];
        for (std::size_t i = j; i-- > k;) {
            xs = x[i] + smoother_gain[i] * (xs - x[i]);
        }
        out[k] = xs;
    }
    return out;
}

StrainStack kalman_denoise(const StrainStack &stack, const KalmanSpec &spec) {
    validate(spec);
    if (stack.n_frames() == 0) {
        throw Error(Errc::invalid_argument, "Kalman denoising needs a non-empty stack");
    }
    StrainStack out = stack;
    parallel_for(stack.pixels(), [&](std::size_t begin, std::size_t end) {
        std::vector<double> series;
        for (std::size_t px = begin; px < end; ++px) {
            stack.pixel_series(px, series);
            out.set_pixel_series(px, kalman_smooth_series(series, spec));
        }
    });
    return out;
}

} // namespace straintc
