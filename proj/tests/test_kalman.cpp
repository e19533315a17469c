#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "straintc/error.hpp"
#include "straintc/kalman.hpp"
#include "support/oracles.hpp"

using namespace straintc;

namespace {

std::vector<double> white_noise(std::uint64_t seed, std::size_t n, double sigma) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, sigma);
    std::vector<double> v(n);
    for (double &x : v) {
        x = g(rng);
    }
    return v;
}

KalmanSpec fixed(std::size_t window, double q, double r) {
    KalmanSpec spec;
    spec.window_len = window;
    spec.process_noise_var = q;
    spec.measurement_noise_var = r;
    return spec;
}

} // namespace

TEST(Kalman, ConstantInputIsAFixedPoint) {
    const std::vector<double> c(50, 0.37);
    for (std::size_t w : {1u, 5u, 13u, 60u}) {
        const auto out = kalman_smooth_series(c, fixed(w, 1e-4, 1e-2));
        for (double v : out) {
            EXPECT_NEAR(v, 0.37, 1e-12);
        }
        // Zero difference variance: auto settings leave the input alone.
        KalmanSpec auto_spec;
        auto_spec.window_len = w;
        EXPECT_EQ(kalman_smooth_series(c, auto_spec), c);
    }
}

TEST(Kalman, LargeProcessNoiseFollowsTheInput) {
    const auto z = white_noise(1, 80, 1.0);
    const auto out = kalman_smooth_series(z, fixed(13, 1e8, 1e-2));
    for (std::size_t i = 0; i < z.size(); ++i) {
        EXPECT_NEAR(out[i], z[i], 1e-6);
    }
}

TEST(Kalman, ReducesWhiteNoiseVariance) {
    double in_var = 0.0;
    double out_var = 0.0;
    std::size_t count = 0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const auto z = white_noise(100 + seed, 300, 1.0);
        KalmanSpec spec;
        const auto out = kalman_smooth_series(z, spec);
        for (std::size_t i = 0; i < z.size(); ++i) {
            in_var += z[i] * z[i];
            out_var += out[i] * out[i];
            ++count;
        }
    }
    EXPECT_LT(out_var / static_cast<double>(count), 0.5 * in_var / static_cast<double>(count));
}

TEST(Kalman, LinearInTheInputForFixedNoise) {
    const auto a = white_noise(2, 64, 1.0);
    const auto b = white_noise(3, 64, 1.0);
    const KalmanSpec spec = fixed(9, 0.05, 0.5);
    std::vector<double> combo(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        combo[i] = 2.5 * a[i] - 0.75 * b[i];
    }
    const auto sa = kalman_smooth_series(a, spec);
    const auto sb = kalman_smooth_series(b, spec);
    const auto sc = kalman_smooth_series(combo, spec);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_NEAR(sc[i], 2.5 * sa[i] - 0.75 * sb[i], 1e-9);
    }
}

TEST(Kalman, WindowOneIsTheCausalFilter) {
    const auto z = white_noise(4, 50, 1.0);
    const double q = 0.02;
    const double r = 0.3;
    const auto out = kalman_smooth_series(z, fixed(1, q, r));
    // Steady scalar recursion written out by hand.
    double x = z[0];
    double p = r;
    EXPECT_DOUBLE_EQ(out[0], x);
    for (std::size_t k = 1; k < z.size(); ++k) {
        const double prior = p + q;
        const double gain = prior / (prior + r);
        x += gain * (z[k] - x);
        p = prior * r / (prior + r);
        EXPECT_NEAR(out[k], x, 1e-12);
    }
}

TEST(Kalman, FullWindowEqualsTheMapSmoother) {
    for (std::uint64_t seed : {5u, 6u, 7u}) {
        const auto z = white_noise(seed, 40, 1.0);
        const double q = 0.01 * static_cast<double>(seed);
        const double r = 0.4;
        const auto out = kalman_smooth_series(z, fixed(40, q, r));
        const auto ref = oracle::map_random_walk(z, q, r);
        for (std::size_t i = 0; i < z.size(); ++i) {
            EXPECT_NEAR(out[i], ref[i], 1e-9) << seed;
        }
        // Any window longer than the series gives the same result.
        EXPECT_EQ(kalman_smooth_series(z, fixed(400, q, r)), out);
    }
}

TEST(Kalman, LongerWindowsConvergeToTheFullSmoother) {
    const auto z = white_noise(8, 120, 1.0);
    const double q = 0.05;
    const double r = 1.0;
    const auto ref = oracle::map_random_walk(z, q, r);
    double previous = INFINITY;
    for (std::size_t w : {1u, 4u, 13u, 40u}) {
        const auto out = kalman_smooth_series(z, fixed(w, q, r));
        double err = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            err += (out[i] - ref[i]) * (out[i] - ref[i]);
        }
        EXPECT_LT(err, previous);
        previous = err;
    }
    EXPECT_LT(previous, 1e-6);
}

TEST(Kalman, MeasurementVarianceEstimate) {
    const auto z = white_noise(9, 20000, 0.3);
    // Differences of white noise carry twice its variance.
    EXPECT_NEAR(estimate_measurement_variance(z), 0.09, 0.09 * 0.03);
    const std::vector<double> ramp{0.0, 1.0, 2.0, 3.0, 4.0};
    EXPECT_EQ(estimate_measurement_variance(ramp), 0.0);
}

TEST(Kalman, StackOutputIsFiniteAndShapePreserving) {
    StrainStack s(30, 4, 5, 0.5, StackKind::incremental);
    const auto z = white_noise(10, s.data().size(), 1e-3);
    std::copy(z.begin(), z.end(), s.data().begin());
    const StrainStack out = kalman_denoise(s, KalmanSpec{});
    EXPECT_EQ(out.n_frames(), 30u);
    EXPECT_EQ(out.pixels(), 20u);
    EXPECT_EQ(out.kind(), StackKind::incremental);
    EXPECT_TRUE(out.all_finite());
    std::vector<double> series;
    s.pixel_series(7, series);
    std::vector<double> got;
    out.pixel_series(7, got);
    EXPECT_EQ(got, kalman_smooth_series(series, KalmanSpec{}));
}

TEST(Kalman, ValidationRejectsBadSettings) {
    KalmanSpec spec;
    spec.window_len = 0;
    EXPECT_THROW(validate(spec), Error);
    spec = KalmanSpec{};
    spec.process_noise_var = -1.0;
    EXPECT_THROW(validate(spec), Error);
    spec = KalmanSpec{};
    spec.measurement_noise_var = 0.0;
    EXPECT_THROW(validate(spec), Error);
}
