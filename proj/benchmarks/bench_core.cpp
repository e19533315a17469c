#include <benchmark/benchmark.h>

#include <random>

#include "straintc/degrade.hpp"
#include "straintc/fit.hpp"
#include "straintc/kalman.hpp"
#include "straintc/phantom.hpp"
#include "straintc/spline.hpp"

using namespace straintc;

namespace {

std::vector<double> noisy_curve(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1e-4);
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = 0.02 - 0.01 * std::exp(-0.5 * static_cast<double>(i + 1) / 4.66) + g(rng);
    }
    return v;
}

std::vector<double> times(std::size_t n) {
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = 0.5 * static_cast<double>(i + 1);
    }
    return t;
}

PhantomSpec small_phantom(std::size_t px) {
    PhantomSpec spec = phantom_preset("A");
    spec.width_px = px;
    spec.height_px = px;
    return spec;
}

} // namespace

static void BM_SplineBuild(benchmark::State &state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto t = times(n);
    const auto v = noisy_curve(n, 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(build_natural_spline(t, v));
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SplineBuild)->RangeMultiplier(4)->Range(16, 4096)->Complexity(benchmark::oN);

static void BM_FitExponential(benchmark::State &state) {
    const auto t = times(300);
    const auto v = noisy_curve(300, 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(fit_exponential(t, v, LMConfig{}));
    }
}
BENCHMARK(BM_FitExponential);

static void BM_KalmanSeries(benchmark::State &state) {
    const auto v = noisy_curve(300, 3);
    KalmanSpec spec;
    spec.window_len = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(kalman_smooth_series(v, spec));
    }
}
BENCHMARK(BM_KalmanSeries)->Arg(1)->Arg(13)->Arg(50);

static void BM_ReconstructStack(benchmark::State &state) {
    const StrainStack clean = synth_incremental(small_phantom(static_cast<std::size_t>(state.range(0))));
    NoiseSpec noise;
    noise.rng_seed = 4;
    const FrameQualityMask mask = place_bad_frames(clean.n_frames(), noise);
    const StrainStack degraded = add_noise(clean, mask, noise);
    for (auto _ : state) {
        benchmark::DoNotOptimize(reconstruct_stack(degraded, mask));
    }
}
BENCHMARK(BM_ReconstructStack)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

static void BM_FitStack(benchmark::State &state) {
    const StrainStack stack = synth_cumulative(small_phantom(static_cast<std::size_t>(state.range(0))));
    for (auto _ : state) {
        benchmark::DoNotOptimize(fit_stack(stack, LMConfig{}));
    }
}
BENCHMARK(BM_FitStack)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
