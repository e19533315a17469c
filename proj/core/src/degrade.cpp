#include "straintc/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "straintc/error.hpp"
#include "straintc/parallel.hpp"

namespace straintc {

namespace {

constexpr std::uint32_t placement_stream = 0x6d61736bU; // "mask"
constexpr std::uint32_t noise_stream = 0x6e6f6973U;     // "nois"

std::mt19937_64 make_engine(std::uint64_t seed, std::uint32_t stream, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream,
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
}

} // namespace

std::size_t FrameQualityMask::good_count() const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), FrameLabel::good));
}

FrameQualityMask FrameQualityMask::all_good(std::size_t n_frames, double snr_db) {
    FrameQualityMask mask;
    mask.labels.assign(n_frames, FrameLabel::good);
    mask.applied_snr_db.assign(n_frames, snr_db);
    return mask;
}

void validate(const NoiseSpec &spec) {
    if (!(spec.good_frame_fraction > 0.0 && spec.good_frame_fraction <= 1.0)) {
        throw Error(Errc::invalid_argument, "good frame fraction must be in (0, 1]");
    }
    if (!(spec.base_snr_db > spec.bad_frame_snr_db)) {
        throw Error(Errc::invalid_argument, "base SNR must exceed the bad-frame SNR");
    }
}

FrameQualityMask place_bad_frames(std::size_t n_frames, const NoiseSpec &spec) {
    validate(spec);
    if (n_frames < 2) {
        throw Error(Errc::invalid_argument, "need at least 2 frames to place bad frames");
    }
    const auto n_good = static_cast<std::size_t>(std::lround(spec.good_frame_fraction * static_cast<double>(n_frames)));
    if (n_good < 4) {
        throw Error(Errc::insufficient_good_frames,
                    "insufficient good frames: " + std::to_string(n_good) + " of " + std::to_string(n_frames) +
                        " (at least 4 needed)");
    }
    FrameQualityMask mask = FrameQualityMask::all_good(n_frames, spec.base_snr_db);

    // Partial Fisher-Yates: the first n_bad entries become a uniform sample
    // without replacement.
    const std::size_t n_bad = n_frames - n_good;
    std::vector<std::size_t> order(n_frames);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto engine = make_engine(spec.rng_seed, placement_stream, 0);
    for (std::size_t i = 0; i < n_bad; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n_frames - 1);
        std::swap(order[i], order[pick(engine)]);
        mask.labels[order[i]] = FrameLabel::bad;
        mask.applied_snr_db[order[i]] = spec.bad_frame_snr_db;
    }
    return mask;
}

double noise_sigma(double frame_rms, double snr_db) { return frame_rms * std::pow(10.0, -snr_db / 20.0); }

double rms(std::span<const double> values) {
    if (values.empty()) {
        return 0.0;
    }
    double sum = 0.0;
    for (double v : values) {
        sum += v * v;
    }
    return std::sqrt(sum / static_cast<double>(values.size()));
}

std::vector<double> frame_noise(std::uint64_t seed, std::size_t frame, std::size_t count, double sigma) {
    std::vector<double> noise(count);
    auto engine = make_engine(seed, noise_stream, frame);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (double &v : noise) {
        v = sigma * gauss(engine);
    }
    return noise;
}

StrainStack add_noise(const StrainStack &stack, const FrameQualityMask &mask, const NoiseSpec &spec) {
    if (mask.size() != stack.n_frames() || mask.applied_snr_db.size() != stack.n_frames()) {
        throw Error(Errc::invalid_argument, "frame mask length does not match the stack");
    }
    StrainStack out = stack;
    parallel_for(stack.n_frames(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t n = begin; n < end; ++n) {
            const auto clean = stack.frame(n);
            const double snr = mask.is_good(n) ? spec.base_snr_db : spec.bad_frame_snr_db;
            const auto noise = frame_noise(spec.rng_seed, n, clean.size(), noise_sigma(rms(clean), snr));
            auto dst = out.frame(n);
            for (std::size_t p = 0; p < dst.size(); ++p) {
                dst[p] = clean[p] + noise[p];
            }
        }
    });
    return out;
}

} // namespace straintc
