#pragma once

#include <cstdint>
#include <vector>

#include "straintc/stack.hpp"

namespace straintc {

struct NoiseSpec {
    double base_snr_db = 30.0;
    double bad_frame_snr_db = 0.0;
    double good_frame_fraction = 0.75;
    std::uint64_t rng_seed = 0;
};

enum class FrameLabel : unsigned char { good = 0, bad = 1 };

struct FrameQualityMask {
    std::vector<FrameLabel> labels;
    std::vector<double> applied_snr_db;

    [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
    [[nodiscard]] std::size_t good_count() const;
    [[nodiscard]] bool is_good(std::size_t n) const { return labels[n] == FrameLabel::good; }

    static FrameQualityMask all_good(std::size_t n_frames, double snr_db);

    friend bool operator==(const FrameQualityMask &, const FrameQualityMask &) = default;
};

void validate(const NoiseSpec &spec);

/// Labels N - round(fraction * N) frames bad, chosen uniformly without
/// replacement from a generator seeded with spec.rng_seed. Throws
/// Error(insufficient_good_frames) when fewer than 4 frames would stay good.
FrameQualityMask place_bad_frames(std::size_t n_frames, const NoiseSpec &spec);

/// Standard deviation giving `snr_db` against a frame of the given RMS:
/// rms * 10^(-snr / 20).
[[nodiscard]] double noise_sigma(double frame_rms, double snr_db);
[[nodiscard]] double rms(std::span<const double> values);

/// Gaussian noise field added to frame n. The stream depends only on
/// (seed, n), so frames can be degraded in any order.
std::vector<double> frame_noise(std::uint64_t seed, std::size_t frame, std::size_t count, double sigma);

/// Adds zero-mean white Gaussian noise frame by frame, at the base SNR on
/// good frames and at the bad-frame SNR on bad ones. The SNR is measured
/// against each clean frame's own RMS.
StrainStack add_noise(const StrainStack &stack, const FrameQualityMask &mask, const NoiseSpec &spec);

} // namespace straintc
