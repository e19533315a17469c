#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "straintc/degrade.hpp"
#include "straintc/fit.hpp"
#include "straintc/kalman.hpp"
#include "straintc/phantom.hpp"

namespace straintc {

enum class Region { inclusion, background, whole };
enum class Method { noisy, kalman, spline };

const char *to_string(Region r);
const char *to_string(Method m);
Method parse_method(std::string_view name);

struct PREResult {
    Region region = Region::whole;
    /// Signed percent relative error of the region mean.
    double pre_percent = 0.0;
    double mean_estimated_tau = 0.0;
    double true_tau = 0.0;
    double coverage = 0.0;
};

/// Percent relative error of the mean converged tau in `region` against the
/// truth map. For the whole image each pixel is normalised by its own true
/// tau, which equals the converged-pixel-weighted combination of the
/// per-region errors. Throws Error(empty_region) when no converged pixel
/// falls in the region.
PREResult compute_pre(const TCImage &tc, const MaskImage &inclusion, Region region);

struct GridConfig {
    std::vector<std::string> samples{"A", "B", "C"};
    std::vector<Method> methods{Method::noisy, Method::kalman, Method::spline};
    std::vector<double> snrs_db{30.0, 40.0, 60.0};
    std::vector<double> good_fractions{0.20, 0.50, 0.75};
    std::size_t trials = 10;
    std::uint64_t seed = 0;
    double bad_frame_snr_db = 0.0;
    /// Overrides the preset resolution when non-zero.
    std::size_t resolution = 0;
    KalmanSpec kalman;
    LMConfig lm;
    /// Keep the TC image of each cell's first successful trial.
    bool keep_first_maps = false;
};

struct RegionStats {
    Region region = Region::whole;
    /// Mean and sample std of |PRE| over successful trials.
    double pre_mean = 0.0;
    double pre_std = 0.0;
    double coverage = 0.0;
    std::size_t successes = 0;
};

struct GridResult {
    std::string sample;
    Method method = Method::noisy;
    double snr_db = 0.0;
    double good_fraction = 0.0;
    std::size_t trials = 0;
    std::vector<RegionStats> regions;
    double wall_time_s = 0.0;
    std::vector<std::string> failures;
    std::optional<TCImage> first_map;

    [[nodiscard]] const RegionStats &stats(Region r) const;
    [[nodiscard]] double pre_mean() const { return stats(Region::whole).pre_mean; }
    [[nodiscard]] double pre_std() const { return stats(Region::whole).pre_std; }
};

/// One degraded trial of a cell, shared by all methods so comparisons are
/// paired.
struct TrialData {
    PhantomSpec phantom;
    StrainStack degraded;
    FrameQualityMask mask;
    RealImage truth;
    MaskImage inclusion;
};

/// Seed for one (sample, snr, fraction, trial) cell; independent of method.
std::uint64_t trial_seed(std::uint64_t seed, std::string_view sample, double snr_db, double good_fraction,
                         std::size_t trial);

TrialData make_trial(const PhantomSpec &phantom, const NoiseSpec &noise);

/// Applies a denoising method to an incremental stack.
StrainStack apply_method(Method method, const StrainStack &degraded, const FrameQualityMask &mask,
                         const KalmanSpec &kalman);

/// Method, cumulation and fit for one trial.
TCImage estimate_tc(Method method, const TrialData &trial, const GridConfig &config);

/// Called after each finished cell; may be empty.
using GridProgress = std::function<void(const GridResult &)>;

std::vector<GridResult> run_grid(const GridConfig &config, const GridProgress &progress = {});

/// CSV with one row per (cell, region); deterministic for fixed seeds.
std::string grid_csv(const std::vector<GridResult> &results);
/// CSV of per-cell wall time.
std::string timing_csv(const std::vector<GridResult> &results);
/// Plain-text tables shaped as method rows by (good fraction, SNR) columns,
/// one table per sample, showing |PRE| of the whole image.
std::string grid_table(const std::vector<GridResult> &results);

struct DetectorConfig {
    std::size_t half_window = 5;
    double threshold = 4.0;
    /// Quantile of the per-frame statistic used as the global scale. Kept
    /// low so the scale still comes from good frames when most are bad.
    double scale_quantile = 0.1;
};

/// Flags frames that disagree with every neighbour within half_window.
/// Against each neighbour the per-pixel relative difference, less its
/// spatial median, gives a spatial median absolute deviation; a frame's
/// statistic is the smallest of these and it is flagged when that exceeds
/// threshold times the scale_quantile of the statistic over all frames.
FrameQualityMask detect_bad_frames(const StrainStack &stack, const DetectorConfig &config = {});

} // namespace straintc
