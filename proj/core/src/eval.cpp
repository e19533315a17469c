#include "straintc/eval.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <tuple>

#include "straintc/error.hpp"
#include "straintc/io.hpp"
#include "straintc/parallel.hpp"
#include "straintc/spline.hpp"

namespace straintc {

const char *to_string(Region r) {
    switch (r) {
    case Region::inclusion:
        return "inclusion";
    case Region::background:
        return "background";
    case Region::whole:
        return "whole";
    }
    return "?";
}

const char *to_string(Method m) {
    switch (m) {
    case Method::noisy:
        return "noisy";
    case Method::kalman:
        return "kalman";
    case Method::spline:
        return "spline";
    }
    return "?";
}

Method parse_method(std::string_view name) {
    if (name == "noisy") {
        return Method::noisy;
    }
    if (name == "kalman") {
        return Method::kalman;
    }
    if (name == "spline") {
        return Method::spline;
    }
    throw Error(Errc::invalid_argument, "unknown method '" + std::string(name) + "' (noisy, kalman, spline)");
}

PREResult compute_pre(const TCImage &tc, const MaskImage &inclusion, Region region) {
    if (!tc.truth_map) {
        throw Error(Errc::invalid_argument, "PRE needs a truth map");
    }
    const RealImage &truth = *tc.truth_map;
    if (inclusion.size() != tc.tau_map.size() || truth.size() != tc.tau_map.size()) {
        throw Error(Errc::invalid_argument, "PRE: map sizes differ");
    }
    const auto in_region = [&](std::size_t p) {
        switch (region) {
        case Region::inclusion:
            return inclusion.values[p] != 0;
        case Region::background:
            return inclusion.values[p] == 0;
        case Region::whole:
            return true;
        }
        return false;
    };

    // Errors are accumulated as differences against the per-pixel truth so
    // an estimate equal to the truth yields exactly zero.
    std::size_t total = 0;
    std::size_t used = 0;
    double truth_sum = 0.0;
    double diff_sum = 0.0;
    double rel_sum = 0.0;
    double est_sum = 0.0;
    for (std::size_t p = 0; p < tc.tau_map.size(); ++p) {
        if (!in_region(p)) {
            continue;
        }
        ++total;
        truth_sum += truth.values[p];
        if (!tc.converged_mask.values[p] || !std::isfinite(tc.tau_map.values[p])) {
            continue;
        }
        ++used;
        const double diff = tc.tau_map.values[p] - truth.values[p];
        diff_sum += diff;
        rel_sum += diff / truth.values[p];
        est_sum += tc.tau_map.values[p];
    }
    if (used == 0) {
        throw Error(Errc::empty_region, std::string("empty region: no converged pixels in ") + to_string(region));
    }
    PREResult result;
    result.region = region;
    result.coverage = static_cast<double>(used) / static_cast<double>(total);
    result.mean_estimated_tau = est_sum / static_cast<double>(used);
    result.true_tau = truth_sum / static_cast<double>(total);
    if (region == Region::whole) {
        result.pre_percent = rel_sum / static_cast<double>(used) * 100.0;
    } else {
        result.pre_percent = diff_sum / static_cast<double>(used) / result.true_tau * 100.0;
    }
    return result;
}

const RegionStats &GridResult::stats(Region r) const {
    for (const auto &s : regions) {
        if (s.region == r) {
            return s;
        }
    }
    throw Error(Errc::invalid_argument, std::string("grid result has no region ") + to_string(r));
}

std::uint64_t trial_seed(std::uint64_t seed, std::string_view sample, double snr_db, double good_fraction,
                         std::size_t trial) {
    // splitmix64 over the cell coordinates.
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    std::uint64_t h = mix(seed);
    for (char c : sample) {
        h = mix(h ^ static_cast<unsigned char>(c));
    }
    h = mix(h ^ static_cast<std::uint64_t>(std::llround(snr_db * 1000.0)));
    h = mix(h ^ static_cast<std::uint64_t>(std::llround(good_fraction * 1e6)));
    return mix(h ^ static_cast<std::uint64_t>(trial));
}

TrialData make_trial(const PhantomSpec &phantom, const NoiseSpec &noise) {
    TrialData trial;
    trial.phantom = phantom;
    trial.mask = place_bad_frames(phantom.n_frames, noise);
    trial.degraded = add_noise(synth_incremental(phantom), trial.mask, noise);
    trial.truth = tau_map(phantom);
    trial.inclusion = inclusion_mask(phantom);
    return trial;
}

StrainStack apply_method(Method method, const StrainStack &degraded, const FrameQualityMask &mask,
                         const KalmanSpec &kalman) {
    switch (method) {
    case Method::noisy:
        return degraded;
    case Method::kalman:
        return kalman_denoise(degraded, kalman);
    case Method::spline:
        return reconstruct_stack(degraded, mask);
    }
    throw Error(Errc::invalid_argument, "unknown method");
}

TCImage estimate_tc(Method method, const TrialData &trial, const GridConfig &config) {
    const StrainStack denoised = apply_method(method, trial.degraded, trial.mask, config.kalman);
    return fit_stack(cumulate(denoised), config.lm, trial.truth);
}

namespace {

struct Accumulator {
    std::vector<double> abs_pre;
    std::vector<double> coverage;
};

RegionStats summarize(Region region, const Accumulator &acc) {
    RegionStats s;
    s.region = region;
    s.successes = acc.abs_pre.size();
    if (s.successes == 0) {
        s.pre_mean = std::numeric_limits<double>::quiet_NaN();
        s.pre_std = std::numeric_limits<double>::quiet_NaN();
        s.coverage = 0.0;
        return s;
    }
    double sum = 0.0;
    double cov = 0.0;
    for (std::size_t i = 0; i < s.successes; ++i) {
        sum += acc.abs_pre[i];
        cov += acc.coverage[i];
    }
    s.pre_mean = sum / static_cast<double>(s.successes);
    s.coverage = cov / static_cast<double>(s.successes);
    if (s.successes > 1) {
        double ss = 0.0;
        for (double v : acc.abs_pre) {
            ss += (v - s.pre_mean) * (v - s.pre_mean);
        }
        s.pre_std = std::sqrt(ss / static_cast<double>(s.successes - 1));
    }
    return s;
}

constexpr Region all_regions[] = {Region::inclusion, Region::background, Region::whole};

} // namespace

std::vector<GridResult> run_grid(const GridConfig &config, const GridProgress &progress) {
    if (config.trials < 1) {
        throw Error(Errc::invalid_argument, "grid needs at least one trial per cell");
    }
    validate(config.kalman);
    validate(config.lm);
    std::vector<GridResult> results;
    for (const auto &sample : config.samples) {
        PhantomSpec phantom = phantom_preset(sample);
        if (config.resolution > 0) {
            phantom.width_px = config.resolution;
            phantom.height_px = config.resolution;
        }
        validate(phantom);
        for (double fraction : config.good_fractions) {
            for (double snr : config.snrs_db) {
                std::vector<GridResult> cells(config.methods.size());
                std::vector<std::array<Accumulator, 3>> acc(config.methods.size());
                for (std::size_t m = 0; m < config.methods.size(); ++m) {
                    cells[m].sample = sample;
                    cells[m].method = config.methods[m];
                    cells[m].snr_db = snr;
                    cells[m].good_fraction = fraction;
                    cells[m].trials = config.trials;
                }
                for (std::size_t trial = 0; trial < config.trials; ++trial) {
                    NoiseSpec noise;
                    noise.base_snr_db = snr;
                    noise.bad_frame_snr_db = config.bad_frame_snr_db;
                    noise.good_frame_fraction = fraction;
                    noise.rng_seed = trial_seed(config.seed, sample, snr, fraction, trial);
                    TrialData data;
                    try {
                        data = make_trial(phantom, noise);
                    } catch (const Error &e) {
                        for (auto &cell : cells) {
                            cell.failures.push_back("trial " + std::to_string(trial) + ": " + e.what());
                        }
                        continue;
                    }
                    for (std::size_t m = 0; m < config.methods.size(); ++m) {
                        const auto start = std::chrono::steady_clock::now();
                        try {
                            TCImage tc = estimate_tc(config.methods[m], data, config);
                            for (std::size_t r = 0; r < 3; ++r) {
                                try {
                                    const PREResult pre = compute_pre(tc, data.inclusion, all_regions[r]);
                                    acc[m][r].abs_pre.push_back(std::abs(pre.pre_percent));
                                    acc[m][r].coverage.push_back(pre.coverage);
                                } catch (const Error &e) {
                                    cells[m].failures.push_back("trial " + std::to_string(trial) + ": " + e.what());
                                }
                            }
                            if (config.keep_first_maps && !cells[m].first_map) {
                                cells[m].first_map = std::move(tc);
                            }
                        } catch (const Error &e) {
                            cells[m].failures.push_back("trial " + std::to_string(trial) + ": " + e.what());
                        }
                        cells[m].wall_time_s +=
                            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                    }
                }
                for (std::size_t m = 0; m < config.methods.size(); ++m) {
                    for (std::size_t r = 0; r < 3; ++r) {
                        cells[m].regions.push_back(summarize(all_regions[r], acc[m][r]));
                    }
                    if (progress) {
                        progress(cells[m]);
                    }
                    results.push_back(std::move(cells[m]));
                }
            }
        }
    }
    return results;
}

std::string grid_csv(const std::vector<GridResult> &results) {
    std::string out = "sample,method,snr_db,good_fraction,region,pre_mean,pre_std,coverage\n";
    for (const auto &cell : results) {
        for (const auto &s : cell.regions) {
            out += cell.sample + ',' + to_string(cell.method) + ',' + io::format_double(cell.snr_db) + ',' +
                   io::format_double(cell.good_fraction) + ',' + to_string(s.region) + ',' +
                   io::format_double(s.pre_mean) + ',' + io::format_double(s.pre_std) + ',' +
                   io::format_double(s.coverage) + '\n';
        }
    }
    return out;
}

std::string timing_csv(const std::vector<GridResult> &results) {
    std::string out = "sample,method,snr_db,good_fraction,trials,wall_time_s\n";
    for (const auto &cell : results) {
        out += cell.sample + ',' + to_string(cell.method) + ',' + io::format_double(cell.snr_db) + ',' +
               io::format_double(cell.good_fraction) + ',' + std::to_string(cell.trials) + ',' +
               io::format_double(cell.wall_time_s) + '\n';
    }
    return out;
}

std::string grid_table(const std::vector<GridResult> &results) {
    std::vector<std::string> samples;
    std::vector<double> fractions;
    std::vector<double> snrs;
    std::vector<Method> methods;
    auto add_unique = [](auto &vec, const auto &v) {
        if (std::find(vec.begin(), vec.end(), v) == vec.end()) {
            vec.push_back(v);
        }
    };
    for (const auto &cell : results) {
        add_unique(samples, cell.sample);
        add_unique(fractions, cell.good_fraction);
        add_unique(snrs, cell.snr_db);
        add_unique(methods, cell.method);
    }
    std::sort(fractions.begin(), fractions.end());
    std::sort(snrs.begin(), snrs.end());

    std::map<std::tuple<std::string, Method, double, double>, const GridResult *> index;
    for (const auto &cell : results) {
        index[{cell.sample, cell.method, cell.snr_db, cell.good_fraction}] = &cell;
    }

    std::ostringstream out;
    char buf[64];
    for (const auto &sample : samples) {
        out << "|PRE| (%) in estimated TC, sample " << sample
            << " (whole image, mean over trials) by percentage of good frames (PGF) and SNR\n";
        out << "PGF (%)   ";
        for (double f : fractions) {
            std::snprintf(buf, sizeof(buf), "%-*.0f", static_cast<int>(8 * snrs.size()), f * 100.0);
            out << buf;
        }
        out << "\nSNR (dB)  ";
        for (std::size_t i = 0; i < fractions.size(); ++i) {
            for (double s : snrs) {
                std::snprintf(buf, sizeof(buf), "%-8.0f", s);
                out << buf;
            }
        }
        out << '\n';
        for (Method m : methods) {
            std::string name = to_string(m);
            name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
            std::snprintf(buf, sizeof(buf), "%-10s", name.c_str());
            out << buf;
            for (double f : fractions) {
                for (double s : snrs) {
                    const auto it = index.find({sample, m, s, f});
                    if (it == index.end()) {
                        std::snprintf(buf, sizeof(buf), "%-8s", "-");
                    } else {
                        std::snprintf(buf, sizeof(buf), "%-8.2f", it->second->pre_mean());
                    }
                    out << buf;
                }
            }
            out << '\n';
        }
        out << '\n';
    }
    return out.str();
}

FrameQualityMask detect_bad_frames(const StrainStack &stack, const DetectorConfig &config) {
    const std::size_t n = stack.n_frames();
    if (n < 8) {
        throw Error(Errc::invalid_argument, "bad-frame detection needs at least 8 frames");
    }
    if (config.half_window < 1 || !(config.threshold > 0.0) || !(config.scale_quantile >= 0.0) ||
        config.scale_quantile > 1.0) {
        throw Error(Errc::invalid_argument, "detector needs half_window >= 1, threshold > 0, quantile in [0, 1]");
    }
    const std::size_t pixels = stack.pixels();
    std::vector<double> statistic(n, 0.0);
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        std::vector<double> relative;
        relative.reserve(pixels);
        for (std::size_t f = begin; f < end; ++f) {
            const std::size_t lo = f > config.half_window ? f - config.half_window : 0;
            const std::size_t hi = std::min(n - 1, f + config.half_window);
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t k = lo; k <= hi; ++k) {
                if (k == f) {
                    continue;
                }
                relative.clear();
                for (std::size_t p = 0; p < pixels; ++p) {
                    const double ref = stack.at(k, p);
                    if (ref != 0.0) {
                        relative.push_back((stack.at(f, p) - ref) / std::abs(ref));
                    }
                }
                if (relative.empty()) {
                    best = std::min(best, 0.0);
                    continue;
                }
                // On a clean creep curve frame k differs from frame f by the
                // same factor in every pixel of a region; removing the spatial
                // median leaves the two frames' noise.
                const auto mid = relative.begin() + static_cast<std::ptrdiff_t>(relative.size() / 2);
                std::nth_element(relative.begin(), mid, relative.end());
                const double common = *mid;
                for (double &r : relative) {
                    r = std::abs(r - common);
                }
                std::nth_element(relative.begin(), mid, relative.end());
                best = std::min(best, *mid);
            }
            statistic[f] = best;
        }
    });
    std::vector<double> sorted = statistic;
    const auto rank = static_cast<std::size_t>(config.scale_quantile * static_cast<double>(n - 1));
    const auto smid = sorted.begin() + static_cast<std::ptrdiff_t>(rank);
    std::nth_element(sorted.begin(), smid, sorted.end());
    const double scale = *smid;

    FrameQualityMask mask = FrameQualityMask::all_good(n, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t f = 0; f < n; ++f) {
        if (statistic[f] > 0.0 && statistic[f] > config.threshold * scale) {
            mask.labels[f] = FrameLabel::bad;
        }
    }
    return mask;
}

} // namespace straintc
