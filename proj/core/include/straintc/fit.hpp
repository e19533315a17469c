#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "straintc/stack.hpp"

namespace straintc {

/// Parameters of s(t) = eta + gamma * exp(-t / tau).
struct ExpParams {
    double eta = 0.0;
    double gamma = 0.0;
    double tau = 0.0;
};

struct ExpFit {
    double eta = 0.0;
    double gamma = 0.0;
    double tau = 0.0;
    double residual_norm = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};

struct LMConfig {
    std::size_t max_iterations = 200;
    double initial_damping = 1e-3;
    double damping_up = 10.0;
    double damping_down = 10.0;
    double rel_tolerance = 1e-10;
    /// Unset bounds resolve against the sampling: Ts / 10 and
    /// 100 x total duration.
    std::optional<double> tau_floor;
    std::optional<double> tau_ceiling;
};

void validate(const LMConfig &config);

[[nodiscard]] double exp_model(const ExpParams &p, double t);

/// Row of d model / d (eta, gamma, tau) at time t.
[[nodiscard]] std::array<double, 3> exp_jacobian_row(const ExpParams &p, double t);

/// Heuristic start point: eta from the tail mean, gamma from the first
/// sample, tau from the first 1/e crossing.
ExpParams initial_guess(std::span<const double> times, std::span<const double> values);

/// Levenberg-Marquardt least squares fit of the exponential with Marquardt
/// diagonal scaling and tau clamped to the configured bounds. A solution
/// sitting on a tau bound is reported as not converged.
ExpFit fit_exponential(std::span<const double> times, std::span<const double> values, const LMConfig &config);
/// Starts from `start`; when `accepted_costs` is given, the cost after every
/// accepted step (and the initial cost) is appended to it.
ExpFit fit_exponential(std::span<const double> times, std::span<const double> values, const LMConfig &config,
                       const ExpParams &start, std::vector<double> *accepted_costs = nullptr);

struct TCImage {
    RealImage tau_map;
    MaskImage converged_mask;
    std::optional<RealImage> truth_map;

    [[nodiscard]] double coverage() const;
};

/// Fits every pixel of a cumulative stack. Non-converged pixels carry NaN in
/// tau_map.
TCImage fit_stack(const StrainStack &stack, const LMConfig &config,
                  std::optional<RealImage> truth = std::nullopt);

/// Running sum over the frame axis.
StrainStack cumulate(const StrainStack &stack);

} // namespace straintc
