#include "straintc/fit.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>

#include "straintc/error.hpp"
#include "straintc/parallel.hpp"

namespace straintc {

namespace {

constexpr double damping_limit = 1e20;

struct Bounds {
    double lo;
    double hi;
};

Bounds resolve_bounds(std::span<const double> times, const LMConfig &config) {
    const std::size_t n = times.size();
    const double spacing = (times.back() - times.front()) / static_cast<double>(n - 1);
    const double duration = times.back() - times.front() + spacing;
    return {config.tau_floor.value_or(spacing / 10.0), config.tau_ceiling.value_or(100.0 * duration)};
}

void check_samples(std::span<const double> times, std::span<const double> values) {
    if (times.size() != values.size()) {
        throw Error(Errc::invalid_argument, "fit: time and value counts differ");
    }
    if (times.size() < 4) {
        throw Error(Errc::invalid_argument, "fit: at least 4 samples are needed");
    }
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (!(times[i] > times[i - 1])) {
            throw Error(Errc::invalid_argument, "fit: times must be strictly increasing");
        }
    }
}

double cost_of(const ExpParams &p, std::span<const double> times, std::span<const double> values) {
    double cost = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double r = values[i] - exp_model(p, times[i]);
        cost += r * r;
    }
    return cost;
}

// Solves the symmetric positive definite 3x3 system a x = b by Cholesky.
bool solve_spd3(const std::array<std::array<double, 3>, 3> &a, const std::array<double, 3> &b,
                std::array<double, 3> &x) {
    std::array<std::array<double, 3>, 3> l{};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = a[i][j];
            for (int k = 0; k < j; ++k) {
                s -= l[i][k] * l[j][k];
            }
            if (i == j) {
                if (!(s > 0.0)) {
                    return false;
                }
                l[i][i] = std::sqrt(s);
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    std::array<double, 3> y{};
    for (int i = 0; i < 3; ++i) {
        double s = b[i];
        for (int k = 0; k < i; ++k) {
            s -= l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    for (int i = 2; i >= 0; --i) {
        double s = y[i];
        for (int k = i + 1; k < 3; ++k) {
            s -= l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    return true;
}

} // namespace

void validate(const LMConfig &config) {
    if (config.max_iterations == 0 || !(config.initial_damping > 0.0) || !(config.damping_up > 1.0) ||
        !(config.damping_down > 1.0) || !(config.rel_tolerance > 0.0)) {
        throw Error(Errc::invalid_argument, "LM settings must be positive (damping factors > 1)");
    }
    if (config.tau_floor && config.tau_ceiling && !(*config.tau_floor < *config.tau_ceiling)) {
        throw Error(Errc::invalid_argument, "LM tau floor must be below the ceiling");
    }
    if ((config.tau_floor && !(*config.tau_floor > 0.0)) || (config.tau_ceiling && !(*config.tau_ceiling > 0.0))) {
        throw Error(Errc::invalid_argument, "LM tau bounds must be positive");
    }
}

double exp_model(const ExpParams &p, double t) { return p.eta + p.gamma * std::exp(-t / p.tau); }

std::array<double, 3> exp_jacobian_row(const ExpParams &p, double t) {
    const double e = std::exp(-t / p.tau);
    return {1.0, e, p.gamma * (t / (p.tau * p.tau)) * e};
}

ExpParams initial_guess(std::span<const double> times, std::span<const double> values) {
    check_samples(times, values);
    const std::size_t n = values.size();
    const std::size_t tail = std::max<std::size_t>(1, (n + 9) / 10);
    double eta = 0.0;
    for (std::size_t i = n - tail; i < n; ++i) {
        eta += values[i];
    }
    eta /= static_cast<double>(tail);

    ExpParams guess;
    guess.eta = eta;
    guess.gamma = values[0] - eta;
    const double duration = times.back() - times.front();
    guess.tau = duration / 3.0;
    const double level = std::abs(guess.gamma) / std::exp(1.0);
    if (guess.gamma != 0.0) {
        for (std::size_t i = 1; i < n; ++i) {
            if (std::abs(values[i] - eta) <= level) {
                guess.tau = times[i] - times[0];
                break;
            }
        }
    }
    return guess;
}

ExpFit fit_exponential(std::span<const double> times, std::span<const double> values, const LMConfig &config) {
    check_samples(times, values);
    return fit_exponential(times, values, config, initial_guess(times, values));
}

ExpFit fit_exponential(std::span<const double> times, std::span<const double> values, const LMConfig &config,
                       const ExpParams &start, std::vector<double> *accepted_costs) {
    check_samples(times, values);
    validate(config);
    const Bounds bounds = resolve_bounds(times, config);
    const std::size_t n = times.size();

    ExpFit result;
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    if (*lo_it == *hi_it) {
        result.eta = *lo_it;
        result.gamma = 0.0;
        result.tau = std::numeric_limits<double>::quiet_NaN();
        result.converged = false;
        return result;
    }

    double scale = 0.0;
    for (double v : values) {
        scale += v * v;
    }
    const double exact_fit_cost = 1e-28 * scale;
    const double tol = config.rel_tolerance;

    ExpParams p = start;
    p.tau = std::clamp(p.tau, bounds.lo, bounds.hi);
    double cost = cost_of(p, times, values);
    if (accepted_costs) {
        accepted_costs->push_back(cost);
    }
    double damping = config.initial_damping;
    bool converged = false;
    std::size_t iter = 0;

    while (iter < config.max_iterations && !converged) {
        ++iter;
        if (cost <= exact_fit_cost) {
            converged = true;
            break;
        }
        // Normal equations J^T J and gradient J^T r.
        std::array<std::array<double, 3>, 3> jtj{};
        std::array<double, 3> jtr{};
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = exp_jacobian_row(p, times[i]);
            const double r = values[i] - exp_model(p, times[i]);
            for (int a = 0; a < 3; ++a) {
                jtr[a] += row[a] * r;
                for (int b = 0; b <= a; ++b) {
                    jtj[a][b] += row[a] * row[b];
                }
            }
        }
        for (int a = 0; a < 3; ++a) {
            for (int b = a + 1; b < 3; ++b) {
                jtj[a][b] = jtj[b][a];
            }
        }

        // Cosine between the residual and each Jacobian column; zero at a
        // stationary point independent of scaling.
        double max_cos = 0.0;
        for (int a = 0; a < 3; ++a) {
            if (jtj[a][a] > 0.0) {
                max_cos = std::max(max_cos, std::abs(jtr[a]) / std::sqrt(jtj[a][a] * cost));
            }
        }
        if (max_cos < tol) {
            converged = true;
            break;
        }

        const double diag_max = std::max({jtj[0][0], jtj[1][1], jtj[2][2]});
        bool accepted = false;
        while (!accepted) {
            auto a = jtj;
            for (int k = 0; k < 3; ++k) {
                a[k][k] += damping * std::max(jtj[k][k], 1e-12 * diag_max);
            }
            std::array<double, 3> step{};
            if (solve_spd3(a, jtr, step)) {
                ExpParams trial{p.eta + step[0], p.gamma + step[1], std::clamp(p.tau + step[2], bounds.lo, bounds.hi)};
                const double applied_tau_step = trial.tau - p.tau;
                const bool tiny = std::abs(step[0]) <= tol * (std::abs(p.eta) + tol) &&
                                  std::abs(step[1]) <= tol * (std::abs(p.gamma) + tol) &&
                                  std::abs(applied_tau_step) <= tol * (p.tau + tol);
                const double trial_cost = cost_of(trial, times, values);
                if (trial_cost < cost) {
                    const double reduction = (cost - trial_cost) / cost;
                    assert(trial_cost <= cost);
                    p = trial;
                    cost = trial_cost;
                    if (accepted_costs) {
                        accepted_costs->push_back(cost);
                    }
                    damping = std::max(damping / config.damping_down, 1e-15);
                    accepted = true;
                    if (reduction < tol || tiny) {
                        converged = true;
                    }
                } else if (tiny) {
                    converged = true;
                    break;
                }
            }
            if (!accepted) {
                damping *= config.damping_up;
                if (damping > damping_limit) {
                    break;
                }
            }
        }
        if (!accepted && !converged) {
            break;
        }
    }

    result.eta = p.eta;
    result.gamma = p.gamma;
    result.tau = p.tau;
    result.residual_norm = std::sqrt(cost);
    result.iterations = iter;
    const bool on_bound = p.tau <= bounds.lo || p.tau >= bounds.hi;
    result.converged = converged && !on_bound && std::isfinite(p.tau) && p.tau > 0.0;
    return result;
}

double TCImage::coverage() const {
    if (converged_mask.size() == 0) {
        return 0.0;
    }
    const auto hits = std::count_if(converged_mask.values.begin(), converged_mask.values.end(),
                                    [](unsigned char c) { return c != 0; });
    return static_cast<double>(hits) / static_cast<double>(converged_mask.size());
}

TCImage fit_stack(const StrainStack &stack, const LMConfig &config, std::optional<RealImage> truth) {
    if (stack.kind() != StackKind::cumulative) {
        throw Error(Errc::invalid_argument, "fit_stack expects a cumulative stack");
    }
    if (stack.n_frames() < 4) {
        throw Error(Errc::invalid_argument, "fit_stack needs at least 4 frames");
    }
    validate(config);
    if (truth && (truth->height != stack.height() || truth->width != stack.width())) {
        throw Error(Errc::invalid_argument, "truth map size does not match the stack");
    }
    TCImage tc;
    tc.tau_map = RealImage(stack.height(), stack.width(), std::numeric_limits<double>::quiet_NaN());
    tc.converged_mask = MaskImage(stack.height(), stack.width(), 0);
    tc.truth_map = std::move(truth);
    const auto times = stack.times();
    parallel_for(stack.pixels(), [&](std::size_t begin, std::size_t end) {
        std::vector<double> series;
        for (std::size_t px = begin; px < end; ++px) {
            stack.pixel_series(px, series);
            const ExpFit fit = fit_exponential(times, series, config);
            if (fit.converged) {
                tc.tau_map.values[px] = fit.tau;
                tc.converged_mask.values[px] = 1;
            }
        }
    });
    return tc;
}

StrainStack cumulate(const StrainStack &stack) {
    if (stack.kind() != StackKind::incremental) {
        throw Error(Errc::invalid_argument, "cumulate expects an incremental stack");
    }
    StrainStack out = stack;
    out.set_kind(StackKind::cumulative);
    for (std::size_t n = 1; n < out.n_frames(); ++n) {
        const auto prev = out.frame(n - 1);
        auto cur = out.frame(n);
        for (std::size_t p = 0; p < cur.size(); ++p) {
            cur[p] += prev[p];
        }
    }
    return out;
}

} // namespace straintc
