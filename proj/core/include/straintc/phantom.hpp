#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "straintc/stack.hpp"

namespace straintc {

/// Material and creep-curve parameters of one phantom region.
///
/// The creep curve is s(t) = eta + gamma * exp(-t / tau); eta is the
/// steady-state strain and eta + gamma the strain at t = 0.
struct RegionParams {
    double young_modulus_kpa = 0.0;
    double poisson_ratio = 0.0;
    double tau_s = 0.0;
    double eta = 0.0;
    double gamma = 0.0;

    friend bool operator==(const RegionParams &, const RegionParams &) = default;
};

struct PhantomSpec {
    std::size_t width_px = 128;
    std::size_t height_px = 128;
    double field_width_m = 0.04;
    double field_height_m = 0.04;
    double inclusion_center_x_m = 0.02;
    double inclusion_center_y_m = 0.02;
    double inclusion_radius_m = 0.0075;
    RegionParams inclusion;
    RegionParams background;
    std::size_t n_frames = 300;
    double sample_time_s = 0.5;
    double applied_stress_kpa = 1.0;

    friend bool operator==(const PhantomSpec &, const PhantomSpec &) = default;
};

/// Builds a region with the elastic default amplitudes:
/// eta = stress / E and gamma = -eta / 2.
RegionParams make_region(double young_modulus_kpa, double poisson_ratio, double tau_s,
                         double applied_stress_kpa = 1.0);

/// Presets "A", "B" and "C" with the simulated sample properties
/// (inclusion / background E, nu, tau) at default geometry.
PhantomSpec phantom_preset(std::string_view name);

/// Throws Error(invalid_argument) when any invariant is violated.
void validate(const PhantomSpec &spec);

/// Strain at time t for a region, closed form.
[[nodiscard]] inline double creep_strain(const RegionParams &r, double t) {
    return r.eta + r.gamma * std::exp(-t / r.tau_s);
}

/// Per-interval incremental strain for 1-based frame n:
/// -(gamma / tau) * exp(-n Ts / tau) * Ts.
[[nodiscard]] double incremental_strain(const RegionParams &r, std::size_t n, double sample_time_s);

/// true where the pixel center lies inside the inclusion circle.
MaskImage inclusion_mask(const PhantomSpec &spec);

RealImage tau_map(const PhantomSpec &spec);
StrainStack synth_incremental(const PhantomSpec &spec);
StrainStack synth_cumulative(const PhantomSpec &spec);

/// key = value text, one field per line. Region fields are prefixed with
/// "inclusion." or "background."; the key "preset" loads a named preset
/// that later keys override.
PhantomSpec parse_phantom_config(std::string_view text);
std::string format_phantom_config(const PhantomSpec &spec);
PhantomSpec load_phantom_config(const std::string &path);

} // namespace straintc

