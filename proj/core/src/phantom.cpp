#include "straintc/phantom.hpp"

#include <cmath>
#include <sstream>

#include "straintc/error.hpp"
#include "straintc/io.hpp"
#include "straintc/parallel.hpp"

namespace straintc {

namespace {

void require(bool ok, const std::string &what) {
    if (!ok) {
        throw Error(Errc::invalid_argument, "invalid phantom: " + what);
    }
}

void validate_region(const RegionParams &r, const std::string &name) {
    require(r.tau_s > 0.0, name + ".tau must be > 0");
    require(r.poisson_ratio > 0.0 && r.poisson_ratio < 0.5, name + ".poisson_ratio must be in (0, 0.5)");
    require(r.young_modulus_kpa > 0.0, name + ".young_modulus must be > 0");
    require(r.eta + r.gamma >= 0.0, name + ": eta + gamma must be >= 0");
    require(std::isfinite(r.eta) && std::isfinite(r.gamma), name + ": eta and gamma must be finite");
}

double parse_number(const std::string &key, const std::string &value) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &used);
    } catch (const std::exception &) {
        used = 0;
    }
    if (used == 0 || value.find_first_not_of(" \t", used) != std::string::npos) {
        throw Error(Errc::invalid_argument, "phantom config: bad number for '" + key + "': " + value);
    }
    return v;
}

std::size_t parse_count(const std::string &key, const std::string &value) {
    const double v = parse_number(key, value);
    if (v < 0 || v != std::floor(v)) {
        throw Error(Errc::invalid_argument, "phantom config: '" + key + "' must be a non-negative integer");
    }
    return static_cast<std::size_t>(v);
}

bool set_region_field(RegionParams &r, const std::string &field, const std::string &key, const std::string &value) {
    if (field == "young_modulus") {
        r.young_modulus_kpa = parse_number(key, value);
    } else if (field == "poisson_ratio") {
        r.poisson_ratio = parse_number(key, value);
    } else if (field == "tau") {
        r.tau_s = parse_number(key, value);
    } else if (field == "eta") {
        r.eta = parse_number(key, value);
    } else if (field == "gamma") {
        r.gamma = parse_number(key, value);
    } else {
        return false;
    }
    return true;
}

void format_region(std::ostringstream &out, const std::string &prefix, const RegionParams &r) {
    out << prefix << ".young_modulus = " << io::format_double(r.young_modulus_kpa) << '\n';
    out << prefix << ".poisson_ratio = " << io::format_double(r.poisson_ratio) << '\n';
    out << prefix << ".tau = " << io::format_double(r.tau_s) << '\n';
    out << prefix << ".eta = " << io::format_double(r.eta) << '\n';
    out << prefix << ".gamma = " << io::format_double(r.gamma) << '\n';
}

} // namespace

RegionParams make_region(double young_modulus_kpa, double poisson_ratio, double tau_s, double applied_stress_kpa) {
    RegionParams r;
    r.young_modulus_kpa = young_modulus_kpa;
    r.poisson_ratio = poisson_ratio;
    r.tau_s = tau_s;
    r.eta = applied_stress_kpa / young_modulus_kpa;
    r.gamma = -0.5 * r.eta;
    return r;
}

PhantomSpec phantom_preset(std::string_view name) {
    PhantomSpec spec;
    if (name == "A") {
        spec.inclusion = make_region(49.17, 0.45, 4.66);
        spec.background = make_region(32.78, 0.47, 11.42);
    } else if (name == "B") {
        spec.inclusion = make_region(97.02, 0.45, 2.36);
        spec.background = make_region(32.78, 0.47, 11.42);
    } else if (name == "C") {
        spec.inclusion = make_region(63.90, 0.47, 2.26);
        spec.background = make_region(32.78, 0.49, 3.08);
    } else {
        throw Error(Errc::invalid_argument, "unknown phantom preset '" + std::string(name) + "' (expected A, B or C)");
    }
    return spec;
}

void validate(const PhantomSpec &spec) {
    require(spec.width_px > 0 && spec.height_px > 0, "image size must be positive");
    require(spec.field_width_m > 0.0 && spec.field_height_m > 0.0, "field size must be positive");
    require(spec.n_frames >= 3, "n_frames must be >= 3");
    require(spec.sample_time_s > 0.0, "sample_time_s must be > 0");
    require(spec.inclusion_radius_m >= 0.0, "inclusion radius must be >= 0");
    const double r = spec.inclusion_radius_m;
    require(spec.inclusion_center_x_m - r >= 0.0 && spec.inclusion_center_x_m + r <= spec.field_width_m &&
                spec.inclusion_center_y_m - r >= 0.0 && spec.inclusion_center_y_m + r <= spec.field_height_m,
            "inclusion circle must lie inside the field");
    validate_region(spec.inclusion, "inclusion");
    validate_region(spec.background, "background");
}

double incremental_strain(const RegionParams &r, std::size_t n, double sample_time_s) {
    const double t = static_cast<double>(n) * sample_time_s;
    return -(r.gamma / r.tau_s) * std::exp(-t / r.tau_s) * sample_time_s;
}

MaskImage inclusion_mask(const PhantomSpec &spec) {
    validate(spec);
    MaskImage mask(spec.height_px, spec.width_px, 0);
    const double dx = spec.field_width_m / static_cast<double>(spec.width_px);
    const double dy = spec.field_height_m / static_cast<double>(spec.height_px);
    const double r2 = spec.inclusion_radius_m * spec.inclusion_radius_m;
    for (std::size_t row = 0; row < spec.height_px; ++row) {
        const double y = (static_cast<double>(row) + 0.5) * dy - spec.inclusion_center_y_m;
        for (std::size_t col = 0; col < spec.width_px; ++col) {
            const double x = (static_cast<double>(col) + 0.5) * dx - spec.inclusion_center_x_m;
            mask(row, col) = (x * x + y * y < r2) ? 1 : 0;
        }
    }
    return mask;
}

RealImage tau_map(const PhantomSpec &spec) {
    const MaskImage inside = inclusion_mask(spec);
    RealImage map(spec.height_px, spec.width_px);
    for (std::size_t i = 0; i < map.size(); ++i) {
        map.values[i] = inside.values[i] ? spec.inclusion.tau_s : spec.background.tau_s;
    }
    return map;
}

namespace {

template <typename FrameValue>
StrainStack synthesize(const PhantomSpec &spec, StackKind kind, FrameValue value_of) {
    const MaskImage inside = inclusion_mask(spec);
    StrainStack stack(spec.n_frames, spec.height_px, spec.width_px, spec.sample_time_s, kind);
    parallel_for(spec.n_frames, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            // Frames are 1-based in time.
            const double in_value = value_of(spec.inclusion, i + 1);
            const double bg_value = value_of(spec.background, i + 1);
            auto frame = stack.frame(i);
            for (std::size_t p = 0; p < frame.size(); ++p) {
                frame[p] = inside.values[p] ? in_value : bg_value;
            }
        }
    });
    return stack;
}

} // namespace

StrainStack synth_incremental(const PhantomSpec &spec) {
    return synthesize(spec, StackKind::incremental, [&](const RegionParams &r, std::size_t n) {
        return incremental_strain(r, n, spec.sample_time_s);
    });
}

StrainStack synth_cumulative(const PhantomSpec &spec) {
    return synthesize(spec, StackKind::cumulative, [&](const RegionParams &r, std::size_t n) {
        return creep_strain(r, static_cast<double>(n) * spec.sample_time_s);
    });
}

PhantomSpec parse_phantom_config(std::string_view text) {
    const auto kv = io::parse_key_values(text);
    PhantomSpec spec;
    if (auto it = kv.find("preset"); it != kv.end()) {
        spec = phantom_preset(it->second);
    }
    for (const auto &[key, value] : kv) {
        if (key == "preset") {
            continue;
        } else if (key == "width_px") {
            spec.width_px = parse_count(key, value);
        } else if (key == "height_px") {
            spec.height_px = parse_count(key, value);
        } else if (key == "field_width_m") {
            spec.field_width_m = parse_number(key, value);
        } else if (key == "field_height_m") {
            spec.field_height_m = parse_number(key, value);
        } else if (key == "inclusion_center") {
            const auto comma = value.find(',');
            if (comma == std::string::npos) {
                throw Error(Errc::invalid_argument, "phantom config: inclusion_center expects 'x, y'");
            }
            spec.inclusion_center_x_m = parse_number(key, value.substr(0, comma));
            spec.inclusion_center_y_m = parse_number(key, value.substr(comma + 1));
        } else if (key == "inclusion_radius_m") {
            spec.inclusion_radius_m = parse_number(key, value);
        } else if (key == "n_frames") {
            spec.n_frames = parse_count(key, value);
        } else if (key == "sample_time_s") {
            spec.sample_time_s = parse_number(key, value);
        } else if (key == "applied_stress_kpa") {
            spec.applied_stress_kpa = parse_number(key, value);
        } else if (key.starts_with("inclusion.") &&
                   set_region_field(spec.inclusion, key.substr(10), key, value)) {
            continue;
        } else if (key.starts_with("background.") &&
                   set_region_field(spec.background, key.substr(11), key, value)) {
            continue;
        } else {
            throw Error(Errc::invalid_argument, "phantom config: unknown key '" + key + "'");
        }
    }
    validate(spec);
    return spec;
}

std::string format_phantom_config(const PhantomSpec &spec) {
    std::ostringstream out;
    out << "width_px = " << spec.width_px << '\n';
    out << "height_px = " << spec.height_px << '\n';
    out << "field_width_m = " << io::format_double(spec.field_width_m) << '\n';
    out << "field_height_m = " << io::format_double(spec.field_height_m) << '\n';
    out << "inclusion_center = " << io::format_double(spec.inclusion_center_x_m) << ", "
        << io::format_double(spec.inclusion_center_y_m) << '\n';
    out << "inclusion_radius_m = " << io::format_double(spec.inclusion_radius_m) << '\n';
    format_region(out, "inclusion", spec.inclusion);
    format_region(out, "background", spec.background);
    out << "n_frames = " << spec.n_frames << '\n';
    out << "sample_time_s = " << io::format_double(spec.sample_time_s) << '\n';
    out << "applied_stress_kpa = " << io::format_double(spec.applied_stress_kpa) << '\n';
    return out.str();
}

PhantomSpec load_phantom_config(const std::string &path) { return parse_phantom_config(io::read_text(path)); }

} // namespace straintc
