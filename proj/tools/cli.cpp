#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <memory>
#include <ostream>
#include <sstream>

#include "straintc/error.hpp"
#include "straintc/eval.hpp"
#include "straintc/io.hpp"
#include "straintc/spline.hpp"

namespace straintc::cli {

namespace {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

std::string to_text(const std::string &v) { return v; }
std::string to_text(bool v) { return v ? "true" : "false"; }
std::string to_text(double v) { return io::format_double(v); }
std::string to_text(std::size_t v) { return std::to_string(v); }
std::string to_text(std::uint64_t v, int) { return std::to_string(v); }

template <typename T> std::string to_text(const std::vector<T> &values) {
    std::string out;
    for (const auto &v : values) {
        if (!out.empty()) {
            out += ',';
        }
        out += to_text(v);
    }
    return out;
}

// Option values in registration order, for the run manifest.
struct Registry {
    struct Entry {
        std::string name;
        bool is_flag = false;
        std::function<std::string()> value;
    };
    std::vector<Entry> entries;
};

template <typename T>
CLI::Option *add(CLI::App *app, Registry &reg, const std::string &name, T &var, const std::string &desc) {
    reg.entries.push_back({name, false, [&var] { return to_text(var); }});
    auto *opt = app->add_option("--" + name, var, desc)->capture_default_str();
    if constexpr (requires { var.push_back(var.front()); }) {
        opt->delimiter(',');
    }
    return opt;
}

CLI::Option *add_seed(CLI::App *app, Registry &reg, std::uint64_t &seed) {
    reg.entries.push_back({"seed", false, [&seed] { return to_text(seed, 0); }});
    return app->add_option("--seed", seed, "RNG seed")->capture_default_str();
}

CLI::Option *add_flag(CLI::App *app, Registry &reg, const std::string &name, bool &var, const std::string &desc) {
    reg.entries.push_back({name, true, [&var] { return to_text(var); }});
    return app->add_flag("--" + name, var, desc);
}

struct PhantomOptions {
    std::string preset = "A";
    std::string config;
    std::size_t resolution = 0;

    void attach(CLI::App *app, Registry &reg) {
        add(app, reg, "preset", preset, "phantom preset (A, B or C)")->check(CLI::IsMember({"A", "B", "C"}));
        add(app, reg, "config", config, "phantom config file (key = value); overrides --preset");
        add(app, reg, "resolution", resolution, "square image size in pixels (0 keeps the phantom's)");
    }

    [[nodiscard]] PhantomSpec resolve() const {
        PhantomSpec spec = config.empty() ? phantom_preset(preset) : load_phantom_config(config);
        if (resolution > 0) {
            spec.width_px = resolution;
            spec.height_px = resolution;
        }
        validate(spec);
        return spec;
    }
};

struct NoiseOptions {
    double snr_db = 30.0;
    double bad_snr_db = 0.0;
    double good_fraction = 0.75;
    std::uint64_t seed = 0;

    void attach(CLI::App *app, Registry &reg) {
        add(app, reg, "snr-db", snr_db, "SNR of good frames (dB)");
        add(app, reg, "bad-snr-db", bad_snr_db, "SNR of bad frames (dB)");
        add(app, reg, "good-fraction", good_fraction, "fraction of good frames in (0, 1]");
        add_seed(app, reg, seed);
    }

    [[nodiscard]] NoiseSpec spec() const { return NoiseSpec{snr_db, bad_snr_db, good_fraction, seed}; }
};

std::optional<double> parse_variance(const std::string &text, const char *name) {
    if (text == "auto") {
        return std::nullopt;
    }
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used == text.size()) {
            return v;
        }
    } catch (const std::exception &) {
    }
    throw UsageError(std::string(name) + " must be a number or 'auto'");
}

struct KalmanOptions {
    std::size_t window = 13;
    std::string q = "auto";
    std::string r = "auto";

    void attach(CLI::App *app, Registry &reg) {
        add(app, reg, "kalman-window", window, "Kalman smoothing window (samples)");
        add(app, reg, "kalman-q", q, "process noise variance or 'auto'");
        add(app, reg, "kalman-r", r, "measurement noise variance or 'auto'");
    }

    [[nodiscard]] KalmanSpec spec() const {
        KalmanSpec s;
        s.window_len = window;
        s.process_noise_var = parse_variance(q, "--kalman-q");
        s.measurement_noise_var = parse_variance(r, "--kalman-r");
        validate(s);
        return s;
    }
};

struct LMOptions {
    std::size_t max_iter = 200;
    double tol = 1e-10;

    void attach(CLI::App *app, Registry &reg) {
        add(app, reg, "lm-max-iter", max_iter, "Levenberg-Marquardt iteration limit");
        add(app, reg, "lm-tol", tol, "Levenberg-Marquardt relative tolerance");
    }

    [[nodiscard]] LMConfig config() const {
        LMConfig c;
        c.max_iterations = max_iter;
        c.rel_tolerance = tol;
        validate(c);
        return c;
    }
};

struct Context {
    std::ostream &out;
    std::ostream &err;
    std::string out_dir;

    [[nodiscard]] std::string path(const std::string &name) const { return (fs::path(out_dir) / name).string(); }
};

struct Command {
    CLI::App *app = nullptr;
    Registry registry;
    std::function<void(Context &)> run;
};

StrainStack load_stack(const std::string &path) {
    if (path.empty()) {
        throw UsageError("--input is required");
    }
    return io::read_stack(path);
}

std::string manifest_text(const std::string &subcommand, const Registry &reg) {
    std::string text = "# straintc run manifest\nsubcommand = " + subcommand + "\n";
    for (const auto &e : reg.entries) {
        text += e.name + " = " + e.value() + "\n";
    }
    return text;
}

void write_pre_csv(const std::string &path, const TCImage &tc, const MaskImage &inclusion) {
    std::string csv = "region,pre_percent,mean_estimated_tau,true_tau,coverage\n";
    for (Region r : {Region::inclusion, Region::background, Region::whole}) {
        try {
            const PREResult pre = compute_pre(tc, inclusion, r);
            csv += std::string(to_string(r)) + ',' + io::format_double(pre.pre_percent) + ',' +
                   io::format_double(pre.mean_estimated_tau) + ',' + io::format_double(pre.true_tau) + ',' +
                   io::format_double(pre.coverage) + '\n';
        } catch (const Error &e) {
            if (e.code() != Errc::empty_region) {
                throw;
            }
            csv += std::string(to_string(r)) + ",nan,nan,nan,0\n";
        }
    }
    io::write_text(path, csv);
}

RealImage mask_to_image(const MaskImage &mask) {
    RealImage img(mask.height, mask.width);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        img.values[i] = mask.values[i] ? 1.0 : 0.0;
    }
    return img;
}

std::string format_fraction_tag(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%03.0f", v * 100.0);
    return buf;
}

// --- subcommands -----------------------------------------------------------

void make_synth(CLI::App &root, Command &cmd) {
    auto phantom = std::make_shared<PhantomOptions>();
    cmd.app = root.add_subcommand("synth", "write clean incremental and cumulative phantom stacks");
    phantom->attach(cmd.app, cmd.registry);
    cmd.run = [phantom](Context &ctx) {
        const PhantomSpec spec = phantom->resolve();
        io::write_stack(ctx.path("incremental.stk"), synth_incremental(spec));
        io::write_stack(ctx.path("cumulative.stk"), synth_cumulative(spec));
        io::write_text(ctx.path("phantom.txt"), format_phantom_config(spec));
        io::write_tc_map(ctx.path("truth_tau"), tau_map(spec));
        ctx.out << "synth: " << spec.n_frames << " frames of " << spec.height_px << "x" << spec.width_px << " -> "
                << ctx.out_dir << '\n';
    };
}

void make_degrade(CLI::App &root, Command &cmd) {
    struct Opts {
        std::string input;
        NoiseOptions noise;
    };
    auto o = std::make_shared<Opts>();
    cmd.app = root.add_subcommand("degrade", "add noise and bad frames to an incremental stack");
    add(cmd.app, cmd.registry, "input", o->input, "incremental stack file");
    o->noise.attach(cmd.app, cmd.registry);
    cmd.run = [o](Context &ctx) {
        const StrainStack clean = load_stack(o->input);
        if (clean.kind() != StackKind::incremental) {
            throw UsageError("degrade expects an incremental stack");
        }
        const NoiseSpec noise = o->noise.spec();
        const FrameQualityMask mask = place_bad_frames(clean.n_frames(), noise);
        io::write_stack(ctx.path("degraded.stk"), add_noise(clean, mask, noise));
        io::write_text(ctx.path("mask.csv"), io::mask_csv(mask));
        ctx.out << "degrade: " << mask.good_count() << " good / " << mask.size() << " frames\n";
    };
}

void make_reconstruct(CLI::App &root, Command &cmd) {
    struct Opts {
        std::string input;
        std::string mask;
        std::string method = "spline";
        bool detect = false;
        DetectorConfig detector;
        KalmanOptions kalman;
    };
    auto o = std::make_shared<Opts>();
    cmd.app = root.add_subcommand("reconstruct", "denoise a degraded incremental stack");
    add(cmd.app, cmd.registry, "input", o->input, "degraded incremental stack file");
    add(cmd.app, cmd.registry, "mask", o->mask, "frame mask CSV (frame,label,applied_snr_db)");
    add(cmd.app, cmd.registry, "method", o->method, "spline, kalman or noisy")
        ->check(CLI::IsMember({"spline", "kalman", "noisy"}));
    add_flag(cmd.app, cmd.registry, "detect-bad-frames", o->detect, "estimate the frame mask from the data");
    add(cmd.app, cmd.registry, "detect-half-window", o->detector.half_window, "detector neighbour frames per side")
        ->check(CLI::PositiveNumber);
    add(cmd.app, cmd.registry, "detect-threshold", o->detector.threshold, "detector threshold (x global scale)")
        ->check(CLI::PositiveNumber);
    add(cmd.app, cmd.registry, "detect-quantile", o->detector.scale_quantile,
        "quantile of the frame statistic used as the global scale")
        ->check(CLI::Range(0.0, 1.0));
    o->kalman.attach(cmd.app, cmd.registry);
    cmd.run = [o](Context &ctx) {
        const StrainStack degraded = load_stack(o->input);
        if (degraded.kind() != StackKind::incremental) {
            throw UsageError("reconstruct expects an incremental stack");
        }
        const Method method = parse_method(o->method);
        FrameQualityMask mask;
        if (!o->mask.empty()) {
            mask = io::read_mask(o->mask);
        } else if (o->detect) {
            mask = detect_bad_frames(degraded, o->detector);
            io::write_text(ctx.path("detected_mask.csv"), io::mask_csv(mask));
        } else if (method == Method::spline) {
            throw UsageError("spline reconstruction needs --mask or --detect-bad-frames");
        } else {
            mask = FrameQualityMask::all_good(degraded.n_frames(), std::nan(""));
        }
        if (mask.size() != degraded.n_frames()) {
            throw UsageError("mask has " + std::to_string(mask.size()) + " frames, stack has " +
                             std::to_string(degraded.n_frames()));
        }
        const StrainStack out = apply_method(method, degraded, mask, o->kalman.spec());
        io::write_stack(ctx.path("reconstructed.stk"), out);
        io::write_stack(ctx.path("reconstructed_cumulative.stk"), cumulate(out));
        ctx.out << "reconstruct: " << o->method << ", " << mask.good_count() << " good frames\n";
    };
}

void make_fit(CLI::App &root, Command &cmd) {
    struct Opts {
        std::string input;
        std::string phantom;
        bool cumulate_input = false;
        LMOptions lm;
    };
    auto o = std::make_shared<Opts>();
    cmd.app = root.add_subcommand("fit", "fit the creep exponential per pixel and write the TC image");
    add(cmd.app, cmd.registry, "input", o->input, "cumulative stack file");
    add(cmd.app, cmd.registry, "phantom", o->phantom, "phantom config giving the true TC map (enables PRE)");
    add_flag(cmd.app, cmd.registry, "cumulate", o->cumulate_input, "accept an incremental stack and cumulate it");
    o->lm.attach(cmd.app, cmd.registry);
    cmd.run = [o](Context &ctx) {
        StrainStack stack = load_stack(o->input);
        if (stack.kind() == StackKind::incremental) {
            if (!o->cumulate_input) {
                throw UsageError("fit expects a cumulative stack (pass --cumulate for incremental input)");
            }
            stack = cumulate(stack);
        }
        std::optional<RealImage> truth;
        std::optional<MaskImage> inclusion;
        if (!o->phantom.empty()) {
            const PhantomSpec spec = load_phantom_config(o->phantom);
            if (spec.height_px != stack.height() || spec.width_px != stack.width()) {
                throw UsageError("phantom size does not match the stack");
            }
            truth = tau_map(spec);
            inclusion = inclusion_mask(spec);
        }
        const TCImage tc = fit_stack(stack, o->lm.config(), truth);
        io::write_tc_map(ctx.path("tau_map"), tc.tau_map);
        io::write_text(ctx.path("converged_mask.csv"), io::image_csv(mask_to_image(tc.converged_mask)));
        if (inclusion) {
            write_pre_csv(ctx.path("pre.csv"), tc, *inclusion);
        }
        ctx.out << "fit: coverage " << io::format_double(tc.coverage()) << '\n';
    };
}

void make_grid(CLI::App &root, Command &cmd) {
    struct Opts {
        std::vector<std::string> samples{"A", "B", "C"};
        std::vector<std::string> methods{"noisy", "kalman", "spline"};
        std::vector<double> snrs{30.0, 40.0, 60.0};
        std::vector<double> fractions{0.20, 0.50, 0.75};
        std::size_t trials = 10;
        std::uint64_t seed = 0;
        double bad_snr_db = 0.0;
        std::size_t resolution = 0;
        bool emit_maps = false;
        KalmanOptions kalman;
        LMOptions lm;
    };
    auto o = std::make_shared<Opts>();
    cmd.app = root.add_subcommand("grid", "run the method x SNR x good-fraction evaluation grid");
    add(cmd.app, cmd.registry, "sample", o->samples, "phantom presets")->check(CLI::IsMember({"A", "B", "C"}));
    add(cmd.app, cmd.registry, "method", o->methods, "methods")
        ->check(CLI::IsMember({"noisy", "kalman", "spline"}));
    add(cmd.app, cmd.registry, "snr-db", o->snrs, "good-frame SNRs (dB)");
    add(cmd.app, cmd.registry, "good-fraction", o->fractions, "good-frame fractions");
    add(cmd.app, cmd.registry, "trials", o->trials, "trials per cell")->check(CLI::PositiveNumber);
    add_seed(cmd.app, cmd.registry, o->seed);
    add(cmd.app, cmd.registry, "bad-snr-db", o->bad_snr_db, "SNR of bad frames (dB)");
    add(cmd.app, cmd.registry, "resolution", o->resolution, "square image size (0 keeps 128)");
    add_flag(cmd.app, cmd.registry, "emit-maps", o->emit_maps, "write the first trial's TC map per cell");
    o->kalman.attach(cmd.app, cmd.registry);
    o->lm.attach(cmd.app, cmd.registry);
    cmd.run = [o](Context &ctx) {
        GridConfig config;
        config.samples = o->samples;
        config.methods.clear();
        for (const auto &m : o->methods) {
            config.methods.push_back(parse_method(m));
        }
        config.snrs_db = o->snrs;
        config.good_fractions = o->fractions;
        config.trials = o->trials;
        config.seed = o->seed;
        config.bad_frame_snr_db = o->bad_snr_db;
        config.resolution = o->resolution;
        config.kalman = o->kalman.spec();
        config.lm = o->lm.config();
        config.keep_first_maps = o->emit_maps;
        const auto results = run_grid(config, [&](const GridResult &cell) {
            ctx.out << "grid: " << cell.sample << ' ' << to_string(cell.method) << " snr "
                    << io::format_double(cell.snr_db) << " pgf " << io::format_double(cell.good_fraction)
                    << " |PRE| " << io::format_double(cell.pre_mean()) << '\n';
        });
        io::write_text(ctx.path("grid.csv"), grid_csv(results));
        io::write_text(ctx.path("grid_table.txt"), grid_table(results));
        io::write_text(ctx.path("timing.csv"), timing_csv(results));
        std::string failures;
        for (const auto &cell : results) {
            for (const auto &f : cell.failures) {
                failures += cell.sample + ' ' + to_string(cell.method) + " snr " + io::format_double(cell.snr_db) +
                            " pgf " + io::format_double(cell.good_fraction) + ": " + f + '\n';
            }
        }
        if (!failures.empty()) {
            io::write_text(ctx.path("failures.txt"), failures);
        }
        if (o->emit_maps) {
            fs::create_directories(ctx.path("maps"));
            for (const auto &cell : results) {
                if (!cell.first_map) {
                    continue;
                }
                const std::string stem = "maps/" + cell.sample + "_" + to_string(cell.method) + "_snr" +
                                         io::format_double(cell.snr_db) + "_pgf" +
                                         format_fraction_tag(cell.good_fraction);
                io::write_tc_map(ctx.path(stem), cell.first_map->tau_map);
            }
        }
        ctx.out << grid_table(results);
    };
}

void make_demo(CLI::App &root, Command &cmd) {
    struct Opts {
        PhantomOptions phantom;
        NoiseOptions noise;
        std::string pixel;
        KalmanOptions kalman;
        LMOptions lm;
    };
    auto o = std::make_shared<Opts>();
    o->noise.snr_db = 60.0;
    cmd.app = root.add_subcommand("demo", "one sample-A cell end to end; writes per-method curves of one pixel");
    o->phantom.attach(cmd.app, cmd.registry);
    o->noise.attach(cmd.app, cmd.registry);
    add(cmd.app, cmd.registry, "pixel", o->pixel, "ROW,COL of the plotted pixel (default: inclusion center)");
    o->kalman.attach(cmd.app, cmd.registry);
    o->lm.attach(cmd.app, cmd.registry);
    cmd.run = [o](Context &ctx) {
        const PhantomSpec spec = o->phantom.resolve();
        std::size_t row = std::min(spec.height_px - 1,
                                   static_cast<std::size_t>(spec.inclusion_center_y_m / spec.field_height_m *
                                                            static_cast<double>(spec.height_px)));
        std::size_t col = std::min(spec.width_px - 1,
                                   static_cast<std::size_t>(spec.inclusion_center_x_m / spec.field_width_m *
                                                            static_cast<double>(spec.width_px)));
        if (!o->pixel.empty()) {
            char sep = 0;
            std::istringstream in(o->pixel);
            if (!(in >> row >> sep >> col) || sep != ',') {
                throw UsageError("--pixel expects ROW,COL");
            }
            if (row >= spec.height_px || col >= spec.width_px) {
                throw UsageError("--pixel is outside the image");
            }
        }
        const std::size_t px = row * spec.width_px + col;

        const TrialData trial = make_trial(spec, o->noise.spec());
        const LMConfig lm = o->lm.config();
        const KalmanSpec kalman = o->kalman.spec();
        const auto times = trial.degraded.times();

        struct Curve {
            std::string name;
            std::vector<double> values;
            ExpFit fit;
        };
        std::vector<Curve> curves;
        std::vector<double> series;
        cumulate(synth_incremental(spec)).pixel_series(px, series);
        curves.push_back({"clean", series, {}});
        for (Method m : {Method::noisy, Method::kalman, Method::spline}) {
            cumulate(apply_method(m, trial.degraded, trial.mask, kalman)).pixel_series(px, series);
            curves.push_back({to_string(m), series, {}});
        }
        std::string fits = "curve,eta,gamma,tau,true_tau,converged,iterations\n";
        for (auto &c : curves) {
            c.fit = fit_exponential(times, c.values, lm);
            fits += c.name + ',' + io::format_double(c.fit.eta) + ',' + io::format_double(c.fit.gamma) + ',' +
                    io::format_double(c.fit.tau) + ',' + io::format_double(trial.truth.values[px]) + ',' +
                    (c.fit.converged ? "1" : "0") + ',' + std::to_string(c.fit.iterations) + '\n';
        }
        std::string csv = "time_s";
        for (const auto &c : curves) {
            csv += ',' + c.name;
        }
        for (const auto &c : curves) {
            csv += ",fit_" + c.name;
        }
        csv += '\n';
        for (std::size_t n = 0; n < times.size(); ++n) {
            csv += io::format_double(times[n]);
            for (const auto &c : curves) {
                csv += ',' + io::format_double(c.values[n]);
            }
            for (const auto &c : curves) {
                const double v = std::isfinite(c.fit.tau) ? exp_model({c.fit.eta, c.fit.gamma, c.fit.tau}, times[n])
                                                          : std::nan("");
                csv += ',' + io::format_double(v);
            }
            csv += '\n';
        }
        io::write_text(ctx.path("demo_curves.csv"), csv);
        io::write_text(ctx.path("demo_fits.csv"), fits);
        io::write_text(ctx.path("mask.csv"), io::mask_csv(trial.mask));
        ctx.out << fits;
    };
}

int exit_code_for(Errc code) {
    switch (code) {
    case Errc::insufficient_knots:
    case Errc::non_monotonic_knots:
    case Errc::insufficient_good_frames:
    case Errc::empty_region:
        return numerical_failure;
    case Errc::invalid_argument:
    case Errc::io_error:
        return usage_error;
    }
    return numerical_failure;
}

// Expands "--manifest FILE [--out DIR]" into the recorded subcommand and its
// options.
std::vector<std::string> expand_manifest(const std::vector<std::string> &args) {
    std::string manifest;
    std::string out_override;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--manifest" && i + 1 < args.size()) {
            manifest = args[++i];
        } else if (args[i] == "--out" && i + 1 < args.size()) {
            out_override = args[++i];
        } else if (args[i].starts_with("--manifest=")) {
            manifest = args[i].substr(11);
        } else {
            throw UsageError("with --manifest only --out may be given (got '" + args[i] + "')");
        }
    }
    if (manifest.empty()) {
        throw UsageError("--manifest needs a file");
    }
    auto kv = io::parse_key_values(io::read_text(manifest));
    const auto sub = kv.find("subcommand");
    if (sub == kv.end()) {
        throw UsageError("manifest has no 'subcommand' entry");
    }
    // Keep the manifest's option order so vector options stay intact.
    std::vector<std::string> expanded{sub->second};
    const std::string text = io::read_text(manifest);
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        const auto eq = line.find('=');
        if (line.empty() || line[0] == '#' || eq == std::string::npos) {
            continue;
        }
        auto trim = [](std::string s) {
            s.erase(0, s.find_first_not_of(" \t\r"));
            s.erase(s.find_last_not_of(" \t\r") + 1);
            return s;
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "subcommand" || key == "out" || value.empty()) {
            continue;
        }
        if (value == "true") {
            expanded.push_back("--" + key);
        } else if (value != "false") {
            expanded.push_back("--" + key);
            expanded.push_back(value);
        }
    }
    std::string out_dir = out_override;
    if (out_dir.empty()) {
        if (auto it = kv.find("out"); it != kv.end()) {
            out_dir = it->second;
        }
    }
    if (!out_dir.empty()) {
        expanded.push_back("--out");
        expanded.push_back(out_dir);
    }
    return expanded;
}

} // namespace

int run(const std::vector<std::string> &raw_args, std::ostream &out, std::ostream &err) {
    std::vector<std::string> args = raw_args;
    try {
        if (!args.empty() && (args.front() == "--manifest" || args.front().starts_with("--manifest="))) {
            args = expand_manifest(args);
        }
    } catch (const UsageError &e) {
        err << "straintc: " << e.what() << '\n';
        return usage_error;
    } catch (const Error &e) {
        err << "straintc: " << e.what() << '\n';
        return usage_error;
    }

    CLI::App app{"Strain time-constant estimation from noisy poroelastography stacks"};
    app.require_subcommand(1, 1);
    app.set_help_all_flag("--help-all", "show help for all subcommands");

    std::vector<Command> commands(6);
    make_synth(app, commands[0]);
    make_degrade(app, commands[1]);
    make_reconstruct(app, commands[2]);
    make_fit(app, commands[3]);
    make_grid(app, commands[4]);
    make_demo(app, commands[5]);

    const char *env_out = std::getenv(out_dir_env);
    std::string out_dir = env_out != nullptr ? env_out : ".";
    for (auto &cmd : commands) {
        cmd.registry.entries.insert(cmd.registry.entries.begin(), {"out", false, [&out_dir] { return out_dir; }});
        cmd.app->add_option("--out", out_dir, "output directory (default: $STRAINTC_OUT_DIR or .)");
    }

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError &e) {
        err << "straintc: " << e.what() << '\n';
        return usage_error;
    }

    for (auto &cmd : commands) {
        if (!cmd.app->parsed()) {
            continue;
        }
        try {
            if (!fs::is_directory(out_dir)) {
                throw UsageError("output directory '" + out_dir + "' does not exist");
            }
            Context ctx{out, err, out_dir};
            io::write_text(ctx.path("manifest.txt"), manifest_text(cmd.app->get_name(), cmd.registry));
            cmd.run(ctx);
            return ok;
        } catch (const UsageError &e) {
            err << "straintc " << cmd.app->get_name() << ": " << e.what() << '\n';
            return usage_error;
        } catch (const Error &e) {
            err << "straintc " << cmd.app->get_name() << ": " << e.what() << '\n';
            return exit_code_for(e.code());
        } catch (const std::exception &e) {
            err << "straintc " << cmd.app->get_name() << ": " << e.what() << '\n';
            return numerical_failure;
        }
    }
    return usage_error;
}

} // namespace straintc::cli
