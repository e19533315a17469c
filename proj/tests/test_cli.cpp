#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "cli.hpp"
#include "straintc/io.hpp"

namespace fs = std::filesystem;
using namespace straintc;

namespace {

class CliTest : public ::testing::Test {
  protected:
    void SetUp() override {
        const auto *info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / ("straintc_cli_" + std::string(info->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    int run(std::vector<std::string> args, const fs::path &out_dir = {}) {
        args.emplace_back("--out");
        args.push_back((out_dir.empty() ? dir_ : out_dir).string());
        out_.str("");
        err_.str("");
        return cli::run(args, out_, err_);
    }
    std::string file(const std::string &name) const { return (dir_ / name).string(); }
    std::string read(const std::string &name) const { return io::read_text(file(name)); }

    fs::path dir_;
    std::ostringstream out_;
    std::ostringstream err_;
};

std::map<std::string, std::vector<std::string>> csv_by_first_column(const std::string &text) {
    std::map<std::string, std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::istringstream cs(line);
        std::string cell;
        while (std::getline(cs, cell, ',')) {
            cells.push_back(cell);
        }
        rows[cells.front()] = cells;
    }
    return rows;
}

} // namespace

TEST_F(CliTest, SynthThenFitGivesZeroPre) {
    ASSERT_EQ(run({"synth", "--preset", "A", "--resolution", "16"}), cli::ok) << err_.str();
    for (const char *name : {"incremental.stk", "cumulative.stk", "phantom.txt", "truth_tau.csv", "truth_tau.pgm",
                             "truth_tau.range.txt", "manifest.txt"}) {
        EXPECT_TRUE(fs::exists(file(name))) << name;
    }
    const fs::path fit_dir = dir_ / "fit";
    fs::create_directories(fit_dir);
    ASSERT_EQ(run({"fit", "--input", file("cumulative.stk"), "--phantom", file("phantom.txt")}, fit_dir), cli::ok)
        << err_.str();
    const auto pre = csv_by_first_column(io::read_text((fit_dir / "pre.csv").string()));
    for (const char *region : {"inclusion", "background", "whole"}) {
        ASSERT_TRUE(pre.count(region)) << region;
        EXPECT_LT(std::abs(std::stod(pre.at(region)[1])), 1e-6) << region;
        EXPECT_EQ(pre.at(region)[4], "1");
    }
    EXPECT_TRUE(fs::exists(fit_dir / "tau_map.pgm"));
    EXPECT_TRUE(fs::exists(fit_dir / "converged_mask.csv"));
}

TEST_F(CliTest, DegradeReconstructFitPipeline) {
    ASSERT_EQ(run({"synth", "--preset", "B", "--resolution", "8"}), cli::ok);
    ASSERT_EQ(run({"degrade", "--input", file("incremental.stk"), "--snr-db", "40", "--seed", "3"}), cli::ok);
    const FrameQualityMask mask = io::read_mask(file("mask.csv"));
    EXPECT_EQ(mask.good_count(), 225u);
    ASSERT_EQ(run({"reconstruct", "--input", file("degraded.stk"), "--mask", file("mask.csv")}), cli::ok)
        << err_.str();
    EXPECT_EQ(io::read_stack(file("reconstructed_cumulative.stk")).kind(), StackKind::cumulative);
    ASSERT_EQ(run({"fit", "--input", file("reconstructed_cumulative.stk"), "--phantom", file("phantom.txt")}),
              cli::ok);
    EXPECT_TRUE(fs::exists(file("pre.csv")));
    const fs::path detected = dir_ / "detected";
    fs::create_directories(detected);
    ASSERT_EQ(run({"reconstruct", "--input", file("degraded.stk"), "--detect-bad-frames"}, detected), cli::ok)
        << err_.str();
    const FrameQualityMask found = io::read_mask((detected / "detected_mask.csv").string());
    for (std::size_t f = 0; f < mask.size(); ++f) {
        EXPECT_EQ(found.is_good(f), mask.is_good(f)) << f;
    }
    // Kalman needs no mask.
    ASSERT_EQ(run({"reconstruct", "--input", file("degraded.stk"), "--method", "kalman", "--kalman-window", "5"}),
              cli::ok)
        << err_.str();
}

TEST_F(CliTest, MissingOutputDirectoryIsUsageError) {
    EXPECT_EQ(run({"synth", "--preset", "A"}, dir_ / "does" / "not" / "exist"), cli::usage_error);
    EXPECT_NE(err_.str().find("does not exist"), std::string::npos);
}

TEST_F(CliTest, BadOptionsAreUsageErrors) {
    EXPECT_EQ(run({"synth", "--preset", "Z"}), cli::usage_error);
    EXPECT_EQ(run({"synth", "--no-such-flag"}), cli::usage_error);
    EXPECT_EQ(run({"grid", "--method", "median"}), cli::usage_error);
    EXPECT_EQ(run({"grid", "--trials", "0"}), cli::usage_error);
    EXPECT_EQ(run({"fit", "--input", file("missing.stk")}), cli::usage_error);
    std::ostringstream out;
    std::ostringstream err;
    EXPECT_EQ(cli::run({}, out, err), cli::usage_error);
}

TEST_F(CliTest, InsufficientGoodFramesIsNumericalFailure) {
    ASSERT_EQ(run({"synth", "--preset", "A", "--resolution", "4"}), cli::ok);
    EXPECT_EQ(run({"degrade", "--input", file("incremental.stk"), "--good-fraction", "0.005"}),
              cli::numerical_failure);
    EXPECT_FALSE(err_.str().empty());
}

TEST_F(CliTest, GridWritesTableAndManifestReproduces) {
    ASSERT_EQ(run({"grid", "--sample", "A", "--trials", "1", "--seed", "7", "--resolution", "8", "--snr-db", "30,60",
                   "--good-fraction", "0.5"}),
              cli::ok)
        << err_.str();
    const std::string table = read("grid_table.txt");
    EXPECT_NE(table.find("sample A"), std::string::npos);
    EXPECT_NE(table.find("Spline"), std::string::npos);
    const std::string csv = read("grid.csv");
    const std::string manifest = read("manifest.txt");
    EXPECT_NE(manifest.find("subcommand = grid"), std::string::npos);
    EXPECT_NE(manifest.find("seed = 7"), std::string::npos);

    const fs::path again = dir_ / "again";
    fs::create_directories(again);
    std::ostringstream out;
    std::ostringstream err;
    ASSERT_EQ(cli::run({"--manifest", file("manifest.txt"), "--out", again.string()}, out, err), cli::ok)
        << err.str();
    EXPECT_EQ(io::read_text((again / "grid.csv").string()), csv);
    EXPECT_EQ(io::read_text((again / "grid_table.txt").string()), table);
}

TEST_F(CliTest, OutputDirectoryFromEnvironment) {
    ::setenv(cli::out_dir_env, dir_.c_str(), 1);
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run({"synth", "--preset", "C", "--resolution", "4"}, out, err);
    ::unsetenv(cli::out_dir_env);
    ASSERT_EQ(code, cli::ok) << err.str();
    EXPECT_TRUE(fs::exists(file("cumulative.stk")));
}

TEST_F(CliTest, DemoWritesCurvesForEveryMethod) {
    ASSERT_EQ(run({"demo", "--resolution", "8", "--seed", "1"}), cli::ok) << err_.str();
    const std::string curves = read("demo_curves.csv");
    EXPECT_EQ(curves.substr(0, curves.find('\n')),
              "time_s,clean,noisy,kalman,spline,fit_clean,fit_noisy,fit_kalman,fit_spline");
    std::size_t lines = 0;
    for (char c : curves) {
        lines += c == '\n';
    }
    EXPECT_EQ(lines, 301u);
    const auto fits = csv_by_first_column(read("demo_fits.csv"));
    for (const char *name : {"clean", "noisy", "kalman", "spline"}) {
        EXPECT_TRUE(fits.count(name)) << name;
    }
    EXPECT_NEAR(std::stod(fits.at("clean")[3]), 4.66, 1e-4);
    EXPECT_EQ(run({"demo", "--resolution", "8", "--pixel", "9,0"}), cli::usage_error);
}
